#pragma once

// Line-delimited record files: one JSON object per line, UTF-8, '\n' terminated.
// Field layouts are documented in docs/record-format.md.
//
// Each record type provides a RecordCodec<T> specialization with
//   static json encode(const T&);
//   static T decode(const json&);   // throws ParseError naming the field
// and the templates below handle lines, files, and line numbers.

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "humorgen/error.hpp"
#include "humorgen/types.hpp"

namespace humorgen {

using json = nlohmann::ordered_json;

template <class T>
struct RecordCodec;

namespace fields {

const json& require(const json& j, std::string_view name);
std::string get_string(const json& j, std::string_view name);
std::optional<std::string> get_optional_string(const json& j, std::string_view name);
bool get_bool(const json& j, std::string_view name);
std::optional<bool> get_optional_bool(const json& j, std::string_view name);
long long get_int(const json& j, std::string_view name);
std::optional<long long> get_optional_int(const json& j, std::string_view name);
double get_double(const json& j, std::string_view name);
std::vector<std::string> get_string_list(const json& j, std::string_view name);

}  // namespace fields

/// Compact single-line dump; invalid UTF-8 is replaced rather than thrown on.
inline std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

template <class T>
std::string serialize_record(const T& value) {
  return dump_line(RecordCodec<T>::encode(value));
}

template <class T>
T parse_record(std::string_view line, std::size_t line_no = 0) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!j.is_object()) throw ParseError("", "record is not a JSON object", line_no);
  try {
    return RecordCodec<T>::decode(j);
  } catch (const ParseError& e) {
    throw e.at_line(line_no);
  } catch (const ValidationError& e) {
    throw ParseError("", e.what(), line_no);
  }
}

/// Streams records, calling `sink` for each; blank lines are skipped.
template <class T>
void for_each_record(std::istream& in, const std::function<void(T&&)>& sink) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    sink(parse_record<T>(line, line_no));
  }
}

template <class T>
std::vector<T> read_records(std::istream& in) {
  std::vector<T> out;
  for_each_record<T>(in, [&](T&& v) { out.push_back(std::move(v)); });
  return out;
}

template <class T>
std::vector<T> read_record_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open record file " + path.string());
  return read_records<T>(in);
}

template <class T>
void write_records(std::ostream& out, const std::vector<T>& values) {
  for (const auto& v : values) out << serialize_record(v) << '\n';
}

template <class T>
void write_record_file(const std::filesystem::path& path, const std::vector<T>& values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write record file " + path.string());
  write_records(out, values);
}

template <>
struct RecordCodec<Topic> {
  static json encode(const Topic& t);
  static Topic decode(const json& j);
};

template <>
struct RecordCodec<ModerationResult> {
  static json encode(const ModerationResult& m);
  static ModerationResult decode(const json& j);
};

template <>
struct RecordCodec<JokeRecord> {
  static json encode(const JokeRecord& r);
  static JokeRecord decode(const json& j);
};

template <>
struct RecordCodec<PairwiseJudgment> {
  static json encode(const PairwiseJudgment& p);
  static PairwiseJudgment decode(const json& j);
};

template <>
struct RecordCodec<AnnotationResponse> {
  static json encode(const AnnotationResponse& r);
  static AnnotationResponse decode(const json& j);
};

template <>
struct RecordCodec<LabelRecord> {
  static json encode(const LabelRecord& r);
  static LabelRecord decode(const json& j);
};

template <>
struct RecordCodec<HumorPolicy> {
  static json encode(const HumorPolicy& p);
  static HumorPolicy decode(const json& j);
};

template <>
struct RecordCodec<SeedJoke> {
  static json encode(const SeedJoke& s);
  static SeedJoke decode(const json& j);
};

/// Plain-text corpus, one joke per line (the one-liner dataset format). Ids are content hashes.
std::vector<SeedJoke> read_plain_jokes(std::istream& in);

/// Plain word list, one entry per line; blank lines and '#' comments skipped.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace humorgen
