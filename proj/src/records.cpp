#include "humorgen/records.hpp"

#include <algorithm>
#include <cctype>

#include "humorgen/hash.hpp"

namespace humorgen {

namespace fields {

const json& require(const json& j, std::string_view name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) throw ParseError(std::string(name), "missing");
  return *it;
}

std::string get_string(const json& j, std::string_view name) {
  const json& v = require(j, name);
  if (!v.is_string()) throw ParseError(std::string(name), "expected a string");
  return v.get<std::string>();
}

std::optional<std::string> get_optional_string(const json& j, std::string_view name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return get_string(j, name);
}

bool get_bool(const json& j, std::string_view name) {
  const json& v = require(j, name);
  if (!v.is_boolean()) throw ParseError(std::string(name), "expected true or false");
  return v.get<bool>();
}

std::optional<bool> get_optional_bool(const json& j, std::string_view name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return get_bool(j, name);
}

long long get_int(const json& j, std::string_view name) {
  const json& v = require(j, name);
  if (!v.is_number_integer()) throw ParseError(std::string(name), "expected an integer");
  return v.get<long long>();
}

std::optional<long long> get_optional_int(const json& j, std::string_view name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return get_int(j, name);
}

double get_double(const json& j, std::string_view name) {
  const json& v = require(j, name);
  if (!v.is_number()) throw ParseError(std::string(name), "expected a number");
  return v.get<double>();
}

std::vector<std::string> get_string_list(const json& j, std::string_view name) {
  const json& v = require(j, name);
  if (!v.is_array()) throw ParseError(std::string(name), "expected an array of strings");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& item : v) {
    if (!item.is_string()) throw ParseError(std::string(name), "expected an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace fields

namespace {

// Re-labels a nested ParseError with its parent field path.
template <class F>
auto nested(std::string_view parent, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    std::string field(parent);
    if (!e.field().empty()) field += "." + e.field();
    throw ParseError(field, e.detail());
  } catch (const ValidationError& e) {
    throw ParseError(std::string(parent), e.what());
  }
}

}  // namespace

json RecordCodec<Topic>::encode(const Topic& t) {
  return json{{"word", t.word()}, {"source_rank", t.source_rank()}};
}

Topic RecordCodec<Topic>::decode(const json& j) {
  if (!j.is_object()) throw ParseError("", "expected an object");
  const auto rank = fields::get_int(j, "source_rank");
  if (rank < 0) throw ParseError("source_rank", "must be >= 0");
  auto word = fields::get_string(j, "word");
  return nested("word", [&] { return Topic::make(word, static_cast<std::size_t>(rank)); });
}

json RecordCodec<ModerationResult>::encode(const ModerationResult& m) {
  json scores = json::object();
  for (const auto& [k, v] : m.category_scores()) scores[k] = v;
  return json{{"category_scores", scores}, {"flagged_categories", m.flagged_categories()}};
}

ModerationResult RecordCodec<ModerationResult>::decode(const json& j) {
  if (!j.is_object()) throw ParseError("", "expected an object");
  const json& s = fields::require(j, "category_scores");
  if (!s.is_object()) throw ParseError("category_scores", "expected an object");
  std::map<std::string, double> scores;
  for (auto it = s.begin(); it != s.end(); ++it) {
    if (!it->is_number()) throw ParseError("category_scores." + it.key(), "expected a number");
    scores[it.key()] = it->get<double>();
  }
  std::vector<std::string> flagged;
  if (j.contains("flagged_categories")) flagged = fields::get_string_list(j, "flagged_categories");
  return ModerationResult::make(std::move(scores), std::move(flagged));
}

json RecordCodec<JokeRecord>::encode(const JokeRecord& r) {
  json j;
  j["id"] = r.id();
  j["text"] = r.text();
  j["mode"] = std::string(to_string(r.mode()));
  if (r.topic()) j["topic"] = RecordCodec<Topic>::encode(*r.topic());
  if (r.intermediates()) {
    json im = json::object();
    const auto& i = *r.intermediates();
    if (i.raw) im["raw"] = i.raw->items();
    if (i.expanded) im["expanded"] = i.expanded->items();
    if (i.refined) im["refined"] = i.refined->items();
    j["intermediates"] = im;
  }
  if (r.moderation()) j["moderation"] = RecordCodec<ModerationResult>::encode(*r.moderation());
  if (r.model_id()) j["model_id"] = *r.model_id();
  if (r.prompt_fingerprint()) j["prompt_fingerprint"] = *r.prompt_fingerprint();
  return j;
}

JokeRecord RecordCodec<JokeRecord>::decode(const json& j) {
  JokeRecord::Draft d;
  d.id = fields::get_string(j, "id");
  if (d.id.empty()) throw ParseError("id", "empty");
  d.text = fields::get_string(j, "text");
  const auto mode = fields::get_string(j, "mode");
  d.mode = nested("mode", [&] { return parse_mode(mode); });
  if (j.contains("topic") && !j["topic"].is_null()) {
    d.topic = nested("topic", [&] { return RecordCodec<Topic>::decode(j["topic"]); });
  }
  if (j.contains("intermediates") && !j["intermediates"].is_null()) {
    const json& im = j["intermediates"];
    if (!im.is_object()) throw ParseError("intermediates", "expected an object");
    if (!d.topic) throw ParseError("topic", "required when intermediates are present");
    Intermediates out;
    auto stage = [&](const char* name, Stage s) -> std::optional<AssociationSet> {
      if (!im.contains(name) || im[name].is_null()) return std::nullopt;
      return nested(std::string("intermediates.") + name, [&] {
        return AssociationSet::make(*d.topic, s, fields::get_string_list(im, name));
      });
    };
    out.raw = stage("raw", Stage::kRaw);
    out.expanded = stage("expanded", Stage::kExpanded);
    out.refined = stage("refined", Stage::kRefined);
    d.intermediates = std::move(out);
  }
  if (j.contains("moderation") && !j["moderation"].is_null()) {
    d.moderation =
        nested("moderation", [&] { return RecordCodec<ModerationResult>::decode(j["moderation"]); });
  }
  d.model_id = fields::get_optional_string(j, "model_id");
  d.prompt_fingerprint = fields::get_optional_string(j, "prompt_fingerprint");
  return nested("record", [&] { return JokeRecord::make(std::move(d)); });
}

json RecordCodec<PairwiseJudgment>::encode(const PairwiseJudgment& p) {
  return json{{"joke_a_id", p.joke_a_id()},
              {"joke_b_id", p.joke_b_id()},
              {"winner", p.winner() == PairwiseJudgment::Winner::kA ? "a" : "b"},
              {"annotator_id", p.annotator_id()}};
}

PairwiseJudgment RecordCodec<PairwiseJudgment>::decode(const json& j) {
  auto a = fields::get_string(j, "joke_a_id");
  auto b = fields::get_string(j, "joke_b_id");
  const auto w = fields::get_string(j, "winner");
  if (w != "a" && w != "b") throw ParseError("winner", "expected \"a\" or \"b\"");
  auto annotator = fields::get_optional_string(j, "annotator_id").value_or("");
  return nested("joke_b_id", [&] {
    return PairwiseJudgment::make(a, b,
                                  w == "a" ? PairwiseJudgment::Winner::kA
                                           : PairwiseJudgment::Winner::kB,
                                  annotator);
  });
}

namespace {

void encode_answers(json& j, const AnnotationResponse& r) {
  j["understood"] = r.understood;
  if (r.offensive) j["offensive"] = *r.offensive;
  if (r.is_joke) j["is_joke"] = *r.is_joke;
  if (r.heard_before) j["heard_before"] = *r.heard_before;
  if (r.funniness) j["funniness"] = *r.funniness;
  if (r.explanation) j["explanation"] = *r.explanation;
}

void decode_answers(const json& j, AnnotationResponse& r) {
  r.understood = fields::get_bool(j, "understood");
  r.offensive = fields::get_optional_bool(j, "offensive");
  r.is_joke = fields::get_optional_bool(j, "is_joke");
  r.heard_before = fields::get_optional_bool(j, "heard_before");
  if (auto f = fields::get_optional_int(j, "funniness")) {
    if (*f < -1000000 || *f > 1000000) throw ParseError("funniness", "out of range");
    r.funniness = static_cast<int>(*f);
  }
  r.explanation = fields::get_optional_string(j, "explanation");
}

}  // namespace

json RecordCodec<AnnotationResponse>::encode(const AnnotationResponse& r) {
  json j;
  j["task_id"] = r.task_id;
  j["annotator_id"] = r.annotator_id;
  encode_answers(j, r);
  return j;
}

AnnotationResponse RecordCodec<AnnotationResponse>::decode(const json& j) {
  AnnotationResponse r;
  r.task_id = fields::get_string(j, "task_id");
  r.annotator_id = fields::get_string(j, "annotator_id");
  decode_answers(j, r);
  return r;
}

json RecordCodec<LabelRecord>::encode(const LabelRecord& r) {
  json j;
  j["batch_id"] = r.batch_id;
  j["task_id"] = r.response.task_id;
  j["annotator_id"] = r.response.annotator_id;
  j["source_id"] = r.source_id;
  j["method"] = r.method;
  encode_answers(j, r.response);
  return j;
}

LabelRecord RecordCodec<LabelRecord>::decode(const json& j) {
  LabelRecord r;
  r.batch_id = fields::get_optional_string(j, "batch_id").value_or("");
  r.response.task_id = fields::get_string(j, "task_id");
  r.response.annotator_id = fields::get_string(j, "annotator_id");
  r.source_id = fields::get_optional_string(j, "source_id").value_or("");
  r.method = fields::get_string(j, "method");
  decode_answers(j, r.response);
  return r;
}

json RecordCodec<HumorPolicy>::encode(const HumorPolicy& p) {
  return json{{"text", p.text()},
              {"text_sha256", sha256_hex(p.text())},
              {"source_joke_ids", p.source_joke_ids()},
              {"decomposition_ids", p.decomposition_ids()},
              {"created_at", p.created_at()},
              {"model_id", p.model_id()}};
}

HumorPolicy RecordCodec<HumorPolicy>::decode(const json& j) {
  auto text = fields::get_string(j, "text");
  auto sources = fields::get_string_list(j, "source_joke_ids");
  auto decomps = fields::get_string_list(j, "decomposition_ids");
  auto created = fields::get_optional_string(j, "created_at").value_or("");
  auto model = fields::get_optional_string(j, "model_id").value_or("");
  return nested("decomposition_ids", [&] {
    return HumorPolicy::make(text, sources, decomps, created, model);
  });
}

json RecordCodec<SeedJoke>::encode(const SeedJoke& s) { return json{{"id", s.id}, {"text", s.text}}; }

SeedJoke RecordCodec<SeedJoke>::decode(const json& j) {
  SeedJoke s{fields::get_string(j, "id"), fields::get_string(j, "text")};
  if (s.text.empty()) throw ParseError("text", "empty");
  return s;
}

namespace {

std::string trimmed(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<SeedJoke> read_plain_jokes(std::istream& in) {
  std::vector<SeedJoke> out;
  std::string line;
  while (std::getline(in, line)) {
    auto text = trimmed(line);
    if (text.empty()) continue;
    out.push_back({joke_id_for(text), std::move(text)});
  }
  return out;
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open word list " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto w = trimmed(line);
    if (w.empty() || w.front() == '#') continue;
    out.push_back(std::move(w));
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace humorgen
