#include "humorgen/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "humorgen/error.hpp"
#include "humorgen/hash.hpp"
#include "humorgen/prompt_template.hpp"
#include "humorgen/rng.hpp"

namespace humorgen {

namespace {

std::vector<std::vector<std::string>> parse_table(std::string_view s, char delim) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// "1", "1.0", "true" and friends all mean 1.
std::string normalize_label(std::string_view raw) {
  const std::string v = lower(trim(raw));
  if (v == "1" || v == "1.0" || v == "true") return "1";
  if (v == "0" || v == "0.0" || v == "false") return "0";
  return v;
}

constexpr std::string_view kQuoteChars[] = {
    "\"", "“", "”", "„", "‟", "«", "»", "″", "‘",
};
constexpr std::string_view kParenChars[] = {"(", ")", "（", "）"};

template <std::size_t N>
bool contains_any(std::string_view text, const std::string_view (&needles)[N]) {
  return std::any_of(std::begin(needles), std::end(needles),
                     [&](std::string_view n) { return text.find(n) != std::string_view::npos; });
}

std::string replace_underscore_runs(std::string_view text, const std::string& replacement,
                                    std::size_t& count) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '_') {
      std::size_t j = i;
      while (j < text.size() && text[j] == '_') ++j;
      if (j - i >= 2) {
        out += replacement;
        ++count;
      } else {
        out += '_';
      }
      i = j;
    } else {
      out += text[i++];
    }
  }
  return out;
}

}  // namespace

std::vector<RedditRow> parse_reddit_table(std::string_view content, char delimiter) {
  if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);
  const auto rows = parse_table(content, delimiter);
  if (rows.empty()) throw ParseError("", "table has no header row", 1);
  std::optional<std::size_t> text_col, label_col, split_col;
  for (std::size_t c = 0; c < rows[0].size(); ++c) {
    const std::string h = lower(trim(rows[0][c]));
    if (h == "text" || h == "joke" || h == "body") text_col = c;
    if (h == "label" || h == "funny") label_col = c;
    if (h == "split") split_col = c;
  }
  if (!text_col) throw ParseError("text", "header has no text column", 1);
  if (!label_col) throw ParseError("label", "header has no label column", 1);
  if (!split_col) throw ParseError("split", "header has no split column", 1);
  std::vector<RedditRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](std::size_t c) { return c < row.size() ? row[c] : std::string(); };
    out.push_back({cell(*text_col), cell(*label_col), cell(*split_col)});
  }
  return out;
}

std::vector<RedditRow> read_reddit_table(const std::filesystem::path& path, char delimiter) {
  if (delimiter == 0) delimiter = path.extension() == ".tsv" ? '\t' : ',';
  return parse_reddit_table(read_text_file(path), delimiter);
}

EmoticonSet EmoticonSet::from_patterns(const std::vector<std::string>& patterns) {
  EmoticonSet set;
  for (const auto& p : patterns) {
    try {
      set.patterns_.emplace_back("(^|[^A-Za-z0-9])(" + p + ")(?=$|[^A-Za-z0-9])",
                                 std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ConfigError("bad emoticon pattern '" + p + "': " + e.what());
    }
  }
  return set;
}

EmoticonSet EmoticonSet::load(const std::filesystem::path& path) {
  return from_patterns(read_word_list(path));
}

EmoticonSet EmoticonSet::bundled() { return load(bundled_data_dir() / "emoticons.txt"); }

bool EmoticonSet::contains_emoticon(const std::string& text) const {
  return std::any_of(patterns_.begin(), patterns_.end(),
                     [&](const std::regex& re) { return std::regex_search(text, re); });
}

std::map<std::string, std::size_t> CleaningReport::counts_by_rule() const {
  std::map<std::string, std::size_t> out;
  for (const auto& r : rejections) ++out[r.rule];
  return out;
}

TextVerdict clean_text(std::string_view raw, const EmoticonSet& emoticons,
                       const CleaningOptions& options) {
  TextVerdict v;
  std::string text = trim(raw);
  if (text.empty()) {
    v.rule = clean_rule::kEmpty;
    return v;
  }
  if (contains_any(text, kQuoteChars)) {
    v.rule = clean_rule::kQuotes;
    return v;
  }
  if (contains_any(text, kParenChars)) {
    v.rule = clean_rule::kParentheses;
    return v;
  }
  if (emoticons.contains_emoticon(text)) {
    v.rule = clean_rule::kEmoticon;
    return v;
  }
  text = replace_underscore_runs(text, options.underscore_replacement, v.substitutions);
  if (v.substitutions > 0) {
    text = trim(text);
    if (emoticons.contains_emoticon(text)) {
      v.rule = clean_rule::kEmoticon;
      return v;
    }
  }
  const char last = text.empty() ? '\0' : text.back();
  if (last != '.' && last != '!' && last != '?') {
    v.rule = clean_rule::kTerminal;
    return v;
  }
  v.text = std::move(text);
  return v;
}

CleanResult clean_reddit(std::span<const RedditRow> rows, const EmoticonSet& emoticons,
                         const CleaningOptions& options) {
  CleanResult out;
  out.report.input_count = rows.size();
  std::set<std::string> seen;
  auto reject = [&](const RedditRow& row, const char* rule) {
    out.report.rejections.push_back({joke_id_for(row.text), rule});
  };
  for (const auto& row : rows) {
    if (normalize_label(row.label) != options.keep_label) {
      reject(row, clean_rule::kLabel);
      continue;
    }
    if (lower(trim(row.split)) != options.keep_split) {
      reject(row, clean_rule::kSplit);
      continue;
    }
    TextVerdict v = clean_text(row.text, emoticons, options);
    if (!v.kept()) {
      out.report.rejections.push_back({joke_id_for(row.text), v.rule});
      continue;
    }
    JokeRecord::Draft d;
    d.text = std::move(v.text);
    d.mode = Mode::kCorpus;
    JokeRecord rec = JokeRecord::make(std::move(d));
    if (!seen.insert(rec.id()).second) {
      reject(row, clean_rule::kDuplicate);
      continue;
    }
    out.report.substitutions += v.substitutions;
    out.records.push_back(std::move(rec));
  }
  out.report.kept_count = out.records.size();
  return out;
}

ModerationOutcome moderation_filter(Gateway& gateway, std::span<const JokeRecord> records,
                                    const std::string& category, double threshold,
                                    std::size_t parallelism) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("moderation threshold must be in [0, 1]");
  }
  enum class Fate { kKept, kRejected, kQuarantined };
  struct Slot {
    Fate fate = Fate::kQuarantined;
    std::optional<ModerationResult> result;
    std::string reason;
  };
  std::vector<Slot> slots(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      Slot& s = slots[i];
      try {
        s.result = gateway.moderate(records[i].text());
      } catch (const Error& e) {
        s.reason = e.what();
        continue;
      }
      const auto score = s.result->score(category);
      if (!score) {
        s.reason = "moderation reply has no '" + category + "' score";
        continue;
      }
      s.fate = *score > threshold ? Fate::kRejected : Fate::kKept;
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(parallelism, records.size()));
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
  }

  ModerationOutcome out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Slot& s = slots[i];
    switch (s.fate) {
      case Fate::kKept: out.kept.push_back(records[i].with_moderation(*s.result)); break;
      case Fate::kRejected: out.rejected.push_back(records[i].with_moderation(*s.result)); break;
      case Fate::kQuarantined: out.quarantined.push_back({records[i], s.reason}); break;
    }
  }
  return out;
}

std::vector<JokeRecord> sample_eval_set(std::span<const JokeRecord> records, std::size_t n,
                                        std::uint64_t rng_seed) {
  if (n > records.size()) {
    throw ConfigError("cannot sample " + std::to_string(n) + " records from " +
                      std::to_string(records.size()));
  }
  Rng rng(rng_seed);
  std::vector<JokeRecord> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(records.size(), n, rng)) out.push_back(records[i]);
  return out;
}

}  // namespace humorgen
