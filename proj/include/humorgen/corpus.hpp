#pragma once

// Benchmark corpus preparation: cleaning the Reddit jokes table, moderation filtering,
// and fixed-size evaluation samples.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "humorgen/gateway.hpp"
#include "humorgen/records.hpp"
#include "humorgen/types.hpp"

namespace humorgen {

struct RedditRow {
  std::string text;
  std::string label;
  std::string split;
};

/// Reads a delimiter-separated table with a header row naming the text, label and
/// split columns (aliases: joke/body for text, funny for label). Quoted fields follow
/// RFC 4180. The delimiter defaults to tab for .tsv files and comma otherwise.
std::vector<RedditRow> read_reddit_table(const std::filesystem::path& path, char delimiter = 0);
std::vector<RedditRow> parse_reddit_table(std::string_view content, char delimiter = ',');

/// Versioned set of emoticon patterns; see data/emoticons.txt.
class EmoticonSet {
 public:
  /// One ECMAScript regex per line, '#' comments. Throws ConfigError on a bad pattern.
  static EmoticonSet load(const std::filesystem::path& path);
  static EmoticonSet from_patterns(const std::vector<std::string>& patterns);
  static EmoticonSet bundled();

  bool contains_emoticon(const std::string& text) const;
  std::size_t size() const noexcept { return patterns_.size(); }

 private:
  std::vector<std::regex> patterns_;
};

namespace clean_rule {
inline constexpr const char* kLabel = "label";
inline constexpr const char* kSplit = "split";
inline constexpr const char* kEmpty = "empty";
inline constexpr const char* kQuotes = "quotation marks";
inline constexpr const char* kParentheses = "parentheses";
inline constexpr const char* kEmoticon = "emoticon";
inline constexpr const char* kTerminal = "terminal punctuation";
inline constexpr const char* kDuplicate = "duplicate";
}  // namespace clean_rule

struct CleaningOptions {
  std::string underscore_replacement = "...";
  std::string keep_label = "1";
  std::string keep_split = "train";
};

struct Rejection {
  std::string joke_id;  // hash of the original text
  std::string rule;

  friend bool operator==(const Rejection&, const Rejection&) = default;
};

struct CleaningReport {
  std::size_t input_count = 0;
  std::size_t kept_count = 0;
  std::vector<Rejection> rejections;
  std::size_t substitutions = 0;  // underscore runs replaced

  std::map<std::string, std::size_t> counts_by_rule() const;
};

/// Outcome for one text: either the cleaned text or the first rule it breaks.
struct TextVerdict {
  std::string text;      // cleaned text when kept
  std::string rule;      // empty when kept
  std::size_t substitutions = 0;

  bool kept() const { return rule.empty(); }
};

/// Content rules only (quotes, parentheses, emoticons, underscores, terminal punctuation).
TextVerdict clean_text(std::string_view text, const EmoticonSet& emoticons,
                       const CleaningOptions& options = {});

struct CleanResult {
  std::vector<JokeRecord> records;  // mode=corpus
  CleaningReport report;
};

/// Keeps label/split matches that pass every content rule. Total: never throws on content.
CleanResult clean_reddit(std::span<const RedditRow> rows, const EmoticonSet& emoticons,
                         const CleaningOptions& options = {});

struct Quarantined {
  JokeRecord record;
  std::string reason;
};

struct ModerationOutcome {
  std::vector<JokeRecord> kept;      // moderation scores attached
  std::vector<JokeRecord> rejected;  // moderation scores attached
  std::vector<Quarantined> quarantined;
};

/// Rejects records whose score for `category` is strictly above `threshold`. A failed
/// moderation call or a reply without the category quarantines the record.
/// Throws ConfigError when threshold is outside [0, 1].
ModerationOutcome moderation_filter(Gateway& gateway, std::span<const JokeRecord> records,
                                    const std::string& category = "harassment",
                                    double threshold = 0.02, std::size_t parallelism = 4);

/// Uniform sample of n records without replacement, in draw order.
/// Throws ConfigError when n exceeds the number of records.
std::vector<JokeRecord> sample_eval_set(std::span<const JokeRecord> records, std::size_t n,
                                        std::uint64_t rng_seed);

}  // namespace humorgen
