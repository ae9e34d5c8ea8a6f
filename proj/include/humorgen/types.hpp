#pragma once

// Core value types shared by every stage. Every type with invariants validates in
// its factory and has no public mutators, so a constructed value is always valid.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace humorgen {

/// Stopword and profanity lists applied to candidate topic words.
class WordFilter {
 public:
  WordFilter() = default;
  WordFilter(std::set<std::string> stopwords, std::set<std::string> profanity)
      : stopwords_(std::move(stopwords)), profanity_(std::move(profanity)) {}

  bool is_stopword(std::string_view w) const { return stopwords_.contains(std::string(w)); }
  bool is_profane(std::string_view w) const { return profanity_.contains(std::string(w)); }

 private:
  std::set<std::string> stopwords_;
  std::set<std::string> profanity_;
};

/// Seed topic for one joke chain: a lowercase alphabetic word of at least 4 letters.
class Topic {
 public:
  static constexpr std::size_t kMinLength = 4;

  /// Throws ValidationError naming the violated rule.
  static Topic make(std::string word, std::size_t source_rank = 0,
                    const WordFilter& filter = WordFilter{});

  /// Reason the word cannot be a topic, or nullopt if it can.
  static std::optional<std::string> rejection_reason(std::string_view word,
                                                     const WordFilter& filter = WordFilter{});

  const std::string& word() const noexcept { return word_; }
  std::size_t source_rank() const noexcept { return source_rank_; }

  friend bool operator==(const Topic&, const Topic&) = default;

 private:
  Topic(std::string word, std::size_t rank) : word_(std::move(word)), source_rank_(rank) {}

  std::string word_;
  std::size_t source_rank_ = 0;
};

enum class Stage { kRaw, kExpanded, kRefined };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view s);

class AssociationSet {
 public:
  static constexpr std::size_t kMaxRaw = 20;
  static constexpr std::size_t kMaxRefined = 6;

  static AssociationSet make(Topic topic, Stage stage, std::vector<std::string> items);

  const Topic& topic() const noexcept { return topic_; }
  Stage stage() const noexcept { return stage_; }
  const std::vector<std::string>& items() const noexcept { return items_; }

  friend bool operator==(const AssociationSet&, const AssociationSet&) = default;

 private:
  AssociationSet(Topic topic, Stage stage, std::vector<std::string> items)
      : topic_(std::move(topic)), stage_(stage), items_(std::move(items)) {}

  Topic topic_;
  Stage stage_;
  std::vector<std::string> items_;
};

class HumorPolicy {
 public:
  static HumorPolicy make(std::string text, std::vector<std::string> source_joke_ids,
                          std::vector<std::string> decomposition_ids, std::string created_at,
                          std::string model_id);

  /// A policy supplied by hand (e.g. a bundled default), with no decomposition lineage.
  static HumorPolicy from_text(std::string text, std::string model_id = "manual");

  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& source_joke_ids() const noexcept { return source_joke_ids_; }
  const std::vector<std::string>& decomposition_ids() const noexcept { return decomposition_ids_; }
  const std::string& created_at() const noexcept { return created_at_; }
  const std::string& model_id() const noexcept { return model_id_; }

  friend bool operator==(const HumorPolicy&, const HumorPolicy&) = default;

 private:
  HumorPolicy() = default;

  std::string text_;
  std::vector<std::string> source_joke_ids_;
  std::vector<std::string> decomposition_ids_;
  std::string created_at_;
  std::string model_id_;
};

enum class Mode { kZeroShot, kNoAssoc, kAssocV1, kAssocV2, kFull, kCorpus };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view s);

class ModerationResult {
 public:
  static ModerationResult make(std::map<std::string, double> category_scores,
                               std::vector<std::string> flagged_categories = {});

  const std::map<std::string, double>& category_scores() const noexcept { return scores_; }
  const std::vector<std::string>& flagged_categories() const noexcept { return flagged_; }
  std::optional<double> score(std::string_view category) const;

  friend bool operator==(const ModerationResult&, const ModerationResult&) = default;

 private:
  ModerationResult() = default;

  std::map<std::string, double> scores_;
  std::vector<std::string> flagged_;
};

struct Intermediates {
  std::optional<AssociationSet> raw;
  std::optional<AssociationSet> expanded;
  std::optional<AssociationSet> refined;

  bool empty() const { return !raw && !expanded && !refined; }
  friend bool operator==(const Intermediates&, const Intermediates&) = default;
};

class JokeRecord {
 public:
  /// Unvalidated field bundle. An empty `id` is replaced by the content hash of `text`.
  struct Draft {
    std::string id;
    std::string text;
    std::optional<Topic> topic;
    Mode mode = Mode::kCorpus;
    std::optional<Intermediates> intermediates;
    std::optional<ModerationResult> moderation;
    std::optional<std::string> model_id;
    std::optional<std::string> prompt_fingerprint;

    friend bool operator==(const Draft&, const Draft&) = default;
  };

  static JokeRecord make(Draft draft);

  const std::string& id() const noexcept { return d_.id; }
  const std::string& text() const noexcept { return d_.text; }
  const std::optional<Topic>& topic() const noexcept { return d_.topic; }
  Mode mode() const noexcept { return d_.mode; }
  const std::optional<Intermediates>& intermediates() const noexcept { return d_.intermediates; }
  const std::optional<ModerationResult>& moderation() const noexcept { return d_.moderation; }
  const std::optional<std::string>& model_id() const noexcept { return d_.model_id; }
  const std::optional<std::string>& prompt_fingerprint() const noexcept {
    return d_.prompt_fingerprint;
  }

  const Draft& draft() const noexcept { return d_; }

  /// Copy with moderation scores attached.
  JokeRecord with_moderation(ModerationResult m) const;

  friend bool operator==(const JokeRecord& a, const JokeRecord& b) { return a.d_ == b.d_; }

 private:
  explicit JokeRecord(Draft d) : d_(std::move(d)) {}
  Draft d_;
};

/// Which association stages a record of `mode` carries (raw, expanded, refined).
struct StagePresence {
  bool raw = false;
  bool expanded = false;
  bool refined = false;
};
StagePresence required_stages(Mode mode);

/// One annotator's answers for one text, as submitted. Deliberately unvalidated:
/// the service must be able to receive a malformed submission in order to reject it.
/// See validate_response().
struct AnnotationResponse {
  std::string task_id;
  std::string annotator_id;
  bool understood = false;
  std::optional<bool> offensive;
  std::optional<bool> is_joke;
  std::optional<bool> heard_before;
  std::optional<int> funniness;
  std::optional<std::string> explanation;

  friend bool operator==(const AnnotationResponse&, const AnnotationResponse&) = default;
};

class PairwiseJudgment {
 public:
  enum class Winner { kA, kB };

  static PairwiseJudgment make(std::string joke_a_id, std::string joke_b_id, Winner winner,
                               std::string annotator_id);

  const std::string& joke_a_id() const noexcept { return a_; }
  const std::string& joke_b_id() const noexcept { return b_; }
  Winner winner() const noexcept { return winner_; }
  const std::string& annotator_id() const noexcept { return annotator_; }
  const std::string& winner_id() const noexcept { return winner_ == Winner::kA ? a_ : b_; }
  const std::string& loser_id() const noexcept { return winner_ == Winner::kA ? b_ : a_; }

  friend bool operator==(const PairwiseJudgment&, const PairwiseJudgment&) = default;

 private:
  PairwiseJudgment(std::string a, std::string b, Winner w, std::string annotator)
      : a_(std::move(a)), b_(std::move(b)), winner_(w), annotator_(std::move(annotator)) {}

  std::string a_;
  std::string b_;
  Winner winner_;
  std::string annotator_;
};

/// One exported label: a response joined with the task's provenance.
struct LabelRecord {
  std::string batch_id;
  std::string source_id;
  std::string method;
  AnnotationResponse response;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

/// Seed or corpus joke before it becomes a JokeRecord (e.g. a line of the one-liner corpus).
struct SeedJoke {
  std::string id;
  std::string text;

  friend bool operator==(const SeedJoke&, const SeedJoke&) = default;
};

}  // namespace humorgen
