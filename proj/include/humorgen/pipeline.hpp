#pragma once

// Step-by-step joke generation: topic -> raw associations -> expanded -> refined -> jokes.
// Ablation modes stop the chain early or skip it (see required_stages()).

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "humorgen/gateway.hpp"
#include "humorgen/list_parser.hpp"
#include "humorgen/prompt_template.hpp"
#include "humorgen/records.hpp"
#include "humorgen/types.hpp"

namespace humorgen {

enum class JokeSelection { kAll, kSampleOne };

std::string_view to_string(JokeSelection s);
JokeSelection parse_selection(std::string_view s);

class PipelineRun {
 public:
  /// Throws ConfigError if mode is corpus, if zero-shot has a policy, or if any other
  /// mode lacks one.
  static PipelineRun make(Mode mode, std::optional<HumorPolicy> policy, std::vector<Topic> topics,
                          JokeSelection selection, std::uint64_t rng_seed);

  Mode mode() const noexcept { return mode_; }
  const std::optional<HumorPolicy>& policy() const noexcept { return policy_; }
  const std::vector<Topic>& topics() const noexcept { return topics_; }
  JokeSelection selection() const noexcept { return selection_; }
  std::uint64_t rng_seed() const noexcept { return seed_; }

 private:
  PipelineRun() = default;

  Mode mode_ = Mode::kZeroShot;
  std::optional<HumorPolicy> policy_;
  std::vector<Topic> topics_;
  JokeSelection selection_ = JokeSelection::kAll;
  std::uint64_t seed_ = 0;
};

struct PipelineSettings {
  std::string model_id = "gpt-4";
  double temperature = 1.0;
  std::size_t parallel_topics = 4;
  double max_failure_rate = 0.2;  // abort when a larger fraction of topics fails

  std::size_t raw_target = 20;
  CountRange raw_range{15, 25};
  CountRange refined_range{1, 6};
  CountRange jokes_range{7, 10};
};

/// Stage failed even after its retry; the topic is dropped from the corpus.
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct StageFlag {
  std::string topic;
  std::string stage;  // "brainstorm", "expand", "refine", "generate"
  std::string flag;   // e.g. "out of target: 19 items, target 20"

  friend bool operator==(const StageFlag&, const StageFlag&) = default;
};

struct StageResult {
  AssociationSet set;
  std::vector<StageFlag> flags;
  int requests = 0;
};

struct JokeBatch {
  std::vector<JokeRecord> records;
  std::vector<StageFlag> flags;
  int requests = 0;
};

struct TopicFailure {
  std::string topic;
  std::string stage;
  std::string message;
};

struct StageCounts {
  std::size_t brainstorm = 0;
  std::size_t expand = 0;
  std::size_t refine = 0;
  std::size_t generate = 0;

  std::size_t total() const { return brainstorm + expand + refine + generate; }
  friend bool operator==(const StageCounts&, const StageCounts&) = default;
};

struct BatchResult {
  std::vector<JokeRecord> records;  // topic order, duplicates removed
  std::vector<StageFlag> flags;
  std::vector<TopicFailure> failures;
  StageCounts requests;
  std::size_t duplicates_dropped = 0;
  bool aborted = false;
  json manifest;
};

class JokePipeline {
 public:
  JokePipeline(Gateway& gateway, const TemplateLibrary& lib, PipelineSettings settings = {});

  StageResult brainstorm(const Topic& topic);
  StageResult expand(const AssociationSet& raw);
  StageResult refine(const AssociationSet& expanded);

  /// `stages` must carry exactly the association stages the mode requires
  /// (ConfigError otherwise). Selection is applied here.
  JokeBatch generate_jokes(const PipelineRun& run, const Topic& topic, const Intermediates& stages);

  /// Runs every topic's chain, up to `parallel_topics` topics at a time.
  BatchResult run_batch(const PipelineRun& run);

  /// Requests a run would issue with no retries.
  static StageCounts plan(const PipelineRun& run);

  const PipelineSettings& settings() const noexcept { return settings_; }

 private:
  struct ListReply {
    ParsedList list;
    int requests = 0;
  };

  ListReply ask_list(const std::string& stage, const std::string& prompt, CountRange expected);

  Gateway& gateway_;
  const TemplateLibrary& lib_;
  PipelineSettings settings_;
};

/// Writes corpus.jsonl (unless aborted) and manifest.json into `dir`.
void write_batch(const BatchResult& result, const std::filesystem::path& dir);

}  // namespace humorgen
