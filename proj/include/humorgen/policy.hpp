#pragma once

// Policy inference: decompose top-ranked seed jokes one at a time, then distill the
// analyses into a single policy prompt.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "humorgen/error.hpp"
#include "humorgen/gateway.hpp"
#include "humorgen/prompt_template.hpp"
#include "humorgen/records.hpp"
#include "humorgen/types.hpp"

namespace humorgen {

class Decomposition {
 public:
  /// Throws ValidationError on empty joke id or analysis. An empty `id` is derived
  /// from the joke id and analysis text.
  static Decomposition make(std::string joke_id, std::string analysis_text, std::string model_id,
                            std::string prompt_fingerprint, std::string id = {});

  const std::string& id() const noexcept { return id_; }
  const std::string& joke_id() const noexcept { return joke_id_; }
  const std::string& analysis_text() const noexcept { return analysis_; }
  const std::string& model_id() const noexcept { return model_id_; }
  const std::string& prompt_fingerprint() const noexcept { return fingerprint_; }

  friend bool operator==(const Decomposition&, const Decomposition&) = default;

 private:
  Decomposition() = default;

  std::string id_;
  std::string joke_id_;
  std::string analysis_;
  std::string model_id_;
  std::string fingerprint_;
};

struct PolicySettings {
  std::string model_id = "gpt-4";
  double temperature = 0.2;
  /// Estimated prompt tokens the distillation request may use.
  std::size_t context_budget_tokens = 100'000;
  std::string delimiter = "\n\n---\n\n";
};

/// Raised when the distillation prompt would not fit the context budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(std::size_t estimated, std::size_t budget);
  std::size_t estimated_tokens() const noexcept { return estimated_; }
  std::size_t budget_tokens() const noexcept { return budget_; }

 private:
  std::size_t estimated_;
  std::size_t budget_;
};

/// Rough token count: one token per four bytes, rounded up.
std::size_t estimate_tokens(std::string_view text);

/// One completion with the decomposition template. Throws ValidationError on an
/// empty reply; gateway errors propagate.
Decomposition decompose_joke(Gateway& gateway, const TemplateLibrary& lib, const SeedJoke& joke,
                             const PolicySettings& settings = {});

struct DecomposeFailure {
  std::string joke_id;
  std::string message;
};

struct DecomposeOutcome {
  std::vector<Decomposition> decompositions;  // input order, failed jokes omitted
  std::vector<DecomposeFailure> failures;
};

/// Decomposes every joke (one request each, up to `parallelism` at a time) and keeps
/// going past failures. `on_done` sees each success as it completes, from worker threads
/// but never concurrently.
DecomposeOutcome decompose_all(Gateway& gateway, const TemplateLibrary& lib,
                               std::span<const SeedJoke> jokes, const PolicySettings& settings = {},
                               std::size_t parallelism = 4,
                               const std::function<void(const Decomposition&)>& on_done = {});

/// The text bound to {decompositions}: analyses in the given order joined by the delimiter.
std::string join_decompositions(std::span<const Decomposition> decompositions,
                                const std::string& delimiter);

/// Distills decompositions (in rank order) into a policy with full lineage.
/// Throws ConfigError on an empty input or a repeated joke id, BudgetExceeded when the
/// rendered prompt estimate exceeds the budget.
HumorPolicy distill_policy(Gateway& gateway, const TemplateLibrary& lib,
                           std::span<const Decomposition> decompositions,
                           const PolicySettings& settings = {}, std::string created_at = {});

template <>
struct RecordCodec<Decomposition> {
  static json encode(const Decomposition& d);
  static Decomposition decode(const json& j);
};

}  // namespace humorgen
