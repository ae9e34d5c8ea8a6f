#pragma once

// Aggregation of pairwise human preferences into a global ranking.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "humorgen/records.hpp"
#include "humorgen/types.hpp"

namespace humorgen {

struct RankedJoke {
  std::string joke_id;
  std::string text;  // empty until attach_texts()
  double strength = 0.0;
  std::size_t rank = 0;  // 1-based
  std::size_t wins = 0;
  std::size_t comparisons = 0;

  friend bool operator==(const RankedJoke&, const RankedJoke&) = default;
};

/// Jokes in rank order (rank 1 first); strengths sum to 1.
struct RankedCorpus {
  std::vector<RankedJoke> jokes;
  std::size_t judgments_used = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

enum class RankMethod {
  kBradleyTerry,
  kCopeland,  // plain win rate, for comparison
};

struct RankOptions {
  RankMethod method = RankMethod::kBradleyTerry;
  /// Added to every ordered pair's win tally, for all pairs of jokes, so the
  /// comparison graph is always connected and unanimous pairs stay finite.
  double pseudo_count = 0.5;
  double tolerance = 1e-8;  // max relative strength change between iterations
  std::size_t max_iterations = 10'000;
  /// Called after every minorize-maximize step with the iteration number and the
  /// regularized log-likelihood.
  std::function<void(std::size_t, double)> on_iteration;
};

/// Fits Bradley-Terry strengths by minorize-maximize iteration and ranks jokes by
/// strength; ties break by raw win count, then lexicographic joke id.
/// Throws ConfigError when there are no judgments.
RankedCorpus rank_pairwise(std::span<const PairwiseJudgment> judgments,
                           const RankOptions& options = {});

/// Regularized log-likelihood sum_{i != j} (w_ij + eps) * log(p_i / (p_i + p_j)),
/// where `wins[i][j]` counts wins of i over j.
double bradley_terry_log_likelihood(const std::vector<std::vector<double>>& wins,
                                    std::span<const double> strengths, double pseudo_count);

/// Top-k joke ids in rank order. Throws ConfigError unless 1 <= k <= n.
std::vector<std::string> select_seed(const RankedCorpus& corpus, std::size_t k);

/// Fills RankedJoke::text from the seed corpus (matched by id).
void attach_texts(RankedCorpus& corpus, std::span<const SeedJoke> jokes);

/// Random comparison schedule: every joke appears in `pairs_per_joke` pairs (rounded
/// up to whole shuffled rounds), no pair repeats, no self-pairs.
std::vector<std::pair<std::string, std::string>> schedule_pairs(std::span<const std::string> ids,
                                                                std::size_t pairs_per_joke,
                                                                std::uint64_t seed);

template <>
struct RecordCodec<RankedJoke> {
  static json encode(const RankedJoke& r);
  static RankedJoke decode(const json& j);
};

}  // namespace humorgen
