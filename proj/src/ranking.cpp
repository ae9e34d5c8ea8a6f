#include "humorgen/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "humorgen/error.hpp"
#include "humorgen/rng.hpp"

namespace humorgen {

namespace {

struct Tally {
  std::vector<std::string> ids;              // sorted
  std::vector<std::vector<double>> wins;     // wins[i][j]: i beat j
  std::vector<std::size_t> win_count;
  std::vector<std::size_t> comparisons;
};

Tally tally(std::span<const PairwiseJudgment> judgments) {
  std::set<std::string> unique;
  for (const auto& j : judgments) {
    unique.insert(j.joke_a_id());
    unique.insert(j.joke_b_id());
  }
  Tally t;
  t.ids.assign(unique.begin(), unique.end());
  const std::size_t n = t.ids.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[t.ids[i]] = i;
  t.wins.assign(n, std::vector<double>(n, 0.0));
  t.win_count.assign(n, 0);
  t.comparisons.assign(n, 0);
  for (const auto& j : judgments) {
    const std::size_t w = index.at(j.winner_id());
    const std::size_t l = index.at(j.loser_id());
    t.wins[w][l] += 1.0;
    ++t.win_count[w];
    ++t.comparisons[w];
    ++t.comparisons[l];
  }
  return t;
}

std::vector<double> fit_mm(const Tally& t, const RankOptions& opt, std::size_t& iterations,
                           bool& converged) {
  const std::size_t n = t.ids.size();
  const double eps = opt.pseudo_count;
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  std::vector<double> total_wins(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) total_wins[i] += t.wins[i][j] + eps;
    }
  }
  iterations = 0;
  converged = false;
  std::vector<double> next(n);
  while (iterations < opt.max_iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double games = t.wins[i][j] + t.wins[j][i] + 2.0 * eps;
        denom += games / (p[i] + p[j]);
      }
      next[i] = denom > 0.0 ? total_wins[i] / denom : p[i];
    }
    double sum = 0.0;
    for (double v : next) sum += v;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= sum;
      change = std::max(change, std::abs(next[i] - p[i]) / p[i]);
    }
    p.swap(next);
    ++iterations;
    if (opt.on_iteration) {
      opt.on_iteration(iterations, bradley_terry_log_likelihood(t.wins, p, eps));
    }
    if (change < opt.tolerance) {
      converged = true;
      break;
    }
  }
  return p;
}

std::vector<double> fit_copeland(const Tally& t, double eps) {
  const std::size_t n = t.ids.size();
  std::vector<double> p(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = (static_cast<double>(t.win_count[i]) + eps) /
           (static_cast<double>(t.comparisons[i]) + 2.0 * eps);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

double bradley_terry_log_likelihood(const std::vector<std::vector<double>>& wins,
                                    std::span<const double> strengths, double pseudo_count) {
  double ll = 0.0;
  const std::size_t n = strengths.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = wins[i][j] + pseudo_count;
      if (w == 0.0) continue;
      ll += w * (std::log(strengths[i]) - std::log(strengths[i] + strengths[j]));
    }
  }
  return ll;
}

RankedCorpus rank_pairwise(std::span<const PairwiseJudgment> judgments, const RankOptions& options) {
  if (judgments.empty()) throw ConfigError("no pairwise judgments to rank");
  if (options.pseudo_count <= 0.0 && options.method == RankMethod::kBradleyTerry) {
    throw ConfigError("pseudo_count must be positive");
  }
  const Tally t = tally(judgments);
  RankedCorpus out;
  out.judgments_used = judgments.size();
  std::vector<double> p;
  if (options.method == RankMethod::kBradleyTerry) {
    p = fit_mm(t, options, out.iterations, out.converged);
  } else {
    p = fit_copeland(t, options.pseudo_count);
    out.converged = true;
  }

  std::vector<std::size_t> order(t.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rounded = [&](std::size_t i) { return std::llround(p[i] * 1e12); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rounded(a) != rounded(b)) return rounded(a) > rounded(b);
    if (t.win_count[a] != t.win_count[b]) return t.win_count[a] > t.win_count[b];
    return t.ids[a] < t.ids[b];
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    out.jokes.push_back({t.ids[i], "", p[i], r + 1, t.win_count[i], t.comparisons[i]});
  }
  return out;
}

std::vector<std::string> select_seed(const RankedCorpus& corpus, std::size_t k) {
  if (k < 1 || k > corpus.jokes.size()) {
    throw ConfigError("seed size k=" + std::to_string(k) + " must be in 1.." +
                      std::to_string(corpus.jokes.size()));
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < k; ++i) ids.push_back(corpus.jokes[i].joke_id);
  return ids;
}

void attach_texts(RankedCorpus& corpus, std::span<const SeedJoke> jokes) {
  std::map<std::string, const std::string*> by_id;
  for (const auto& j : jokes) by_id[j.id] = &j.text;
  for (auto& r : corpus.jokes) {
    if (auto it = by_id.find(r.joke_id); it != by_id.end()) r.text = *it->second;
  }
}

std::vector<std::pair<std::string, std::string>> schedule_pairs(std::span<const std::string> ids,
                                                                std::size_t pairs_per_joke,
                                                                std::uint64_t seed) {
  std::vector<std::string> pool(ids.begin(), ids.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  const std::size_t n = pool.size();
  std::vector<std::pair<std::string, std::string>> out;
  if (n < 2 || pairs_per_joke == 0) return out;

  // Each shuffled round pairs neighbours, giving every joke one or two pairs.
  const std::size_t max_pairs = n * (n - 1) / 2;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::size_t> appearances(n, 0);
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::size_t stale_rounds = 0;
  while (seen.size() < max_pairs &&
         *std::min_element(appearances.begin(), appearances.end()) < pairs_per_joke &&
         stale_rounds < 64) {
    portable_shuffle(perm, rng);
    bool added = false;
    for (std::size_t k = 0; k + 1 < n; k += 2) {
      std::size_t a = perm[k], b = perm[k + 1];
      if (appearances[a] >= pairs_per_joke && appearances[b] >= pairs_per_joke) continue;
      const auto key = std::minmax(a, b);
      if (!seen.insert(key).second) continue;
      ++appearances[a];
      ++appearances[b];
      out.emplace_back(pool[a], pool[b]);
      added = true;
    }
    stale_rounds = added ? 0 : stale_rounds + 1;
  }
  return out;
}

json RecordCodec<RankedJoke>::encode(const RankedJoke& r) {
  json j;
  j["joke_id"] = r.joke_id;
  if (!r.text.empty()) j["text"] = r.text;
  j["rank"] = r.rank;
  j["strength"] = r.strength;
  j["wins"] = r.wins;
  j["comparisons"] = r.comparisons;
  return j;
}

RankedJoke RecordCodec<RankedJoke>::decode(const json& j) {
  RankedJoke r;
  r.joke_id = fields::get_string(j, "joke_id");
  r.text = fields::get_optional_string(j, "text").value_or("");
  r.rank = static_cast<std::size_t>(fields::get_int(j, "rank"));
  r.strength = fields::get_double(j, "strength");
  r.wins = static_cast<std::size_t>(fields::get_optional_int(j, "wins").value_or(0));
  r.comparisons = static_cast<std::size_t>(fields::get_optional_int(j, "comparisons").value_or(0));
  return r;
}

}  // namespace humorgen
