#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <unistd.h>

#include "humorgen/annotation_store.hpp"
#include "humorgen/clock.hpp"

namespace oracle {

using humorgen::Alternative;
using humorgen::AnnotationResponse;

namespace {

double two_sided(double le, double ge) { return std::min(1.0, 2.0 * std::min(le, ge)); }

double pick(Alternative alt, double le, double ge) {
  switch (alt) {
    case Alternative::kLess: return le;
    case Alternative::kGreater: return ge;
    case Alternative::kTwoSided: break;
  }
  return two_sided(le, ge);
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::size_t below(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

double u_by_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  double u = 0.0;
  for (double a : x) {
    for (double b : y) {
      if (a > b) u += 1.0;
      else if (a == b) u += 0.5;
    }
  }
  return u;
}

double u_p_by_enumeration(const std::vector<double>& x, const std::vector<double>& y,
                          Alternative alt) {
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const std::size_t n = pooled.size(), n1 = x.size();
  const double observed = u_by_pairs(x, y);
  double le = 0, ge = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n1) continue;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1u ? a : b).push_back(pooled[i]);
    const double u = u_by_pairs(a, b);
    total += 1;
    if (u <= observed + 1e-9) le += 1;
    if (u >= observed - 1e-9) ge += 1;
  }
  return pick(alt, le / total, ge / total);
}

std::vector<double> u_counts_by_rank_sums(std::size_t n1, std::size_t n2) {
  const std::size_t n = n1 + n2;
  const std::size_t max_sum = n * (n + 1) / 2;
  // ways[k][s]: subsets of {1..r} with k elements summing to s, built up over r.
  std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t k = std::min(r, n1); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= r; --s) ways[k][s] += ways[k - 1][s - r];
    }
  }
  const std::size_t offset = n1 * (n1 + 1) / 2;
  std::vector<double> counts(n1 * n2 + 1, 0.0);
  for (std::size_t u = 0; u <= n1 * n2; ++u) counts[u] = ways[n1][u + offset];
  return counts;
}

double u_p_by_rank_sums(const std::vector<double>& x, const std::vector<double>& y,
                        Alternative alt) {
  const auto counts = u_counts_by_rank_sums(x.size(), y.size());
  const auto u = static_cast<std::size_t>(std::llround(u_by_pairs(x, y)));
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double le = 0, ge = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i <= u) le += counts[i];
    if (i >= u) ge += counts[i];
  }
  return pick(alt, le / total, ge / total);
}

void tie_free_samples(Rng& rng, std::size_t n1, std::size_t n2, std::vector<double>& x,
                      std::vector<double>& y) {
  std::vector<double> values(n1 + n2);
  std::uniform_real_distribution<double> shift(0.0, 0.5);
  // A random location shift for the first sample makes small p-values common too.
  const double delta = shift(rng) * (coin(rng, 0.5) ? 1.0 : -1.0) * 4.0;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (;;) {
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < n1; ++i) x.push_back(std::round((noise(rng) + delta) * 1e6) / 1e6);
    for (std::size_t i = 0; i < n2; ++i) y.push_back(std::round(noise(rng) * 1e6) / 1e6);
    std::vector<double> all(x);
    all.insert(all.end(), y.begin(), y.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) == all.end()) return;
  }
}

double bt_log_likelihood(const WinMatrix& wins, const std::vector<double>& p, double eps) {
  double ll = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i != j) ll += (wins[i][j] + eps) * std::log(p[i] / (p[i] + p[j]));
    }
  }
  return ll;
}

std::vector<double> bt_grid_search(const WinMatrix& wins, double eps) {
  const std::size_t n = wins.size();
  const std::size_t free = n - 1;  // theta_0 is pinned at 0
  constexpr int kHalfPoints = 5;   // 11 grid points per free coordinate
  std::vector<double> centre(free, 0.0);
  double half_width = 16.0;
  std::vector<double> theta(free), p(n);
  auto strengths = [&](const std::vector<double>& t) {
    p[0] = 1.0;
    for (std::size_t i = 0; i < free; ++i) p[i + 1] = std::exp(t[i]);
    return p;
  };
  while (half_width > 1e-7) {
    const double step = half_width / kHalfPoints;
    std::vector<double> best = centre;
    double best_ll = bt_log_likelihood(wins, strengths(centre), eps);
    std::vector<int> idx(free, -kHalfPoints);
    for (;;) {
      for (std::size_t i = 0; i < free; ++i) theta[i] = centre[i] + idx[i] * step;
      const double ll = bt_log_likelihood(wins, strengths(theta), eps);
      if (ll > best_ll) {
        best_ll = ll;
        best = theta;
      }
      std::size_t d = 0;
      while (d < free && ++idx[d] > kHalfPoints) idx[d++] = -kHalfPoints;
      if (d == free) break;
    }
    centre = best;
    half_width /= 2.0;
  }
  auto out = strengths(centre);
  const double sum = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= sum;
  return out;
}

BtInstance random_bt_instance(Rng& rng, std::size_t max_jokes, std::size_t max_per_pair) {
  using humorgen::PairwiseJudgment;
  BtInstance inst;
  const std::size_t n = 2 + below(rng, max_jokes - 1);
  for (std::size_t i = 0; i < n; ++i) inst.ids.push_back("j" + std::to_string(i));
  inst.wins.assign(n, std::vector<double>(n, 0.0));
  std::vector<std::size_t> seen(n, 0);
  auto judge = [&](std::size_t i, std::size_t j) {
    const bool i_wins = coin(rng, 0.5);
    const bool i_first = coin(rng, 0.5);
    const auto& a = inst.ids[i_first ? i : j];
    const auto& b = inst.ids[i_first ? j : i];
    const bool a_wins = i_first == i_wins;
    inst.judgments.push_back(PairwiseJudgment::make(
        a, b, a_wins ? PairwiseJudgment::Winner::kA : PairwiseJudgment::Winner::kB,
        "ann" + std::to_string(below(rng, 5))));
    inst.wins[i_wins ? i : j][i_wins ? j : i] += 1.0;
    ++seen[i];
    ++seen[j];
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t k = below(rng, max_per_pair + 1);
      for (std::size_t t = 0; t < k; ++t) judge(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] == 0) judge(i, (i + 1 + below(rng, n - 1)) % n);
  }
  std::shuffle(inst.judgments.begin(), inst.judgments.end(), rng);
  return inst;
}

AnnotationResponse legal_response(Rng& rng) {
  AnnotationResponse r;
  r.task_id = "t" + std::to_string(below(rng, 1000));
  r.annotator_id = "a" + std::to_string(below(rng, 50));
  r.understood = coin(rng, 0.85);
  if (!r.understood) return r;
  r.offensive = coin(rng, 0.25);
  if (*r.offensive && coin(rng, 0.5)) return r;  // optional early submit
  r.is_joke = coin(rng, 0.8);
  if (!*r.is_joke) return r;
  r.heard_before = coin(rng, 0.2);
  r.funniness = static_cast<int>(1 + below(rng, 5));
  if (coin(rng, 0.5)) r.explanation = "because " + std::to_string(below(rng, 100));
  return r;
}

AnnotationResponse legal_response_with_explanation(Rng& rng) {
  auto r = legal_response(rng);
  if (r.funniness && *r.funniness >= 4 && !r.explanation) r.explanation = "it twists the setup";
  return r;
}

bool is_legal(const AnnotationResponse& r) {
  if (r.task_id.empty() || r.annotator_id.empty()) return false;
  if (r.funniness && (*r.funniness < 1 || *r.funniness > 5)) return false;
  const bool later = r.heard_before || r.funniness || r.explanation;
  if (!r.understood) return !r.offensive && !r.is_joke && !later;
  if (!r.offensive) return false;
  if (!r.is_joke) return *r.offensive && !later;
  if (!*r.is_joke) return !later;
  return r.heard_before && r.funniness;
}

AnnotationResponse mutate(AnnotationResponse r, Rng& rng) {
  auto maybe_bool = [&]() -> std::optional<bool> {
    if (coin(rng, 0.3)) return std::nullopt;
    return coin(rng, 0.5);
  };
  switch (below(rng, 9)) {
    case 0: r.understood = !r.understood; break;
    case 1: r.offensive = maybe_bool(); break;
    case 2: r.is_joke = maybe_bool(); break;
    case 3: r.heard_before = maybe_bool(); break;
    case 4:
      if (coin(rng, 0.3)) r.funniness.reset();
      else r.funniness = static_cast<int>(below(rng, 11)) - 3;
      break;
    case 5:
      if (r.explanation) r.explanation.reset();
      else r.explanation = "added";
      break;
    case 6: (coin(rng, 0.5) ? r.task_id : r.annotator_id).clear(); break;
    case 7:
      // Answer every question.
      r.understood = true;
      r.offensive = coin(rng, 0.5);
      r.is_joke = coin(rng, 0.5);
      r.heard_before = coin(rng, 0.5);
      r.funniness = static_cast<int>(1 + below(rng, 5));
      break;
    default:
      // Clear everything after the first gate.
      r.offensive.reset();
      r.is_joke.reset();
      r.heard_before.reset();
      r.funniness.reset();
      r.explanation.reset();
      break;
  }
  return r;
}

const std::vector<std::string>& forbidden_quote_and_paren_chars() {
  static const std::vector<std::string> chars{"\"", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xC2\xAB",
                                              "\xC2\xBB", "(", ")", "\xEF\xBC\x88", "\xEF\xBC\x89"};
  return chars;
}

const std::vector<std::string>& synthetic_emoticons() {
  static const std::vector<std::string> faces{":)", ":-)", ":(", ";)", ":D", "XD", ":P", "<3",
                                              "=)", "^_^", ":-/", ":'(", "D:", ":|"};
  return faces;
}

std::string synthetic_reddit_text(Rng& rng) {
  static const std::vector<std::string> words{
      "my",   "wife",  "told", "me",      "the",    "doctor", "said", "a",     "chicken",
      "bar",  "walks", "into", "because", "nobody", "cares",  "why",  "knock", "dog",
      "tax",  "cat",   "it's", "don't",   "pun",    "never",  "ever", "bread", "cloud"};
  std::string text;
  const std::size_t n = 3 + below(rng, 12);
  for (std::size_t i = 0; i < n; ++i) {
    if (!text.empty()) text += ' ';
    const std::size_t roll = below(rng, 40);
    if (roll == 0) text += "\"" + words[below(rng, words.size())] + "\"";
    else if (roll == 1) text += "(" + words[below(rng, words.size())] + ")";
    else if (roll == 2) text += synthetic_emoticons()[below(rng, synthetic_emoticons().size())];
    else if (roll == 3) text += std::string(2 + below(rng, 4), '_');
    else if (roll == 4) text += "\xE2\x80\x9C" + words[below(rng, words.size())] + "\xE2\x80\x9D";
    else if (roll == 5) text += "fill_in";
    else if (roll == 6) text += "____" + words[below(rng, words.size())];
    else text += words[below(rng, words.size())];
  }
  static const std::vector<std::string> endings{".", "!", "?", "", ",", "...", " :)", "?!", " ___",
                                                " lol", ".", "!", "?", "."};
  text += endings[below(rng, endings.size())];
  if (coin(rng, 0.05)) text = "   " + text + "  ";
  if (coin(rng, 0.02)) text = "   ";
  return text;
}

AssignmentSimResult simulate_assignment(std::size_t annotators, std::size_t tasks,
                                        std::size_t per_item, std::uint64_t seed,
                                        const std::string& db_path) {
  using namespace humorgen;
  FakeClock clock;
  StoreOptions opts;
  opts.lease_duration = std::chrono::minutes(30);
  AnnotationStore store(db_path, clock, opts);
  std::vector<BatchItem> items;
  for (std::size_t i = 0; i < tasks; ++i) {
    items.push_back({"sim-" + std::to_string(i), "text " + std::to_string(i),
                     "src-" + std::to_string(i), "full"});
  }
  store.add_batch(AnnotationBatch::make("sim", items, per_item));

  std::atomic<bool> done{false};
  std::atomic<std::size_t> abandoned{0}, expired{0};
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(25);
  std::vector<std::jthread> workers;
  for (std::size_t a = 0; a < annotators; ++a) {
    workers.emplace_back([&, a] {
      Rng rng(seed * 1000 + a);
      const std::string id = store.register_annotator("sim-annotator-" + std::to_string(a));
      while (!done && std::chrono::steady_clock::now() < deadline) {
        const auto task = store.next_task(id);
        if (!task) {
          if (store.progress("sim").complete()) {
            done = true;
            break;
          }
          // Everything left is leased to someone else: let time pass.
          clock.advance(std::chrono::minutes(5));
          std::this_thread::yield();
          continue;
        }
        const std::size_t roll = below(rng, 100);
        if (roll < 10) {
          // Walk away; the lease runs out while the annotator is gone.
          ++abandoned;
          clock.advance(opts.lease_duration + std::chrono::minutes(1));
          continue;
        }
        AnnotationResponse r = legal_response(rng);
        r.task_id = task->task_id;
        r.annotator_id = id;
        if (roll < 15) {
          // Too slow: submit after the lease has expired.
          clock.sleep_until(task->lease_expires_at + std::chrono::milliseconds(1));
          const auto res = store.submit_response(r);
          if (!res.accepted()) ++expired;
          continue;
        }
        store.submit_response(r);
      }
    });
  }
  workers.clear();

  AssignmentSimResult out;
  out.tasks = tasks;
  out.per_item = per_item;
  out.abandoned_leases = abandoned;
  out.expired_submissions = expired;
  const auto labels = store.export_labels("sim");
  out.responses = labels.size();
  std::map<std::string, std::size_t> per_task;
  std::map<std::pair<std::string, std::string>, std::size_t> per_pair;
  for (const auto& l : labels) {
    out.max_per_task = std::max(out.max_per_task, ++per_task[l.response.task_id]);
    out.max_same_annotator_per_task =
        std::max(out.max_same_annotator_per_task,
                 ++per_pair[{l.response.task_id, l.response.annotator_id}]);
  }
  out.complete = store.progress("sim").complete() && per_task.size() == tasks;
  for (const auto& [task, n] : per_task) out.complete = out.complete && n == per_item;
  return out;
}

std::filesystem::path fixtures_dir() { return HUMORGEN_FIXTURES_DIR; }

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("humorgen-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
