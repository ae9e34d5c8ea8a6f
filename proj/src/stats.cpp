#include "humorgen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "humorgen/error.hpp"

namespace humorgen {

std::string_view to_string(Score s) {
  switch (s) {
    case Score::kUnderstandable: return "understandable";
    case Score::kOffensive: return "offensive";
    case Score::kIsJoke: return "is_joke";
    case Score::kKnown: return "known";
    case Score::kFunniness: return "funniness";
  }
  return "?";
}

Score parse_score(std::string_view s) {
  for (Score v : {Score::kUnderstandable, Score::kOffensive, Score::kIsJoke, Score::kKnown,
                  Score::kFunniness}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown score '" + std::string(s) + "'");
}

std::string_view to_string(UMethod m) {
  switch (m) {
    case UMethod::kExact: return "exact";
    case UMethod::kNormalApprox: return "normal_approx";
    case UMethod::kAuto: return "auto";
  }
  return "?";
}

std::string_view to_string(Alternative a) {
  switch (a) {
    case Alternative::kTwoSided: return "two-sided";
    case Alternative::kLess: return "less";
    case Alternative::kGreater: return "greater";
  }
  return "?";
}

Alternative parse_alternative(std::string_view s) {
  if (s == "two-sided" || s == "two_sided") return Alternative::kTwoSided;
  if (s == "less") return Alternative::kLess;
  if (s == "greater") return Alternative::kGreater;
  throw ConfigError("unknown alternative '" + std::string(s) + "'");
}

std::string_view to_string(CompareMode m) {
  return m == CompareMode::kPerItemMean ? "per_item_mean" : "pooled";
}

CompareMode parse_compare_mode(std::string_view s) {
  if (s == "per_item_mean" || s == "per-item-mean") return CompareMode::kPerItemMean;
  if (s == "pooled") return CompareMode::kPooled;
  throw ConfigError("unknown comparison mode '" + std::string(s) + "'");
}

std::optional<double> ItemRow::mean(Score s) const {
  auto it = tallies.find(s);
  return it == tallies.end() ? std::nullopt : it->second.mean();
}

std::vector<double> MethodReport::item_means(Score s) const {
  std::vector<double> out;
  for (const auto& item : items) {
    if (auto m = item.mean(s)) out.push_back(*m);
  }
  return out;
}

namespace {

std::vector<std::pair<Score, double>> answered_values(const AnnotationResponse& r) {
  std::vector<std::pair<Score, double>> v;
  v.emplace_back(Score::kUnderstandable, r.understood ? 1.0 : 0.0);
  if (r.offensive) v.emplace_back(Score::kOffensive, *r.offensive ? 1.0 : 0.0);
  if (r.is_joke) v.emplace_back(Score::kIsJoke, *r.is_joke ? 1.0 : 0.0);
  if (r.heard_before) v.emplace_back(Score::kKnown, *r.heard_before ? 1.0 : 0.0);
  if (r.funniness) v.emplace_back(Score::kFunniness, static_cast<double>(*r.funniness));
  return v;
}

std::optional<double> pct(const AnswerTally& t) {
  auto m = t.mean();
  if (m) *m *= 100.0;
  return m;
}

}  // namespace

MethodReport aggregate(std::span<const LabelRecord> labels, const std::string& method) {
  MethodReport rep;
  rep.method = method;
  std::map<std::string, ItemRow> items;
  std::map<std::string, std::vector<double>> funny_by_item;
  std::map<Score, AnswerTally> totals;
  for (const auto& l : labels) {
    if (l.method != method) continue;
    ++rep.label_count;
    const std::string& id = l.source_id.empty() ? l.response.task_id : l.source_id;
    ItemRow& row = items[id];
    row.item_id = id;
    ++row.label_count;
    for (const auto& [score, value] : answered_values(l.response)) {
      auto& t = row.tallies[score];
      ++t.answered;
      t.sum += value;
      ++totals[score].answered;
      totals[score].sum += value;
      rep.label_values[score].push_back(value);
      if (score == Score::kFunniness) funny_by_item[id].push_back(value);
    }
  }
  if (rep.label_count == 0) throw ConfigError("no labels for method '" + method + "'");

  for (auto& [id, row] : items) {
    if (auto it = funny_by_item.find(id); it != funny_by_item.end()) {
      const auto& xs = it->second;
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      row.funniness_variance = ss / static_cast<double>(xs.size());
    }
    rep.items.push_back(std::move(row));
  }
  rep.item_count = rep.items.size();
  rep.understandable_pct = pct(totals[Score::kUnderstandable]);
  rep.offensive_pct = pct(totals[Score::kOffensive]);
  rep.is_joke_pct = pct(totals[Score::kIsJoke]);
  rep.known_pct = pct(totals[Score::kKnown]);
  rep.funniness_mean = totals[Score::kFunniness].mean();
  return rep;
}

std::vector<MethodReport> aggregate_all(std::span<const LabelRecord> labels,
                                        const std::vector<std::string>& preferred) {
  std::set<std::string> methods;
  for (const auto& l : labels) methods.insert(l.method);
  std::vector<std::string> order;
  for (const auto& m : preferred) {
    if (methods.erase(m)) order.push_back(m);
  }
  order.insert(order.end(), methods.begin(), methods.end());
  std::vector<MethodReport> out;
  for (const auto& m : order) out.push_back(aggregate(labels, m));
  return out;
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

bool has_ties(std::span<const double> x, std::span<const double> y) {
  std::vector<double> all(x.begin(), x.end());
  all.insert(all.end(), y.begin(), y.end());
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) != all.end();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

bool exact_eligible(std::span<const double> x, std::span<const double> y, double limit) {
  if (x.empty() || y.empty()) return false;
  if (log_binomial(x.size() + y.size(), x.size()) > std::log(limit) + 1e-9) return false;
  return !has_ties(x, y);
}

std::vector<double> u_distribution(std::size_t n1, std::size_t n2) {
  // c[m][n][u]: arrangements of m x-values and n y-values with U = u.
  std::vector<std::vector<std::vector<double>>> c(
      n1 + 1, std::vector<std::vector<double>>(n2 + 1));
  for (std::size_t m = 0; m <= n1; ++m) {
    for (std::size_t n = 0; n <= n2; ++n) {
      auto& cur = c[m][n];
      cur.assign(m * n + 1, 0.0);
      if (m == 0 || n == 0) {
        cur[0] = 1.0;
        continue;
      }
      // Largest value is an x (it beats all n y's) or a y.
      const auto& with_x = c[m - 1][n];
      for (std::size_t u = 0; u < with_x.size(); ++u) cur[u + n] += with_x[u];
      const auto& with_y = c[m][n - 1];
      for (std::size_t u = 0; u < with_y.size(); ++u) cur[u] += with_y[u];
    }
  }
  return c[n1][n2];
}

UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                           const UTestOptions& options) {
  if (x.empty() || y.empty()) throw ConfigError("Mann-Whitney U needs two non-empty samples");
  const std::size_t n1 = x.size(), n2 = y.size(), big_n = n1 + n2;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = midranks(pooled);
  const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(n1), 0.0);
  const double fn1 = static_cast<double>(n1), fn2 = static_cast<double>(n2);
  const double u = r1 - fn1 * (fn1 + 1.0) / 2.0;

  UTestResult res;
  res.u_statistic = u;
  res.n1 = n1;
  res.n2 = n2;

  const bool eligible = exact_eligible(x, y, options.exact_limit);
  UMethod method = options.method;
  if (method == UMethod::kAuto) method = eligible ? UMethod::kExact : UMethod::kNormalApprox;
  if (method == UMethod::kExact && !eligible) {
    throw ConfigError("exact Mann-Whitney test needs tie-free samples with C(n1+n2, n1) <= " +
                      std::to_string(static_cast<long long>(options.exact_limit)));
  }
  res.method = method;

  if (method == UMethod::kExact) {
    const auto dist = u_distribution(n1, n2);
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto k = static_cast<std::size_t>(std::llround(u));
    double le = 0.0, ge = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (i <= k) le += dist[i];
      if (i >= k) ge += dist[i];
    }
    le /= total;
    ge /= total;
    switch (options.alternative) {
      case Alternative::kTwoSided: res.p_value = std::min(1.0, 2.0 * std::min(le, ge)); break;
      case Alternative::kLess: res.p_value = le; break;
      case Alternative::kGreater: res.p_value = ge; break;
    }
    return res;
  }

  const double mu = fn1 * fn2 / 2.0;
  double tie_term = 0.0;
  if (options.tie_correction) {
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double fN = static_cast<double>(big_n);
    tie_term /= fN * (fN - 1.0);
  }
  res.tie_correction_applied = tie_term > 0.0;
  const double var = fn1 * fn2 / 12.0 * ((static_cast<double>(big_n) + 1.0) - tie_term);
  if (var <= 0.0) {
    res.p_value = 1.0;
    res.z = 0.0;
    return res;
  }
  const double sd = std::sqrt(var);
  const double cc = options.continuity_correction ? 0.5 : 0.0;
  double z = 0.0;
  double p = 1.0;
  switch (options.alternative) {
    case Alternative::kTwoSided:
      z = std::max(0.0, std::abs(u - mu) - cc) / sd;
      p = std::min(1.0, 2.0 * normal_cdf(-z));
      break;
    case Alternative::kGreater:
      z = (u - mu - cc) / sd;
      p = normal_cdf(-z);
      break;
    case Alternative::kLess:
      z = (u - mu + cc) / sd;
      p = normal_cdf(z);
      break;
  }
  res.z = z;
  res.p_value = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
  return res;
}

UTestResult compare_methods(const MethodReport& a, const MethodReport& b, Score score,
                            CompareMode mode, const UTestOptions& options) {
  auto values = [&](const MethodReport& r) {
    if (mode == CompareMode::kPerItemMean) return r.item_means(score);
    auto it = r.label_values.find(score);
    return it == r.label_values.end() ? std::vector<double>{} : it->second;
  };
  const auto x = values(a);
  const auto y = values(b);
  if (x.empty() || y.empty()) {
    throw ConfigError("no " + std::string(to_string(score)) + " values for method '" +
                      (x.empty() ? a.method : b.method) + "'");
  }
  return mann_whitney_u(x, y, options);
}

std::vector<HistogramBin> histogram(std::span<const double> values, double width, double lo,
                                    double hi) {
  if (!(width > 0.0) || !(hi > lo)) throw ConfigError("histogram needs width > 0 and hi > lo");
  const auto n_bins = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-9));
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    bins[k].lo = lo + width * static_cast<double>(k);
    bins[k].hi = std::min(hi, lo + width * static_cast<double>(k + 1));
  }
  if (!bins.empty()) bins.back().closed_right = true;
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto k = static_cast<std::size_t>(std::floor((v - lo) / width + 1e-9));
    if (k >= n_bins) k = n_bins - 1;
    ++bins[k].count;
  }
  return bins;
}

std::vector<HistogramBin> funniness_histogram(const MethodReport& report, double width, double lo,
                                              double hi) {
  return histogram(report.item_means(Score::kFunniness), width, lo, hi);
}

NoveltySummary novelty_summary(const MethodReport& report) {
  auto it = report.label_values.find(Score::kKnown);
  if (it == report.label_values.end() || it->second.empty()) {
    throw ConfigError("method '" + report.method + "' has no heard-before answers");
  }
  NoveltySummary s;
  s.answered = it->second.size();
  s.known_pct = 100.0 * std::accumulate(it->second.begin(), it->second.end(), 0.0) /
                static_cast<double>(s.answered);
  s.novel_pct = 100.0 - s.known_pct;
  return s;
}

std::string format_pct(std::optional<double> pct) {
  if (!pct) return "-";
  return std::to_string(static_cast<long long>(std::floor(*pct + 0.5))) + "%";
}

namespace {

std::string format_mean(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_quality_table(std::span<const MethodReport> reports) {
  const std::vector<std::string> header{"Method", "Understandable", "Offensive", "IsJoke",
                                        "Funniness", "Known", "Count"};
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    rows.push_back({r.method, format_pct(r.understandable_pct), format_pct(r.offensive_pct),
                    format_pct(r.is_joke_pct), format_mean(r.funniness_mean),
                    format_pct(r.known_pct), std::to_string(r.item_count)});
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += c + 1 < row.size() ? pad(row[c], widths[c] + 2) : row[c];
    }
    out += line + "\n";
  }
  return out;
}

std::string render_quality_table_csv(std::span<const MethodReport> reports) {
  auto num = [](std::optional<double> v) {
    if (!v) return std::string();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  std::string out = "method,understandable_pct,offensive_pct,is_joke_pct,funniness_mean,known_pct,"
                    "item_count,label_count\n";
  for (const auto& r : reports) {
    out += r.method + "," + num(r.understandable_pct) + "," + num(r.offensive_pct) + "," +
           num(r.is_joke_pct) + "," + num(r.funniness_mean) + "," + num(r.known_pct) + "," +
           std::to_string(r.item_count) + "," + std::to_string(r.label_count) + "\n";
  }
  return out;
}

}  // namespace humorgen
