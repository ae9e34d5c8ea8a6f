#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "humorgen/types.hpp"

namespace humorgen {

enum class Score { kUnderstandable, kOffensive, kIsJoke, kKnown, kFunniness };

std::string_view to_string(Score s);
Score parse_score(std::string_view s);

/// Answered counts and values for one question on one item (or one method).
struct AnswerTally {
  std::size_t answered = 0;
  double sum = 0.0;  // yes=1/no=0 for binary questions

  std::optional<double> mean() const {
    return answered ? std::optional<double>(sum / static_cast<double>(answered)) : std::nullopt;
  }
};

struct ItemRow {
  std::string item_id;
  std::size_t label_count = 0;
  std::map<Score, AnswerTally> tallies;
  std::optional<double> funniness_variance;  // population variance of the item's scores

  std::optional<double> mean(Score s) const;
};

struct MethodReport {
  std::string method;
  std::optional<double> understandable_pct;
  std::optional<double> offensive_pct;
  std::optional<double> is_joke_pct;
  std::optional<double> funniness_mean;
  std::optional<double> known_pct;
  std::size_t item_count = 0;
  std::size_t label_count = 0;
  std::vector<ItemRow> items;  // sorted by item id
  /// Every answered label value per question, in label order.
  std::map<Score, std::vector<double>> label_values;

  /// Per-item means of the answered labels; items without answers are left out.
  std::vector<double> item_means(Score s) const;
};

/// Aggregates labels with the given method tag. Items are keyed by source id (task id
/// when the source id is empty). Throws ConfigError when there are no matching labels.
MethodReport aggregate(std::span<const LabelRecord> labels, const std::string& method);

/// One report per method tag, ordered by `preferred` first, then alphabetically.
std::vector<MethodReport> aggregate_all(std::span<const LabelRecord> labels,
                                        const std::vector<std::string>& preferred = {});

enum class UMethod { kExact, kNormalApprox, kAuto };
enum class Alternative { kTwoSided, kLess, kGreater };

std::string_view to_string(UMethod m);
std::string_view to_string(Alternative a);
Alternative parse_alternative(std::string_view s);

struct UTestOptions {
  UMethod method = UMethod::kAuto;
  Alternative alternative = Alternative::kTwoSided;
  bool continuity_correction = true;
  bool tie_correction = true;
  /// Exact test only when C(n1+n2, n1) is at most this.
  double exact_limit = 200'000;
};

struct UTestResult {
  double u_statistic = 0.0;  // U of the first sample
  double p_value = 1.0;
  UMethod method = UMethod::kExact;  // kExact or kNormalApprox
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool tie_correction_applied = false;
  std::optional<double> z;  // normal approximation only
};

/// Midranks of the pooled values, in input order.
std::vector<double> midranks(std::span<const double> values);

/// Whether the exact test applies: no ties and C(n1+n2, n1) <= limit.
bool exact_eligible(std::span<const double> x, std::span<const double> y, double limit = 200'000);

/// Number of arrangements with U = u, for u = 0..n1*n2.
std::vector<double> u_distribution(std::size_t n1, std::size_t n2);

/// Throws ConfigError on an empty sample, or when exact is requested but not eligible.
UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                           const UTestOptions& options = {});

enum class CompareMode { kPerItemMean, kPooled };

std::string_view to_string(CompareMode m);
CompareMode parse_compare_mode(std::string_view s);

/// Throws ConfigError when either report has no values for the score.
UTestResult compare_methods(const MethodReport& a, const MethodReport& b, Score score,
                            CompareMode mode, const UTestOptions& options = {});

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  bool closed_right = false;  // last bin includes its upper edge
  std::size_t count = 0;
};

/// Bins per-item funniness means. Values outside [lo, hi] are ignored.
std::vector<HistogramBin> funniness_histogram(const MethodReport& report, double width = 0.5,
                                              double lo = 1.0, double hi = 5.0);
std::vector<HistogramBin> histogram(std::span<const double> values, double width, double lo,
                                    double hi);

struct NoveltySummary {
  double known_pct = 0.0;
  double novel_pct = 100.0;
  std::size_t answered = 0;
};

/// Throws ConfigError when no label answered the heard-before question.
NoveltySummary novelty_summary(const MethodReport& report);

/// Plain-text table in the Method / Understandable / Offensive / IsJoke / Funniness /
/// Known / Count layout: whole percents, funniness to two decimals.
std::string render_quality_table(std::span<const MethodReport> reports);
/// Same columns as CSV, unrounded.
std::string render_quality_table_csv(std::span<const MethodReport> reports);

/// Whole-percent string such as "93%", or "-" when undefined.
std::string format_pct(std::optional<double> pct);

}  // namespace humorgen
