#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/sample.hpp"

namespace gss {

/// Student t density with `df` degrees of freedom.
double student_t_pdf(double x, double df);

/// Two-sided tail mass P(|T| >= |t|), integrated adaptively to relative
/// tolerance 1e-8.
double student_t_two_sided_p(double t, double df);

/// P(T <= x).
double student_t_cdf(double x, double df);

enum class StarBand { NotSignificant, P05, P01, P001 };

std::string_view to_string(StarBand band) noexcept;
StarBand star_band(double p_value) noexcept;

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  StarBand stars = StarBand::NotSignificant;
  /// Sign of t agrees with `expected`: group a should sit on the larger side.
  bool direction_correct = false;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

/// Welch's unequal-variance t-test. Each group needs at least 2 values; two
/// zero-variance groups are ErrorKind::Degenerate.
TTestResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b,
                         Direction expected = Direction::HigherIsLarger);

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
  double t_statistic = 0.0;
  double p_value = 1.0;
};

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y);

struct ClassifierResult {
  double threshold = 0.0;
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double auc = 0.0;
};

/// Predicts label 1 iff score > threshold. AUC is rank-based with midranks
/// for ties; single-class labels are ErrorKind::Degenerate.
ClassifierResult binary_threshold_eval(std::span<const double> scores, std::span<const int> labels, double threshold);

/// Mann-Whitney AUC: P(score of a positive > score of a negative), ties counting 1/2.
double rank_auc(std::span<const double> scores, std::span<const int> labels);

struct GroupSummary {
  std::string group;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_halfwidth = 0.0;  // 1.96 * sample SD / sqrt(n)
};

struct GroupSummaryReport {
  std::vector<GroupSummary> groups;
  std::vector<std::string> notes;
};

/// Per-group mean and 95% interval. Groups in `expected_groups` with no
/// values are excluded and noted; single-value groups get a zero interval and a note.
GroupSummaryReport group_summary(std::span<const double> values, std::span<const std::string> group_labels,
                                 std::span<const std::string> expected_groups = {});

/// Min-max scaling onto [0, 1]; a constant input maps to 0.5 everywhere.
std::vector<double> minmax_normalize(std::span<const double> values);

}  // namespace gss
