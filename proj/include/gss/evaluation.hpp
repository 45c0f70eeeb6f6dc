#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/bench.hpp"
#include "gss/sample.hpp"

namespace gss {

struct DatasetAccuracy {
  std::string dataset;
  std::size_t n_pairs = 0;
  std::size_t n_correct = 0;
  std::size_t n_ties = 0;  // counted in n_pairs, scored 0
  double accuracy = 0.0;
  double ci_halfwidth = 0.0;  // 1.96 * sqrt(acc (1 - acc) / n)
};

/// A pair that could not be scored because a prompt has no score.
struct Exclusion {
  std::string larger_id;
  std::string smaller_id;
  std::string dataset;
  std::string missing_prompt_id;
};

struct AccuracyReport {
  std::string model_id;
  std::string metric_name;
  Direction direction = Direction::HigherIsLarger;
  std::vector<DatasetAccuracy> datasets;  // Dataset enum order; empty datasets omitted
  /// Equal-weight mean over `datasets`; nullopt when no pair was scorable.
  std::optional<double> macro_average;
  std::vector<Exclusion> exclusions;
};

/// Accuracy of one (model, metric) over the pairs. A pair scores 1 when the
/// larger prompt's score beats the smaller's under `direction`; exact ties score 0.
AccuracyReport pairwise_accuracy(std::span<const MetricScore> scores, std::span<const PromptPair> pairs,
                                 std::string_view model_id, std::string_view metric_name, Direction direction);

/// One report per (model, metric) present in `scores`, directions from `cfg`.
std::vector<AccuracyReport> evaluate_all(std::span<const MetricScore> scores, std::span<const PromptPair> pairs,
                                         const MetricConfig& cfg = {});

struct Selection {
  std::string winner;
  double macro_average = 0.0;
  /// Other candidates with exactly the winner's macro average, sorted.
  std::vector<std::string> tied_with;
  bool tie() const noexcept { return !tied_with.empty(); }
};

/// Argmax of macro accuracy over metrics for a fixed model; ties resolve to
/// the lexicographically smallest name.
Selection best_metric(std::span<const AccuracyReport> reports, std::string_view model_id);

/// Argmax of macro accuracy over models for a fixed metric.
Selection best_model(std::span<const AccuracyReport> reports, std::string_view metric_name);

}  // namespace gss
