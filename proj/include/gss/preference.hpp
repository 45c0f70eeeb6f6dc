#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/records.hpp"
#include "gss/sample.hpp"

namespace gss {

struct LooEntry {
  std::size_t response_index = 0;
  double looe = 0.0;
  double normalized = 0.0;  // min-max over the prompt's responses
};

struct LooResult {
  std::string prompt_id;
  std::vector<LooEntry> entries;
};

LooResult make_loo_result(std::string prompt_id, std::span<const double> looe);

enum class EmbeddingSource { Original, Average, Output };
std::string_view to_string(EmbeddingSource s) noexcept;
EmbeddingSource parse_embedding_source(std::string_view text);

/// Per-response LOOE. The Average source averages per-layer LOOE over the
/// configured layer window, mirroring eigenscore_average.
std::vector<double> loo_values(const SampleSet& set, const MetricConfig& cfg,
                               EmbeddingSource source = EmbeddingSource::Average);

enum class DiversityMetric { LooEigenscore, MeanEmbeddingDistance, NegativeLogLikelihood };
std::string_view to_string(DiversityMetric m) noexcept;
DiversityMetric parse_diversity_metric(std::string_view text);

/// Per-response diversity; larger is more diverse. Negative log-likelihood is
/// the summed token NLL of the response.
std::vector<double> diversity_scores(const SampleSet& set, DiversityMetric metric, const MetricConfig& cfg,
                                     EmbeddingSource source = EmbeddingSource::Average);

enum class PoolMode { RewardRange, Quantile };
std::string_view to_string(PoolMode m) noexcept;
PoolMode parse_pool_mode(std::string_view text);

struct PairBuildConfig {
  double quality_fraction = 0.5;  // p in (0, 1]
  DiversityMetric diversity_metric = DiversityMetric::LooEigenscore;
  PoolMode pool_mode = PoolMode::RewardRange;
  EmbeddingSource embedding_source = EmbeddingSource::Average;

  void validate() const;
};

struct DivpoSelection {
  std::optional<std::size_t> chosen;
  std::optional<std::size_t> rejected;
  std::vector<std::size_t> quality_pool;
  std::vector<std::size_t> low_pool;
  std::string skip_reason;  // empty when a pair was selected

  bool selected() const noexcept { return chosen.has_value() && rejected.has_value(); }
};

/// RewardRange: quality pool = {r >= max - p (max - min)}, low pool =
/// {r <= min + p (max - min)}. Quantile: the ceil(p K) highest and lowest
/// rewards, ties by index. Chosen maximizes diversity in the quality pool,
/// rejected minimizes it in the low pool, ties to the lower index.
DivpoSelection divpo_select(std::span<const double> rewards, std::span<const double> diversity,
                            const PairBuildConfig& cfg);

inline constexpr std::string_view kSkipSameResponse = "chosen_equals_rejected";
inline constexpr std::string_view kSkipMissingReward = "missing_reward";
inline constexpr std::string_view kSkipDiversityUnavailable = "diversity_unavailable";

struct PreferencePair {
  std::string prompt_id;
  std::size_t chosen_index = 0;
  std::size_t rejected_index = 0;
  std::string chosen;
  std::string rejected;
  double chosen_reward = 0.0;
  double rejected_reward = 0.0;
  double chosen_diversity = 0.0;
  double rejected_diversity = 0.0;
};

struct SkippedPrompt {
  std::string prompt_id;
  std::string reason;
  std::string detail;
};

struct PairBuildOutcome {
  std::vector<PreferencePair> pairs;
  std::vector<SkippedPrompt> skipped;
};

/// Runs divpo_select per prompt. Every response needs a reward record;
/// prompts that cannot be paired are reported in `skipped`.
PairBuildOutcome build_preference_pairs(std::span<const SampleSet> sets, std::span<const RewardRecord> rewards,
                                        const PairBuildConfig& cfg, const MetricConfig& metric_cfg = {});

}  // namespace gss
