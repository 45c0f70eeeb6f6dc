#pragma once

#include <span>
#include <string_view>

#include "gss/linalg.hpp"
#include "gss/sample.hpp"

namespace gss {

class EntailmentOracle;

namespace metric {
inline constexpr std::string_view kPerplexity = "perplexity";
inline constexpr std::string_view kEnergy = "energy";
inline constexpr std::string_view kNormalizedEntropy = "normalized_entropy";
inline constexpr std::string_view kLexicalSimilarity = "lexical_similarity";
inline constexpr std::string_view kEigenscoreOriginal = "eigenscore_original";
inline constexpr std::string_view kEigenscoreOutput = "eigenscore_output";
inline constexpr std::string_view kEigenscoreAverage = "eigenscore_average";
inline constexpr std::string_view kSemanticEntropy = "semantic_entropy";
}  // namespace metric

/// Every metric name the toolkit knows, in report order.
std::span<const std::string_view> metric_names() noexcept;
bool is_metric_name(std::string_view name) noexcept;
Direction default_direction(std::string_view metric) noexcept;

// Embedding extraction. Each throws ErrorKind::DataUnavailable naming `metric`
// when a sample lacks the data.
MatrixXd last_layer_last_vectors(const SampleSet& set, std::string_view metric = metric::kEigenscoreOriginal);
MatrixXd layer_mean_vectors(const SampleSet& set, std::size_t layer,
                            std::string_view metric = metric::kEigenscoreAverage);
MatrixXd external_embeddings(const SampleSet& set, std::string_view metric = metric::kEigenscoreOutput);

MetricScore eigenscore_original(const SampleSet& set, const MetricConfig& cfg);
/// Mean of per-layer EigenScores over the resolved layer window, token-mean vectors.
MetricScore eigenscore_average(const SampleSet& set, const MetricConfig& cfg);
MetricScore eigenscore_output(const SampleSet& set, const MetricConfig& cfg);

MetricScore perplexity(const SampleSet& set, const MetricConfig& cfg = {});
MetricScore normalized_entropy(const SampleSet& set, const MetricConfig& cfg = {});
MetricScore energy(const SampleSet& set, const MetricConfig& cfg = {});
MetricScore lexical_similarity(const SampleSet& set, const MetricConfig& cfg = {});

/// Dispatch by name. `oracle` is only consulted by semantic_entropy; a null
/// oracle makes that metric report ErrorKind::DataUnavailable.
MetricScore compute_metric(std::string_view name, const SampleSet& set, const MetricConfig& cfg,
                           EntailmentOracle* oracle = nullptr);

}  // namespace gss
