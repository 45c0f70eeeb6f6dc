#include "gss/preference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gss/error.hpp"
#include "gss/linalg.hpp"
#include "gss/metrics.hpp"
#include "gss/stats.hpp"

namespace gss {

namespace {

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::size_t layer_count_of(const SampleSet& set, std::string_view what) {
  require(!set.samples.empty() && !set.samples.front().layers.empty(), ErrorKind::DataUnavailable,
          std::string(what) + ": prompt '" + set.prompt_id + "' has no layer statistics");
  return set.samples.front().layers.size();
}

std::size_t argbest(std::span<const double> values, std::span<const std::size_t> pool, bool maximize) {
  std::size_t best = pool.front();
  for (std::size_t i : pool) {
    if (maximize ? values[i] > values[best] : values[i] < values[best]) best = i;
  }
  return best;
}

}  // namespace

LooResult make_loo_result(std::string prompt_id, std::span<const double> looe) {
  LooResult r{std::move(prompt_id), {}};
  const auto normalized = minmax_normalize(looe);
  for (std::size_t i = 0; i < looe.size(); ++i) r.entries.push_back({i, looe[i], normalized[i]});
  return r;
}

std::string_view to_string(EmbeddingSource s) noexcept {
  switch (s) {
    case EmbeddingSource::Original: return "original";
    case EmbeddingSource::Output: return "output";
    case EmbeddingSource::Average: break;
  }
  return "average";
}

EmbeddingSource parse_embedding_source(std::string_view text) {
  if (text == "original") return EmbeddingSource::Original;
  if (text == "average") return EmbeddingSource::Average;
  if (text == "output") return EmbeddingSource::Output;
  fail(ErrorKind::Usage, "unknown embedding source '" + std::string(text) + "' (original, average, output)");
}

std::vector<double> loo_values(const SampleSet& set, const MetricConfig& cfg, EmbeddingSource source) {
  switch (source) {
    case EmbeddingSource::Original:
      return to_std(loo_eigenscore(last_layer_last_vectors(set, "loo_eigenscore"), cfg.alpha));
    case EmbeddingSource::Output:
      return to_std(loo_eigenscore(external_embeddings(set, "loo_eigenscore"), cfg.alpha));
    case EmbeddingSource::Average: break;
  }
  const auto [first, last] = cfg.layer_window.resolve(layer_count_of(set, "loo_eigenscore"));
  VectorXd sum = VectorXd::Zero(static_cast<Eigen::Index>(set.k()));
  for (std::size_t layer = first; layer <= last; ++layer) {
    sum += loo_eigenscore(layer_mean_vectors(set, layer, "loo_eigenscore"), cfg.alpha);
  }
  return to_std(sum / static_cast<double>(last - first + 1));
}

std::string_view to_string(DiversityMetric m) noexcept {
  switch (m) {
    case DiversityMetric::MeanEmbeddingDistance: return "mean_embedding_distance";
    case DiversityMetric::NegativeLogLikelihood: return "negative_log_likelihood";
    case DiversityMetric::LooEigenscore: break;
  }
  return "loo_eigenscore";
}

DiversityMetric parse_diversity_metric(std::string_view text) {
  if (text == "loo_eigenscore" || text == "looe") return DiversityMetric::LooEigenscore;
  if (text == "mean_embedding_distance") return DiversityMetric::MeanEmbeddingDistance;
  if (text == "negative_log_likelihood" || text == "nll") return DiversityMetric::NegativeLogLikelihood;
  fail(ErrorKind::Usage, "unknown diversity metric '" + std::string(text) +
                             "' (loo_eigenscore, mean_embedding_distance, negative_log_likelihood)");
}

std::vector<double> diversity_scores(const SampleSet& set, DiversityMetric metric, const MetricConfig& cfg,
                                     EmbeddingSource source) {
  switch (metric) {
    case DiversityMetric::LooEigenscore:
      return loo_values(set, cfg, source);
    case DiversityMetric::MeanEmbeddingDistance: {
      if (source == EmbeddingSource::Original) return to_std(mean_embedding_distance(last_layer_last_vectors(set)));
      if (source == EmbeddingSource::Output) return to_std(mean_embedding_distance(external_embeddings(set)));
      const auto [first, last] = cfg.layer_window.resolve(layer_count_of(set, "mean_embedding_distance"));
      VectorXd sum = VectorXd::Zero(static_cast<Eigen::Index>(set.k()));
      for (std::size_t layer = first; layer <= last; ++layer) {
        sum += mean_embedding_distance(layer_mean_vectors(set, layer, "mean_embedding_distance"));
      }
      return to_std(sum / static_cast<double>(last - first + 1));
    }
    case DiversityMetric::NegativeLogLikelihood: break;
  }
  std::vector<double> out;
  out.reserve(set.k());
  for (const auto& s : set.samples) {
    require(!s.token_logprobs.empty(), ErrorKind::DataUnavailable,
            "negative_log_likelihood: prompt '" + set.prompt_id + "' has a response without token logprobs");
    out.push_back(-std::accumulate(s.token_logprobs.begin(), s.token_logprobs.end(), 0.0));
  }
  return out;
}

std::string_view to_string(PoolMode m) noexcept { return m == PoolMode::Quantile ? "quantile" : "range"; }

PoolMode parse_pool_mode(std::string_view text) {
  if (text == "range") return PoolMode::RewardRange;
  if (text == "quantile") return PoolMode::Quantile;
  fail(ErrorKind::Usage, "unknown pool mode '" + std::string(text) + "' (range, quantile)");
}

void PairBuildConfig::validate() const {
  require(quality_fraction > 0.0 && quality_fraction <= 1.0, ErrorKind::Usage,
          "quality fraction must lie in (0, 1], got " + std::to_string(quality_fraction));
}

DivpoSelection divpo_select(std::span<const double> rewards, std::span<const double> diversity,
                            const PairBuildConfig& cfg) {
  cfg.validate();
  require(rewards.size() == diversity.size(), ErrorKind::InvalidInput, "divpo_select: length mismatch");
  require(rewards.size() >= 2, ErrorKind::InvalidInput, "divpo_select: need at least 2 responses");
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    require(std::isfinite(rewards[i]) && std::isfinite(diversity[i]), ErrorKind::InvalidInput,
            "divpo_select: non-finite reward or diversity at response " + std::to_string(i));
  }
  DivpoSelection out;
  const double p = cfg.quality_fraction;
  if (cfg.pool_mode == PoolMode::RewardRange) {
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      if (*hi - rewards[i] <= p * range) out.quality_pool.push_back(i);
      if (rewards[i] - *lo <= p * range) out.low_pool.push_back(i);
    }
  } else {
    std::vector<std::size_t> order(rewards.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rewards[a] > rewards[b]; });
    const auto take = static_cast<std::size_t>(std::ceil(p * static_cast<double>(rewards.size()) - 1e-12));
    out.quality_pool.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rewards[a] < rewards[b]; });
    out.low_pool.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(out.quality_pool.begin(), out.quality_pool.end());
    std::sort(out.low_pool.begin(), out.low_pool.end());
  }
  const std::size_t chosen = argbest(diversity, out.quality_pool, true);
  const std::size_t rejected = argbest(diversity, out.low_pool, false);
  if (chosen == rejected) {
    out.skip_reason = kSkipSameResponse;
    return out;
  }
  out.chosen = chosen;
  out.rejected = rejected;
  return out;
}

PairBuildOutcome build_preference_pairs(std::span<const SampleSet> sets, std::span<const RewardRecord> rewards,
                                        const PairBuildConfig& cfg, const MetricConfig& metric_cfg) {
  cfg.validate();
  std::map<std::string, std::map<std::size_t, double>, std::less<>> reward_of;
  for (const auto& r : rewards) {
    const bool fresh = reward_of[r.prompt_id].emplace(r.response_index, r.reward).second;
    require(fresh, ErrorKind::InvalidInput,
            "duplicate reward for " + r.prompt_id + "#" + std::to_string(r.response_index));
  }
  PairBuildOutcome out;
  for (const auto& set : sets) {
    const auto it = reward_of.find(set.prompt_id);
    std::vector<double> r(set.k());
    std::string missing;
    for (std::size_t i = 0; i < set.k(); ++i) {
      const auto found = it == reward_of.end() ? nullptr : &it->second;
      if (found == nullptr || !found->contains(i)) {
        missing += (missing.empty() ? "" : ",") + std::to_string(i);
      } else {
        r[i] = found->at(i);
      }
    }
    if (!missing.empty()) {
      out.skipped.push_back({set.prompt_id, std::string(kSkipMissingReward), "responses " + missing});
      continue;
    }
    std::vector<double> d;
    try {
      d = diversity_scores(set, cfg.diversity_metric, metric_cfg, cfg.embedding_source);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DataUnavailable && e.kind() != ErrorKind::InvalidInput &&
          e.kind() != ErrorKind::Singular) {
        throw;
      }
      out.skipped.push_back({set.prompt_id, std::string(kSkipDiversityUnavailable), e.what()});
      continue;
    }
    const auto sel = divpo_select(r, d, cfg);
    if (!sel.selected()) {
      out.skipped.push_back({set.prompt_id, sel.skip_reason, {}});
      continue;
    }
    const std::size_t c = *sel.chosen;
    const std::size_t j = *sel.rejected;
    out.pairs.push_back({set.prompt_id, c, j, set.samples[c].text, set.samples[j].text, r[c], r[j], d[c], d[j]});
  }
  return out;
}

}  // namespace gss
