#include "gss/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include "gss/entailment.hpp"
#include "gss/error.hpp"
#include "gss/text.hpp"

namespace gss {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::DataUnavailable: return "data-unavailable";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Degenerate: return "degenerate-input";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::CorruptArchive: return "corrupt-archive";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::HigherIsLarger ? "higher" : "lower";
}

Direction parse_direction(std::string_view text) {
  if (text == "higher" || text == "up") return Direction::HigherIsLarger;
  if (text == "lower" || text == "down") return Direction::LowerIsLarger;
  fail(ErrorKind::Usage, "unknown direction '" + std::string(text) + "' (expected higher|lower)");
}

namespace {

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorKind::Usage, "layer window: bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

LayerWindow LayerWindow::parse(std::string_view text) {
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  const bool fractional = head.find('.') != std::string_view::npos;
  if (fractional) {
    Fractional f;
    f.start_fraction = parse_number<double>(head, "fraction");
    if (colon != std::string_view::npos) f.end_offset = parse_number<int>(text.substr(colon + 1), "end offset");
    require(f.start_fraction >= 0.0 && f.start_fraction <= 1.0 && f.end_offset >= 0, ErrorKind::Usage,
            "layer window: fraction must be in [0,1] and offset non-negative");
    return LayerWindow(f);
  }
  require(colon != std::string_view::npos, ErrorKind::Usage,
          "layer window: expected FIRST:LAST or a fraction such as 0.65");
  Absolute a{parse_number<int>(head, "first layer"), parse_number<int>(text.substr(colon + 1), "last layer")};
  require(a.first >= 0 && a.first <= a.last, ErrorKind::Usage, "layer window: need 0 <= FIRST <= LAST");
  return LayerWindow(a);
}

std::pair<std::size_t, std::size_t> LayerWindow::resolve(std::size_t layer_count) const {
  require(layer_count > 0, ErrorKind::Configuration, "layer window: record has no layers");
  const long top = static_cast<long>(layer_count) - 1;
  long first = 0;
  long last = 0;
  if (const auto* f = std::get_if<Fractional>(&spec_)) {
    first = static_cast<long>(std::floor(f->start_fraction * static_cast<double>(top)));
    last = top - f->end_offset;
  } else {
    const auto& a = std::get<Absolute>(spec_);
    first = a.first;
    last = std::min<long>(a.last, top);
  }
  if (first > last || last < 0) {
    fail(ErrorKind::Configuration, "layer window " + to_string() + " is empty for a model with " +
                                       std::to_string(layer_count) + " layer entries");
  }
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

std::string LayerWindow::to_string() const {
  if (const auto* f = std::get_if<Fractional>(&spec_)) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), f->start_fraction);
    std::string s(buf.data(), res.ptr);
    if (s.find('.') == std::string::npos) s += ".0";
    return s + ":" + std::to_string(f->end_offset);
  }
  const auto& a = std::get<Absolute>(spec_);
  return std::to_string(a.first) + ":" + std::to_string(a.last);
}

namespace {

constexpr std::array<std::string_view, 8> kMetricNames = {
    metric::kPerplexity,         metric::kEnergy,           metric::kNormalizedEntropy,
    metric::kLexicalSimilarity,  metric::kEigenscoreOriginal, metric::kEigenscoreOutput,
    metric::kEigenscoreAverage,  metric::kSemanticEntropy,
};

MetricScore make_score(const SampleSet& set, std::string_view name, double value, const MetricConfig& cfg) {
  require(std::isfinite(value), ErrorKind::Numeric,
          std::string(name) + ": non-finite result for prompt " + set.prompt_id);
  return MetricScore{set.prompt_id, set.model_id, std::string(name), value, cfg.direction_for(name)};
}

MatrixXd stack_rows(const SampleSet& set, std::string_view metric,
                    const std::vector<float>* (*pick)(const ResponseSample&, std::size_t), std::size_t arg) {
  require(set.k() >= 1, ErrorKind::InvalidInput, std::string(metric) + ": empty sample set");
  MatrixXd z;
  for (std::size_t n = 0; n < set.k(); ++n) {
    const auto* row = pick(set.samples[n], arg);
    if (row == nullptr || row->empty()) {
      fail(ErrorKind::DataUnavailable, std::string(metric) + ": sample " + std::to_string(n) + " of prompt " +
                                           set.prompt_id + " lacks the required embedding");
    }
    if (n == 0) z.resize(static_cast<Eigen::Index>(set.k()), static_cast<Eigen::Index>(row->size()));
    require(static_cast<Eigen::Index>(row->size()) == z.cols(), ErrorKind::InvalidInput,
            std::string(metric) + ": mismatched embedding widths in prompt " + set.prompt_id);
    for (std::size_t j = 0; j < row->size(); ++j) z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = (*row)[j];
  }
  return z;
}

double mean_token_logprob(const ResponseSample& s, std::string_view metric) {
  require(!s.token_logprobs.empty(), ErrorKind::InvalidInput, std::string(metric) + ": sample without tokens");
  double sum = 0.0;
  for (double lp : s.token_logprobs) sum += lp;
  return sum / static_cast<double>(s.token_logprobs.size());
}

}  // namespace

std::span<const std::string_view> metric_names() noexcept { return kMetricNames; }

bool is_metric_name(std::string_view name) noexcept {
  return std::find(kMetricNames.begin(), kMetricNames.end(), name) != kMetricNames.end();
}

Direction default_direction(std::string_view metric) noexcept {
  return metric == metric::kLexicalSimilarity ? Direction::LowerIsLarger : Direction::HigherIsLarger;
}

Direction MetricConfig::direction_for(std::string_view metric) const {
  if (auto it = direction_overrides.find(metric); it != direction_overrides.end()) return it->second;
  return default_direction(metric);
}

MatrixXd last_layer_last_vectors(const SampleSet& set, std::string_view metric) {
  return stack_rows(
      set, metric,
      [](const ResponseSample& s, std::size_t) -> const std::vector<float>* {
        return s.layers.empty() ? nullptr : &s.layers.back().last_vec;
      },
      0);
}

MatrixXd layer_mean_vectors(const SampleSet& set, std::size_t layer, std::string_view metric) {
  return stack_rows(
      set, metric,
      [](const ResponseSample& s, std::size_t l) -> const std::vector<float>* {
        return l < s.layers.size() ? &s.layers[l].mean_vec : nullptr;
      },
      layer);
}

MatrixXd external_embeddings(const SampleSet& set, std::string_view metric) {
  return stack_rows(
      set, metric,
      [](const ResponseSample& s, std::size_t) -> const std::vector<float>* {
        return s.external_embedding ? &*s.external_embedding : nullptr;
      },
      0);
}

MetricScore eigenscore_original(const SampleSet& set, const MetricConfig& cfg) {
  const MatrixXd z = last_layer_last_vectors(set);
  return make_score(set, metric::kEigenscoreOriginal, eigenscore_matrix(z, cfg.alpha), cfg);
}

MetricScore eigenscore_average(const SampleSet& set, const MetricConfig& cfg) {
  require(set.k() >= 1, ErrorKind::InvalidInput, "eigenscore_average: empty sample set");
  const std::size_t depth = set.samples.front().layers.size();
  if (depth == 0) {
    fail(ErrorKind::DataUnavailable, "eigenscore_average: prompt " + set.prompt_id + " has no layer statistics");
  }
  const auto [first, last] = cfg.layer_window.resolve(depth);
  double sum = 0.0;
  for (std::size_t layer = first; layer <= last; ++layer) {
    sum += eigenscore_matrix(layer_mean_vectors(set, layer), cfg.alpha);
  }
  return make_score(set, metric::kEigenscoreAverage, sum / static_cast<double>(last - first + 1), cfg);
}

MetricScore eigenscore_output(const SampleSet& set, const MetricConfig& cfg) {
  const MatrixXd z = external_embeddings(set);
  return make_score(set, metric::kEigenscoreOutput, eigenscore_matrix(z, cfg.alpha), cfg);
}

MetricScore normalized_entropy(const SampleSet& set, const MetricConfig& cfg) {
  require(set.k() >= 1, ErrorKind::InvalidInput, "normalized_entropy: empty sample set");
  double acc = 0.0;
  for (const auto& s : set.samples) acc += -mean_token_logprob(s, metric::kNormalizedEntropy);
  return make_score(set, metric::kNormalizedEntropy, acc / static_cast<double>(set.k()), cfg);
}

MetricScore perplexity(const SampleSet& set, const MetricConfig& cfg) {
  require(set.k() >= 1, ErrorKind::InvalidInput, "perplexity: empty sample set");
  double acc = 0.0;
  for (const auto& s : set.samples) acc += -mean_token_logprob(s, metric::kPerplexity);
  return make_score(set, metric::kPerplexity, std::exp(acc / static_cast<double>(set.k())), cfg);
}

MetricScore energy(const SampleSet& set, const MetricConfig& cfg) {
  require(set.k() >= 1, ErrorKind::InvalidInput, "energy: empty sample set");
  double acc = 0.0;
  for (std::size_t n = 0; n < set.k(); ++n) {
    const auto& lse = set.samples[n].token_logsumexp;
    if (lse.empty()) {
      fail(ErrorKind::DataUnavailable, "energy: sample " + std::to_string(n) + " of prompt " + set.prompt_id +
                                           " has no token logsumexp");
    }
    double mean = 0.0;
    for (double v : lse) mean += -v;
    acc += mean / static_cast<double>(lse.size());
  }
  return make_score(set, metric::kEnergy, acc / static_cast<double>(set.k()), cfg);
}

MetricScore lexical_similarity(const SampleSet& set, const MetricConfig& cfg) {
  require(set.k() >= 2, ErrorKind::InvalidInput, "lexical_similarity: need at least 2 samples");
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < set.k(); ++i) {
    for (std::size_t j = i + 1; j < set.k(); ++j) {
      acc += rouge_l_f1(set.samples[i].text, set.samples[j].text);
      ++pairs;
    }
  }
  return make_score(set, metric::kLexicalSimilarity, acc / static_cast<double>(pairs), cfg);
}

MetricScore compute_metric(std::string_view name, const SampleSet& set, const MetricConfig& cfg,
                           EntailmentOracle* oracle) {
  if (name == metric::kPerplexity) return perplexity(set, cfg);
  if (name == metric::kEnergy) return energy(set, cfg);
  if (name == metric::kNormalizedEntropy) return normalized_entropy(set, cfg);
  if (name == metric::kLexicalSimilarity) return lexical_similarity(set, cfg);
  if (name == metric::kEigenscoreOriginal) return eigenscore_original(set, cfg);
  if (name == metric::kEigenscoreOutput) return eigenscore_output(set, cfg);
  if (name == metric::kEigenscoreAverage) return eigenscore_average(set, cfg);
  if (name == metric::kSemanticEntropy) {
    if (oracle == nullptr) {
      fail(ErrorKind::DataUnavailable, "semantic_entropy: no entailment provider configured");
    }
    return semantic_entropy(set, *oracle, cfg);
  }
  fail(ErrorKind::Usage, "unknown metric '" + std::string(name) + "'");
}

}  // namespace gss
