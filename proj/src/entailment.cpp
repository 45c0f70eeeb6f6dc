#include "gss/entailment.hpp"

#include <cmath>

#include "gss/error.hpp"
#include "gss/metrics.hpp"
#include "gss/text.hpp"

namespace gss {

std::string_view to_string(EntailmentLabel label) noexcept {
  switch (label) {
    case EntailmentLabel::Entail: return "entail";
    case EntailmentLabel::Neutral: return "neutral";
    case EntailmentLabel::Contradict: return "contradict";
  }
  return "neutral";
}

EntailmentLabel parse_entailment_label(std::string_view text) {
  if (text == "entail" || text == "entailment") return EntailmentLabel::Entail;
  if (text == "neutral") return EntailmentLabel::Neutral;
  if (text == "contradict" || text == "contradiction") return EntailmentLabel::Contradict;
  fail(ErrorKind::Protocol, "unknown entailment label '" + std::string(text) + "'");
}

EntailmentVerdict ExactMatchOracle::judge(std::string_view premise, std::string_view hypothesis) {
  const bool same = tokenize_words(premise) == tokenize_words(hypothesis);
  return {same ? EntailmentLabel::Entail : EntailmentLabel::Neutral, 1.0};
}

namespace {

bool entails(EntailmentOracle& oracle, std::span<const std::string> texts, std::size_t from, std::size_t to) {
  try {
    return oracle.judge(texts[from], texts[to]).label == EntailmentLabel::Entail;
  } catch (const Error& e) {
    throw Error(e.kind(), "entailment(" + std::to_string(from) + " -> " + std::to_string(to) + "): " + e.what());
  }
}

}  // namespace

Partition cluster_by_entailment(std::span<const std::string> texts, EntailmentOracle& oracle) {
  Partition p;
  p.assignment.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    bool placed = false;
    for (std::size_t c = 0; c < p.clusters.size() && !placed; ++c) {
      const std::size_t rep = p.clusters[c].front();
      if (entails(oracle, texts, i, rep) && entails(oracle, texts, rep, i)) {
        p.clusters[c].push_back(i);
        p.assignment[i] = c;
        placed = true;
      }
    }
    if (!placed) {
      p.assignment[i] = p.clusters.size();
      p.clusters.push_back({i});
    }
  }
  return p;
}

double cluster_entropy(std::span<const double> weights, const Partition& partition) {
  require(weights.size() == partition.assignment.size(), ErrorKind::InvalidInput,
          "cluster_entropy: weight count does not match partition");
  std::vector<double> mass(partition.clusters.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0 && std::isfinite(weights[i]), ErrorKind::InvalidInput,
            "cluster_entropy: weights must be finite and non-negative");
    mass[partition.assignment[i]] += weights[i];
    total += weights[i];
  }
  if (!(total > 0.0)) {
    fail(ErrorKind::Numeric,
         "semantic_entropy: all sequence weights underflowed to zero; switch the sequence probability mode "
         "(raw <-> length-normalized)");
  }
  double h = 0.0;
  for (double m : mass) {
    if (m > 0.0) {
      const double p = m / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

std::vector<double> sequence_weights(const SampleSet& set, SequenceProbMode mode) {
  std::vector<double> w;
  w.reserve(set.k());
  for (const auto& s : set.samples) {
    require(!s.token_logprobs.empty(), ErrorKind::InvalidInput, "semantic_entropy: sample without tokens");
    double sum = 0.0;
    for (double lp : s.token_logprobs) sum += lp;
    if (mode == SequenceProbMode::LengthNormalized) sum /= static_cast<double>(s.token_logprobs.size());
    w.push_back(std::exp(sum));
  }
  return w;
}

MetricScore semantic_entropy(const SampleSet& set, EntailmentOracle& oracle, const MetricConfig& cfg) {
  require(set.k() >= 1, ErrorKind::InvalidInput, "semantic_entropy: empty sample set");
  const auto weights = sequence_weights(set, cfg.sequence_prob_mode);
  std::vector<std::string> texts;
  texts.reserve(set.k());
  for (const auto& s : set.samples) texts.push_back(s.text);
  const Partition partition = cluster_by_entailment(texts, oracle);
  const double h = cluster_entropy(weights, partition);
  return MetricScore{set.prompt_id, set.model_id, std::string(metric::kSemanticEntropy), h,
                     cfg.direction_for(metric::kSemanticEntropy)};
}

}  // namespace gss
