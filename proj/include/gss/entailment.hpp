#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/sample.hpp"

namespace gss {

enum class EntailmentLabel { Entail, Neutral, Contradict };

std::string_view to_string(EntailmentLabel label) noexcept;
EntailmentLabel parse_entailment_label(std::string_view text);

struct EntailmentVerdict {
  EntailmentLabel label = EntailmentLabel::Neutral;
  double confidence = 0.0;
};

/// Answers "does `premise` entail `hypothesis`". Implementations that can be
/// called from several threads at once say so through concurrent_safe().
class EntailmentOracle {
 public:
  virtual ~EntailmentOracle() = default;
  virtual EntailmentVerdict judge(std::string_view premise, std::string_view hypothesis) = 0;
  virtual bool concurrent_safe() const noexcept { return false; }
};

/// Entails iff the two texts have identical word tokens. Offline fallback.
class ExactMatchOracle final : public EntailmentOracle {
 public:
  EntailmentVerdict judge(std::string_view premise, std::string_view hypothesis) override;
  bool concurrent_safe() const noexcept override { return true; }
};

/// Adapts a callable; handy for tests and scripted oracles.
class FunctionOracle final : public EntailmentOracle {
 public:
  using Fn = std::function<EntailmentVerdict(std::string_view, std::string_view)>;
  explicit FunctionOracle(Fn fn) : fn_(std::move(fn)) {}
  EntailmentVerdict judge(std::string_view premise, std::string_view hypothesis) override {
    return fn_(premise, hypothesis);
  }

 private:
  Fn fn_;
};

struct Partition {
  std::vector<std::vector<std::size_t>> clusters;  // member indices, first is the representative
  std::vector<std::size_t> assignment;             // text index -> cluster index
};

/// Greedy clustering in input order: a text joins the first cluster whose
/// representative it entails in both directions, else it opens a new cluster.
Partition cluster_by_entailment(std::span<const std::string> texts, EntailmentOracle& oracle);

/// −Σ_c p_c ln p_c with p_c the normalized sum of member weights.
double cluster_entropy(std::span<const double> weights, const Partition& partition);

/// Per-sample weights: exp of mean token logprob (length-normalized) or of the sum (raw).
std::vector<double> sequence_weights(const SampleSet& set, SequenceProbMode mode);

MetricScore semantic_entropy(const SampleSet& set, EntailmentOracle& oracle, const MetricConfig& cfg = {});

}  // namespace gss
