#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace gss {

/// Hidden-state summary of one layer for one response. The position of a
/// LayerStats in ResponseSample::layers is its layer index; index 0 is the
/// embedding output, as in a transformer's hidden-state stack.
struct LayerStats {
  std::vector<float> mean_vec;  // mean over generated tokens t = 1..T-1
  std::vector<float> last_vec;  // final non-pad generated token

  bool operator==(const LayerStats&) const = default;
};

struct ResponseSample {
  std::string text;
  std::size_t token_count = 0;
  std::vector<double> token_logprobs;
  /// ln Σ_v exp(logit_v) per generated token; empty when the provider has no logits.
  std::vector<double> token_logsumexp;
  std::vector<LayerStats> layers;
  std::optional<std::vector<float>> external_embedding;

  bool operator==(const ResponseSample&) const = default;
};

struct SampleSet {
  std::string prompt_id;
  std::string model_id;
  std::vector<ResponseSample> samples;

  std::size_t k() const noexcept { return samples.size(); }
};

enum class Direction { HigherIsLarger, LowerIsLarger };

std::string_view to_string(Direction d) noexcept;
Direction parse_direction(std::string_view text);

enum class SequenceProbMode { LengthNormalized, Raw };

/// Inclusive layer-index range S used by eigenscore_average.
///
/// The fractional form resolves against L = (layer count − 1), the index of
/// the final layer: S = {floor(start_fraction·L), …, L − end_offset}. At L = 32
/// with the defaults this is {20, …, 30}.
class LayerWindow {
 public:
  struct Fractional {
    double start_fraction = 0.65;
    int end_offset = 2;
  };
  struct Absolute {
    int first = 0;
    int last = 0;
  };

  LayerWindow() = default;
  explicit LayerWindow(Fractional f) : spec_(f) {}
  explicit LayerWindow(Absolute a) : spec_(a) {}

  /// Accepts "20:30" (absolute) or "0.65" / "0.65:2" (fraction, end offset).
  static LayerWindow parse(std::string_view text);

  /// Returns {first, last}; throws ErrorKind::Configuration when empty.
  std::pair<std::size_t, std::size_t> resolve(std::size_t layer_count) const;

  std::string to_string() const;

 private:
  std::variant<Fractional, Absolute> spec_{Fractional{}};
};

struct MetricConfig {
  double alpha = 1e-3;
  LayerWindow layer_window;
  SequenceProbMode sequence_prob_mode = SequenceProbMode::LengthNormalized;
  std::map<std::string, Direction, std::less<>> direction_overrides;

  Direction direction_for(std::string_view metric) const;
};

struct MetricScore {
  std::string prompt_id;
  std::string model_id;
  std::string metric_name;
  double value = 0.0;
  Direction direction = Direction::HigherIsLarger;
};

}  // namespace gss
