#pragma once

// Model-backend I/O. The /v1 protocol is one JSON object per request and per
// response body, each carrying "format_version".
//
//   POST /v1/sample {prompt, temperature, top_k, k, max_tokens, want_layers, want_logsumexp}
//        -> {samples: [{text, token_logprobs[], token_logsumexp[]?, layers: [{mean_vec[], last_vec[]}]?}]}
//   POST /v1/embed  {texts[]}              -> {vectors[][]}
//   POST /v1/entail {premise, hypothesis}  -> {label, confidence}
//   POST /v1/reward {prompt, response}     -> {score}

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/archive.hpp"
#include "gss/bench.hpp"
#include "gss/entailment.hpp"
#include "gss/error.hpp"

namespace gss {

inline constexpr int kProtocolVersion = 1;

struct SampleRequest {
  std::string prompt;
  std::string model_id;
  double temperature = 1.0;
  int top_k = 10;
  std::size_t k = 10;
  std::size_t max_tokens = 256;
  bool want_layers = true;
  bool want_logsumexp = true;
};

/// Thread-safe backend interface; every call may be issued concurrently.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::vector<ResponseSample> sample(const SampleRequest& request) = 0;
  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
  virtual EntailmentVerdict entail(std::string_view premise, std::string_view hypothesis) = 0;
  virtual double reward(std::string_view prompt, std::string_view response) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};
};

/// Exponential backoff with full jitter. Only ErrorKind::Transport failures are
/// retried; after the last attempt the Transport error lists every attempt.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, std::string_view what, Fn&& fn) -> decltype(fn());

struct HttpProviderConfig {
  std::string endpoint;  // "http://host:port"
  std::string bearer_token;
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  std::vector<ResponseSample> sample(const SampleRequest& request) override;
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  EntailmentVerdict entail(std::string_view premise, std::string_view hypothesis) override;
  double reward(std::string_view prompt, std::string_view response) override;

 private:
  std::string post(std::string_view path, const std::string& body) const;
  HttpProviderConfig config_;
};

/// Entailment through a Provider's /v1/entail.
class ProviderEntailmentOracle final : public EntailmentOracle {
 public:
  explicit ProviderEntailmentOracle(Provider& provider) : provider_(provider) {}
  EntailmentVerdict judge(std::string_view premise, std::string_view hypothesis) override {
    return provider_.entail(premise, hypothesis);
  }
  bool concurrent_safe() const noexcept override { return true; }

 private:
  Provider& provider_;
};

// Wire codecs, exposed for protocol tests and mock servers.
std::string encode_sample_request(const SampleRequest& request);
SampleRequest decode_sample_request(std::string_view body);
std::string encode_sample_response(std::span<const ResponseSample> samples);
std::vector<ResponseSample> decode_sample_response(std::string_view body);

struct CollectOptions {
  SamplingParams params;
  std::size_t concurrency = 4;
  bool want_layers = true;
  bool want_logsumexp = true;
  /// Fill external_embedding through `embedder` (defaults to the sampling provider).
  bool embed = false;
  Provider* embedder = nullptr;
  /// Metrics the records must support; see validate_record.
  std::vector<std::string> required_metrics;
};

struct CollectError {
  std::string prompt_id;
  ErrorKind kind = ErrorKind::Transport;
  std::string message;
};

struct CollectResult {
  std::vector<ArchiveRecord> records;  // prompt order; cached records included
  std::vector<CollectError> errors;
  std::size_t cache_hits = 0;
  std::size_t provider_calls = 0;
};

/// One validated record per prompt, or one error entry per failed prompt.
/// Records in `cached` with a matching cache_key are reused without a call.
CollectResult collect_samples(std::span<const Prompt> prompts, const CollectOptions& options, Provider& provider,
                              std::span<const ArchiveRecord> cached = {});

// ---- implementation -------------------------------------------------------

namespace detail {
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);
void sleep_for(std::chrono::milliseconds delay);
}  // namespace detail

template <typename Fn>
auto with_retry(const RetryPolicy& policy, std::string_view what, Fn&& fn) -> decltype(fn()) {
  std::string trace;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Transport) throw;
      trace += "\n  attempt " + std::to_string(attempt) + ": " + e.what();
      if (attempt >= attempts) {
        throw Error(ErrorKind::Transport,
                    std::string(what) + ": giving up after " + std::to_string(attempt) + " attempts" + trace);
      }
      detail::sleep_for(detail::backoff_delay(policy, attempt));
    }
  }
}

}  // namespace gss
