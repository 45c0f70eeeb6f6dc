#include "gss/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace gss {

using nlohmann::json;

namespace detail {

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const double cap = std::min<double>(static_cast<double>(policy.max_delay.count()),
                                      static_cast<double>(policy.base_delay.count()) * std::ldexp(1.0, attempt - 1));
  std::uniform_real_distribution<double> jitter(0.0, std::max(cap, 0.0));
  return std::chrono::milliseconds(static_cast<long long>(jitter(rng)));
}

void sleep_for(std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); }

}  // namespace detail

namespace {

json parse_body(std::string_view body, std::string_view endpoint) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    fail(ErrorKind::Protocol, std::string(endpoint) + ": response is not JSON: " + e.what());
  }
  require(j.is_object(), ErrorKind::Protocol, std::string(endpoint) + ": response must be a JSON object");
  const int version = j.value("format_version", -1);
  if (version != kProtocolVersion) {
    fail(ErrorKind::Protocol, std::string(endpoint) + ": protocol version mismatch (got " + std::to_string(version) +
                                  ", expected " + std::to_string(kProtocolVersion) + ")");
  }
  return j;
}

template <typename Fn>
auto decode(std::string_view endpoint, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    fail(ErrorKind::Protocol, std::string(endpoint) + ": schema-invalid response: " + e.what());
  }
}

std::vector<float> to_floats(const json& j) {
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(static_cast<float>(x.get<double>()));
  return v;
}

}  // namespace

std::string encode_sample_request(const SampleRequest& r) {
  json j = {{"format_version", kProtocolVersion},
            {"prompt", r.prompt},
            {"temperature", r.temperature},
            {"top_k", r.top_k},
            {"k", r.k},
            {"max_tokens", r.max_tokens},
            {"want_layers", r.want_layers},
            {"want_logsumexp", r.want_logsumexp}};
  if (!r.model_id.empty()) j["model"] = r.model_id;
  return j.dump();
}

SampleRequest decode_sample_request(std::string_view body) {
  const json j = parse_body(body, "/v1/sample request");
  return decode("/v1/sample request", [&] {
    SampleRequest r;
    r.prompt = j.at("prompt").get<std::string>();
    r.model_id = j.value("model", std::string());
    r.temperature = j.at("temperature").get<double>();
    r.top_k = j.at("top_k").get<int>();
    r.k = j.at("k").get<std::size_t>();
    r.max_tokens = j.at("max_tokens").get<std::size_t>();
    r.want_layers = j.at("want_layers").get<bool>();
    r.want_logsumexp = j.at("want_logsumexp").get<bool>();
    return r;
  });
}

std::string encode_sample_response(std::span<const ResponseSample> samples) {
  json arr = json::array();
  for (const auto& s : samples) {
    json o = {{"text", s.text}, {"token_logprobs", s.token_logprobs}};
    if (!s.token_logsumexp.empty()) o["token_logsumexp"] = s.token_logsumexp;
    if (!s.layers.empty()) {
      json layers = json::array();
      for (const auto& l : s.layers) layers.push_back({{"mean_vec", l.mean_vec}, {"last_vec", l.last_vec}});
      o["layers"] = std::move(layers);
    }
    arr.push_back(std::move(o));
  }
  return json{{"format_version", kProtocolVersion}, {"samples", std::move(arr)}}.dump();
}

std::vector<ResponseSample> decode_sample_response(std::string_view body) {
  const json j = parse_body(body, "/v1/sample");
  return decode("/v1/sample", [&] {
    std::vector<ResponseSample> out;
    for (const auto& o : j.at("samples")) {
      ResponseSample s;
      s.text = o.at("text").get<std::string>();
      s.token_logprobs = o.at("token_logprobs").get<std::vector<double>>();
      s.token_count = s.token_logprobs.size();
      if (o.contains("token_logsumexp") && !o.at("token_logsumexp").is_null()) {
        s.token_logsumexp = o.at("token_logsumexp").get<std::vector<double>>();
      }
      if (o.contains("layers") && !o.at("layers").is_null()) {
        for (const auto& l : o.at("layers")) s.layers.push_back({to_floats(l.at("mean_vec")), to_floats(l.at("last_vec"))});
      }
      out.push_back(std::move(s));
    }
    return out;
  });
}

// ---- HTTP provider --------------------------------------------------------

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
  require(!config_.endpoint.empty(), ErrorKind::Usage, "provider endpoint is empty");
}

std::string HttpProvider::post(std::string_view path, const std::string& body) const {
  const std::string what = "POST " + config_.endpoint + std::string(path);
  return with_retry(config_.retry, what, [&]() -> std::string {
    // One client per call keeps the provider safe for concurrent use.
    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    if (!config_.bearer_token.empty()) client.set_bearer_token_auth(config_.bearer_token);
    auto res = client.Post(std::string(path), body, "application/json");
    if (!res) fail(ErrorKind::Transport, what + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      fail(ErrorKind::Transport, what + ": HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
      fail(ErrorKind::Protocol, what + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    return res->body;
  });
}

std::vector<ResponseSample> HttpProvider::sample(const SampleRequest& request) {
  return decode_sample_response(post("/v1/sample", encode_sample_request(request)));
}

std::vector<std::vector<float>> HttpProvider::embed(std::span<const std::string> texts) {
  json req = {{"format_version", kProtocolVersion}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const json j = parse_body(post("/v1/embed", req.dump()), "/v1/embed");
  return decode("/v1/embed", [&] {
    std::vector<std::vector<float>> out;
    for (const auto& v : j.at("vectors")) out.push_back(to_floats(v));
    if (out.size() != texts.size()) {
      fail(ErrorKind::Protocol, "/v1/embed: expected " + std::to_string(texts.size()) + " vectors, got " +
                                    std::to_string(out.size()));
    }
    return out;
  });
}

EntailmentVerdict HttpProvider::entail(std::string_view premise, std::string_view hypothesis) {
  json req = {{"format_version", kProtocolVersion}, {"premise", premise}, {"hypothesis", hypothesis}};
  const json j = parse_body(post("/v1/entail", req.dump()), "/v1/entail");
  return decode("/v1/entail", [&] {
    EntailmentVerdict v{parse_entailment_label(j.at("label").get<std::string>()), j.at("confidence").get<double>()};
    require(std::isfinite(v.confidence) && v.confidence >= 0.0 && v.confidence <= 1.0, ErrorKind::Protocol,
            "/v1/entail: confidence must be in [0,1]");
    return v;
  });
}

double HttpProvider::reward(std::string_view prompt, std::string_view response) {
  json req = {{"format_version", kProtocolVersion}, {"prompt", prompt}, {"response", response}};
  const json j = parse_body(post("/v1/reward", req.dump()), "/v1/reward");
  return decode("/v1/reward", [&] {
    const double score = j.at("score").get<double>();
    require(std::isfinite(score), ErrorKind::Protocol, "/v1/reward: non-finite score");
    return score;
  });
}

// ---- collection -----------------------------------------------------------

CollectResult collect_samples(std::span<const Prompt> prompts, const CollectOptions& options, Provider& provider,
                              std::span<const ArchiveRecord> cached) {
  options.params.validate();
  std::map<std::string, const ArchiveRecord*> cache;
  for (const auto& r : cached) cache.emplace(cache_key(r.prompt_id, r.params), &r);

  struct Slot {
    std::optional<ArchiveRecord> record;
    std::optional<CollectError> error;
    bool cache_hit = false;
  };
  std::vector<Slot> slots(prompts.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  Provider& embedder = options.embedder != nullptr ? *options.embedder : provider;

  auto work = [&](std::size_t i) {
    const Prompt& prompt = prompts[i];
    if (auto it = cache.find(cache_key(prompt.id, options.params)); it != cache.end()) {
      slots[i].record = *it->second;
      slots[i].cache_hit = true;
      return;
    }
    try {
      SampleRequest req;
      req.prompt = prompt.text;
      req.model_id = options.params.model_id;
      req.temperature = options.params.temperature;
      req.top_k = options.params.top_k;
      req.k = options.params.k;
      req.max_tokens = options.params.max_tokens;
      req.want_layers = options.want_layers;
      req.want_logsumexp = options.want_logsumexp;
      ArchiveRecord rec;
      rec.prompt_id = prompt.id;
      rec.model_id = options.params.model_id;
      rec.params = options.params;
      ++calls;
      rec.samples = provider.sample(req);
      if (rec.samples.size() != options.params.k) {
        fail(ErrorKind::Protocol, "provider returned " + std::to_string(rec.samples.size()) + " samples, expected k=" +
                                      std::to_string(options.params.k));
      }
      if (options.embed) {
        std::vector<std::string> texts;
        for (const auto& s : rec.samples) texts.push_back(s.text);
        ++calls;
        auto vectors = embedder.embed(texts);
        require(vectors.size() == texts.size(), ErrorKind::Protocol, "embedder returned the wrong number of vectors");
        for (std::size_t n = 0; n < vectors.size(); ++n) rec.samples[n].external_embedding = std::move(vectors[n]);
      }
      const auto violations = validate_record(rec, options.required_metrics);
      if (!violations.empty()) {
        std::string msg = "record rejected:";
        for (const auto& v : violations) msg += " [" + v.field + ": " + v.message + "]";
        fail(ErrorKind::Protocol, msg);
      }
      rec.content_checksum = compute_checksum(rec);
      slots[i].record = std::move(rec);
    } catch (const Error& e) {
      slots[i].error = CollectError{prompt.id, e.kind(), e.what()};
    } catch (const std::exception& e) {
      slots[i].error = CollectError{prompt.id, ErrorKind::Transport, e.what()};
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(prompts.size(), 1));
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < prompts.size(); i = next++) work(i);
      });
    }
  }

  CollectResult out;
  out.provider_calls = calls.load();
  for (auto& s : slots) {
    if (s.record) out.records.push_back(std::move(*s.record));
    if (s.error) out.errors.push_back(std::move(*s.error));
    if (s.cache_hit) ++out.cache_hits;
  }
  return out;
}

}  // namespace gss
