#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "gss/archive.hpp"
#include "gss/bench.hpp"
#include "gss/sample.hpp"

namespace fixture {

/// A loopback port nothing listens on: bound once, then released.
inline int closed_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  static std::uint64_t counter = 0;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("gss_test_" + name + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<float> gaussian_vec(std::mt19937_64& rng, std::size_t d, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<float> v(d);
  for (auto& x : v) x = static_cast<float>(n(rng));
  return v;
}

/// K samples whose every layer vector and external embedding is N(0, sd^2 I_d).
inline std::vector<gss::ResponseSample> gaussian_samples(std::mt19937_64& rng, std::size_t k, std::size_t d,
                                                         std::size_t layers, double sd) {
  std::uniform_real_distribution<double> lp(-3.0, -0.05);
  std::uniform_real_distribution<double> lse(2.0, 9.0);
  std::vector<gss::ResponseSample> out;
  for (std::size_t n = 0; n < k; ++n) {
    gss::ResponseSample s;
    s.text = "response " + std::to_string(n) + " word" + std::to_string(rng() % 7);
    s.token_count = 5;
    for (int t = 0; t < 5; ++t) {
      s.token_logprobs.push_back(lp(rng));
      s.token_logsumexp.push_back(lse(rng));
    }
    for (std::size_t l = 0; l < layers; ++l) s.layers.push_back({gaussian_vec(rng, d, sd), gaussian_vec(rng, d, sd)});
    s.external_embedding = gaussian_vec(rng, d, sd);
    out.push_back(std::move(s));
  }
  return out;
}

inline gss::ArchiveRecord record(std::string prompt_id, std::string model, std::vector<gss::ResponseSample> samples) {
  gss::ArchiveRecord r;
  r.prompt_id = std::move(prompt_id);
  r.model_id = model;
  r.params.model_id = model;
  r.params.k = samples.size();
  r.samples = std::move(samples);
  r.content_checksum = gss::compute_checksum(r);
  return r;
}

/// Longest chain of strictly smaller prompts below each prompt in the pair DAG.
inline std::map<std::string, int> gss_ranks(const std::vector<gss::PromptPair>& pairs) {
  std::map<std::string, std::vector<std::string>> below;
  for (const auto& p : pairs) {
    below[p.larger_id].push_back(p.smaller_id);
    below[p.smaller_id];
  }
  std::map<std::string, int> rank;
  std::function<int(const std::string&)> visit = [&](const std::string& id) {
    if (auto it = rank.find(id); it != rank.end()) return it->second;
    int r = 0;
    for (const auto& s : below[id]) r = std::max(r, visit(s) + 1);
    return rank[id] = r;
  };
  for (const auto& [id, _] : below) visit(id);
  return rank;
}

/// Archive in which a prompt of GSS rank r gets embeddings with spread base^r.
inline std::vector<gss::ArchiveRecord> planted_archive(const std::vector<gss::Prompt>& prompts,
                                                       const std::vector<gss::PromptPair>& pairs,
                                                       const std::string& model, std::uint64_t seed,
                                                       double base = 1.6, std::size_t k = 10, std::size_t d = 16,
                                                       std::size_t layers = 9) {
  const auto rank = gss_ranks(pairs);
  std::mt19937_64 rng(seed);
  std::vector<gss::ArchiveRecord> out;
  for (const auto& p : prompts) {
    const auto it = rank.find(p.id);
    const double sd = std::pow(base, it == rank.end() ? 0 : it->second);
    out.push_back(record(p.id, model, gaussian_samples(rng, k, d, layers, sd)));
  }
  return out;
}

}  // namespace fixture
