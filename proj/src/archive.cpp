#include "gss/archive.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gss/error.hpp"
#include "gss/metrics.hpp"
#include "gss/records.hpp"

namespace gss {

using nlohmann::json;

void SamplingParams::validate() const {
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::Usage, "temperature must be > 0");
  require(k >= 1, ErrorKind::Usage, "k must be >= 1");
  require(top_k >= 0, ErrorKind::Usage, "top_k must be >= 0");
}

SampleSet ArchiveRecord::sample_set() const { return SampleSet{prompt_id, model_id, samples}; }

namespace {

class CanonicalWriter {
 public:
  std::string take() { return std::move(out_); }

  CanonicalWriter& raw(std::string_view s) {
    out_ += s;
    need_comma_ = true;
    return *this;
  }
  CanonicalWriter& key(std::string_view k) {
    if (need_comma_) out_ += ',';
    out_ += '"';
    out_ += k;
    out_ += "\":";
    need_comma_ = false;
    return *this;
  }
  CanonicalWriter& open(char c) {
    out_ += c;
    need_comma_ = false;
    return *this;
  }
  CanonicalWriter& close(char c) {
    out_ += c;
    need_comma_ = true;
    return *this;
  }
  CanonicalWriter& element() {
    if (need_comma_) out_ += ',';
    need_comma_ = false;
    return *this;
  }
  CanonicalWriter& string(std::string_view s) {
    out_ += json(s).dump(-1, ' ', false, json::error_handler_t::strict);
    need_comma_ = true;
    return *this;
  }
  template <typename T>
  CanonicalWriter& number(T v) {
    if constexpr (std::is_floating_point_v<T>) {
      require(std::isfinite(v), ErrorKind::InvalidInput, "archive: cannot encode non-finite number");
    }
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out_.append(buf.data(), res.ptr);
    need_comma_ = true;
    return *this;
  }
  template <typename T>
  CanonicalWriter& array(const std::vector<T>& v) {
    open('[');
    for (const T& x : v) element().number(x);
    return close(']');
  }
  CanonicalWriter& null() {
    out_ += "null";
    need_comma_ = true;
    return *this;
  }

 private:
  std::string out_;
  bool need_comma_ = false;
};

void write_sample(CanonicalWriter& w, const ResponseSample& s, int version) {
  w.element().open('{');
  w.key("text").string(s.text);
  if (version >= 2) w.key("token_count").number(s.token_count);
  w.key("token_logprobs").array(s.token_logprobs);
  w.key("token_logsumexp").array(s.token_logsumexp);
  if (version >= 2) {
    w.key("layer_mean").open('[');
    for (const auto& l : s.layers) w.element().array(l.mean_vec);
    w.close(']');
    w.key("layer_last").open('[');
    for (const auto& l : s.layers) w.element().array(l.last_vec);
    w.close(']');
  } else {
    w.key("layers").open('[');
    for (const auto& l : s.layers) {
      w.element().open('{');
      w.key("mean_vec").array(l.mean_vec);
      w.key("last_vec").array(l.last_vec);
      w.close('}');
    }
    w.close(']');
  }
  w.key("external_embedding");
  if (s.external_embedding) {
    w.array(*s.external_embedding);
  } else {
    w.null();
  }
  w.close('}');
}

std::vector<float> float_array(const json& j) {
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(static_cast<float>(x.get<double>()));
  return v;
}

ResponseSample read_sample(const json& j, int version) {
  ResponseSample s;
  s.text = j.at("text").get<std::string>();
  s.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
  s.token_logsumexp = j.value("token_logsumexp", std::vector<double>{});
  s.token_count = version >= 2 ? j.at("token_count").get<std::size_t>() : s.token_logprobs.size();
  if (version >= 2) {
    const auto& means = j.at("layer_mean");
    const auto& lasts = j.at("layer_last");
    if (means.size() != lasts.size()) {
      fail(ErrorKind::CorruptArchive, "layer_mean and layer_last differ in length");
    }
    for (std::size_t l = 0; l < means.size(); ++l) s.layers.push_back({float_array(means[l]), float_array(lasts[l])});
  } else {
    for (const auto& l : j.value("layers", json::array())) {
      s.layers.push_back({float_array(l.at("mean_vec")), float_array(l.at("last_vec"))});
    }
  }
  if (j.contains("external_embedding") && !j.at("external_embedding").is_null()) {
    s.external_embedding = float_array(j.at("external_embedding"));
  }
  return s;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  require(EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) == 1,
          ErrorKind::Numeric, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

}  // namespace

std::string canonical_samples(const ArchiveRecord& record) {
  require(record.format_version == kArchiveVersion || record.format_version == kArchiveVersionLegacy,
          ErrorKind::CorruptArchive, "unknown archive format_version " + std::to_string(record.format_version));
  CanonicalWriter w;
  w.open('[');
  for (const auto& s : record.samples) write_sample(w, s, record.format_version);
  w.close(']');
  return w.take();
}

std::string compute_checksum(const ArchiveRecord& record) { return sha256_hex(canonical_samples(record)); }

std::string serialize_record(const ArchiveRecord& record) {
  const std::string payload = canonical_samples(record);
  const std::string checksum = sha256_hex(payload);
  if (!record.content_checksum.empty() && record.content_checksum != checksum) {
    fail(ErrorKind::CorruptArchive, "record " + record.prompt_id + ": sample content no longer matches its checksum");
  }
  CanonicalWriter w;
  w.open('{');
  w.key("format_version").number(record.format_version);
  w.key("prompt_id").string(record.prompt_id);
  w.key("model_id").string(record.model_id);
  w.key("params").open('{');
  w.key("model_id").string(record.params.model_id);
  w.key("temperature").number(record.params.temperature);
  w.key("top_k").number(record.params.top_k);
  w.key("k").number(record.params.k);
  w.key("max_tokens").number(record.params.max_tokens);
  w.close('}');
  w.key("samples").raw(payload);
  w.key("content_checksum").string(checksum);
  w.close('}');
  return w.take();
}

ArchiveRecord parse_record(std::string_view line, std::size_t index) {
  const std::string where = "archive record " + std::to_string(index);
  ArchiveRecord r;
  try {
    const json j = json::parse(line);
    r.format_version = j.at("format_version").get<int>();
    if (r.format_version != kArchiveVersion && r.format_version != kArchiveVersionLegacy) {
      fail(ErrorKind::CorruptArchive, where + ": unsupported format_version " + std::to_string(r.format_version));
    }
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    const auto& p = j.at("params");
    r.params.model_id = p.value("model_id", r.model_id);
    r.params.temperature = p.at("temperature").get<double>();
    r.params.top_k = p.at("top_k").get<int>();
    r.params.k = p.at("k").get<std::size_t>();
    r.params.max_tokens = p.value("max_tokens", std::size_t{256});
    for (const auto& s : j.at("samples")) r.samples.push_back(read_sample(s, r.format_version));
    r.content_checksum = j.at("content_checksum").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptArchive, where + ": " + e.what());
  }
  if (compute_checksum(r) != r.content_checksum) {
    fail(ErrorKind::CorruptArchive, where + " (" + r.prompt_id + "): checksum mismatch");
  }
  return r;
}

void write_archive(std::span<const ArchiveRecord> records, const std::filesystem::path& path) {
  LineWriter w(path);
  for (const auto& r : records) w.write_line(serialize_record(r));
  w.commit();
}

std::vector<ArchiveRecord> read_archive(const std::filesystem::path& path) {
  std::vector<ArchiveRecord> out;
  for_each_line(path, [&](std::string_view line, std::size_t index, bool complete) {
    if (!complete) fail(ErrorKind::CorruptArchive, "archive record " + std::to_string(index) + ": truncated line");
    out.push_back(parse_record(line, index));
  });
  return out;
}

std::string cache_key(std::string_view prompt_id, const SamplingParams& p) {
  return std::string(prompt_id) + "|" + p.model_id + "|t=" + json(p.temperature).dump() +
         "|top_k=" + std::to_string(p.top_k) + "|k=" + std::to_string(p.k) +
         "|max_tokens=" + std::to_string(p.max_tokens);
}

// ---- validation -----------------------------------------------------------

namespace {

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

std::vector<Violation> validate_record(const ArchiveRecord& r, std::span<const std::string> metrics,
                                       const MetricConfig& cfg) {
  std::vector<Violation> out;
  auto add = [&](std::string field, std::string message) { out.push_back({std::move(field), std::move(message)}); };

  if (r.format_version != kArchiveVersion && r.format_version != kArchiveVersionLegacy) {
    add("format_version", "unsupported version " + std::to_string(r.format_version));
  }
  if (r.prompt_id.empty()) add("prompt_id", "empty");
  if (r.params.temperature <= 0.0) add("params.temperature", "must be > 0");
  if (r.params.k < 1) add("params.k", "must be >= 1");
  if (!r.params.model_id.empty() && r.params.model_id != r.model_id) add("params.model_id", "differs from model_id");
  if (r.samples.size() != r.params.k) {
    add("samples", "expected k=" + std::to_string(r.params.k) + " samples, found " + std::to_string(r.samples.size()));
  }

  const std::size_t depth = r.samples.empty() ? 0 : r.samples.front().layers.size();
  std::vector<std::size_t> widths(depth, 0);
  std::size_t ext_width = 0;
  bool all_have_layers = !r.samples.empty();
  bool all_have_ext = !r.samples.empty();
  bool all_have_lse = !r.samples.empty();

  for (std::size_t n = 0; n < r.samples.size(); ++n) {
    const auto& s = r.samples[n];
    const std::string at = "samples[" + std::to_string(n) + "]";
    if (s.token_count < 1) add(at + ".token_count", "must be >= 1");
    if (s.token_logprobs.size() != s.token_count) {
      add(at + ".token_logprobs", "length " + std::to_string(s.token_logprobs.size()) + " != token_count " +
                                      std::to_string(s.token_count));
    }
    for (double lp : s.token_logprobs) {
      if (!std::isfinite(lp) || lp > 0.0) {
        add(at + ".token_logprobs", "entries must be finite and <= 0");
        break;
      }
    }
    if (!s.token_logsumexp.empty() && s.token_logsumexp.size() != s.token_count) {
      add(at + ".token_logsumexp", "length must equal token_count or be empty");
    }
    if (!all_finite(s.token_logsumexp)) add(at + ".token_logsumexp", "non-finite entry");
    if (s.token_logsumexp.empty()) all_have_lse = false;

    if (s.layers.size() != depth) {
      add(at + ".layers", "has " + std::to_string(s.layers.size()) + " layers, sample 0 has " + std::to_string(depth));
    }
    if (s.layers.empty()) all_have_layers = false;
    for (std::size_t l = 0; l < s.layers.size() && l < depth; ++l) {
      const auto& ls = s.layers[l];
      const std::string lat = at + ".layers[" + std::to_string(l) + "]";
      if (ls.mean_vec.empty() || ls.mean_vec.size() != ls.last_vec.size()) {
        add(lat, "mean_vec and last_vec must be non-empty and equally wide");
      }
      if (widths[l] == 0) widths[l] = ls.mean_vec.size();
      if (ls.mean_vec.size() != widths[l]) add(lat + ".mean_vec", "width differs across samples");
      if (!all_finite(ls.mean_vec) || !all_finite(ls.last_vec)) add(lat, "non-finite entry");
    }
    if (s.external_embedding) {
      const auto& e = *s.external_embedding;
      if (e.empty()) add(at + ".external_embedding", "empty vector");
      if (ext_width == 0) ext_width = e.size();
      if (e.size() != ext_width) add(at + ".external_embedding", "width differs across samples");
      if (!all_finite(e)) add(at + ".external_embedding", "non-finite entry");
    } else {
      all_have_ext = false;
    }
  }

  const std::size_t k = r.samples.size();
  for (const auto& m : metrics) {
    const bool eigen = m == metric::kEigenscoreOriginal || m == metric::kEigenscoreAverage ||
                       m == metric::kEigenscoreOutput;
    if ((eigen || m == metric::kLexicalSimilarity) && k < 2) add(m, "needs at least 2 samples");
    if ((m == metric::kEigenscoreOriginal || m == metric::kEigenscoreAverage) && !all_have_layers) {
      add(m, "requires layer statistics on every sample");
    }
    if (m == metric::kEigenscoreAverage && all_have_layers) {
      try {
        (void)cfg.layer_window.resolve(depth);
      } catch (const Error& e) {
        add(m, e.what());
      }
    }
    if (m == metric::kEigenscoreOutput && !all_have_ext) add(m, "requires external embeddings on every sample");
    if (m == metric::kEnergy && !all_have_lse) add(m, "requires token_logsumexp on every sample");
    if (!is_metric_name(m)) add(m, "unknown metric");
  }
  return out;
}

}  // namespace gss
