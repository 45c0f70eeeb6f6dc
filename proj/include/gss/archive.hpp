#pragma once

// Persistent sample archives: one ArchiveRecord per line, canonical encoding,
// SHA-256 over the canonical sample payload.
//
// Canonical encoding: fixed key order, no insignificant whitespace, numbers in
// shortest round-trip form (doubles for logprob fields, 32-bit floats for
// vectors), strings escaped as JSON with UTF-8 passed through.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/sample.hpp"

namespace gss {

/// v1: per-sample "layers":[{mean_vec,last_vec}] as on the wire, token_count implied.
/// v2: explicit token_count, layer statistics flattened into layer_mean/layer_last.
inline constexpr int kArchiveVersionLegacy = 1;
inline constexpr int kArchiveVersion = 2;

struct SamplingParams {
  std::string model_id;
  double temperature = 1.0;
  int top_k = 10;
  std::size_t k = 10;
  std::size_t max_tokens = 256;

  bool operator==(const SamplingParams&) const = default;
  /// Throws ErrorKind::Usage on temperature <= 0, k == 0 or top_k < 0.
  void validate() const;
};

struct ArchiveRecord {
  std::string prompt_id;
  std::string model_id;
  SamplingParams params;
  std::vector<ResponseSample> samples;
  std::string content_checksum;
  int format_version = kArchiveVersion;

  bool operator==(const ArchiveRecord&) const = default;
  SampleSet sample_set() const;
};

/// Canonical JSON array of the record's samples in its format_version.
std::string canonical_samples(const ArchiveRecord& record);
std::string compute_checksum(const ArchiveRecord& record);

/// One canonical line. Fills the checksum when empty; a stale checksum is an error.
std::string serialize_record(const ArchiveRecord& record);
/// Parses and verifies one line; failures are ErrorKind::CorruptArchive naming `index`.
ArchiveRecord parse_record(std::string_view line, std::size_t index);

void write_archive(std::span<const ArchiveRecord> records, const std::filesystem::path& path);
std::vector<ArchiveRecord> read_archive(const std::filesystem::path& path);

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Static shape checks so the requested metrics cannot fail on shape. Data
/// needed only by metrics not in `metrics` is not required.
std::vector<Violation> validate_record(const ArchiveRecord& record, std::span<const std::string> metrics = {},
                                       const MetricConfig& cfg = {});

/// Identity of a collection request; equal keys are served from the archive.
std::string cache_key(std::string_view prompt_id, const SamplingParams& params);

}  // namespace gss
