#pragma once

// Line-delimited JSON record files shared by every command. Paths ending in
// ".gz" are gzip-compressed; readers accept either form.

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gss/bench.hpp"
#include "gss/sample.hpp"

namespace gss {

/// Writes to "<path>.tmp" and renames onto `path` in commit(). An uncommitted
/// writer removes its temporary file.
class LineWriter {
 public:
  explicit LineWriter(std::filesystem::path path);
  ~LineWriter();
  LineWriter(const LineWriter&) = delete;
  LineWriter& operator=(const LineWriter&) = delete;

  void write_line(std::string_view line);
  void commit();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Calls `fn(line, index)` for every non-empty line. A final line without a
/// trailing newline is reported with `complete = false`.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view line, std::size_t index, bool complete)>& fn);

void write_prompts(const std::filesystem::path& path, std::span<const Prompt> prompts);
/// Accepts the generator schema {id, text, dataset, set_id, meta} and labeled
/// prompt files {id, text, label}; the latter load as external prompts with meta.label.
std::vector<Prompt> read_prompts(const std::filesystem::path& path);

void write_pairs(const std::filesystem::path& path, std::span<const PromptPair> pairs);
std::vector<PromptPair> read_pairs(const std::filesystem::path& path);

/// {prompt_id, model_id, metric_name, value}
void write_scores(const std::filesystem::path& path, std::span<const MetricScore> scores);
std::vector<MetricScore> read_scores(const std::filesystem::path& path);

struct LabelRecord {
  std::string prompt_id;
  int label = 0;
};
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);

struct TokenCountRecord {
  std::string prompt_id;
  double reasoning_token_count = 0.0;
};
std::vector<TokenCountRecord> read_token_counts(const std::filesystem::path& path);

struct RewardRecord {
  std::string prompt_id;
  std::size_t response_index = 0;
  double reward = 0.0;
};
std::vector<RewardRecord> read_rewards(const std::filesystem::path& path);

/// Raw leave-one-out values {prompt_id, response_index, looe}.
struct LooValueRecord {
  std::string prompt_id;
  std::size_t response_index = 0;
  double looe = 0.0;
};
std::vector<LooValueRecord> read_loo_values(const std::filesystem::path& path);

}  // namespace gss
