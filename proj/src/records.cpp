#include "gss/records.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gss/error.hpp"

namespace gss {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool is_gzip_path(const fs::path& p) { return p.extension() == ".gz"; }

std::string where(const fs::path& path, std::size_t index) {
  return path.string() + ":" + std::to_string(index + 1);
}

template <typename Fn>
void for_each_json(const fs::path& path, Fn&& fn) {
  for_each_line(path, [&](std::string_view line, std::size_t index, bool) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::InvalidInput, where(path, index) + ": malformed JSON: " + e.what());
    }
    try {
      fn(j, index);
    } catch (const json::exception& e) {
      fail(ErrorKind::InvalidInput, where(path, index) + ": " + e.what());
    }
  });
}

}  // namespace

struct LineWriter::Impl {
  fs::path target;
  fs::path temp;
  gzFile gz = nullptr;
  std::ofstream plain;
  bool committed = false;
};

LineWriter::LineWriter(fs::path path) : impl_(std::make_unique<Impl>()) {
  impl_->target = std::move(path);
  impl_->temp = impl_->target;
  impl_->temp += ".tmp";
  if (impl_->target.has_parent_path()) fs::create_directories(impl_->target.parent_path());
  if (is_gzip_path(impl_->target)) {
    // Fixed compression level and no embedded name/mtime keep bytes reproducible.
    impl_->gz = gzopen(impl_->temp.c_str(), "wb6");
    require(impl_->gz != nullptr, ErrorKind::InvalidInput, "cannot open " + impl_->temp.string());
  } else {
    impl_->plain.open(impl_->temp, std::ios::binary | std::ios::trunc);
    require(impl_->plain.is_open(), ErrorKind::InvalidInput, "cannot open " + impl_->temp.string());
  }
}

LineWriter::~LineWriter() {
  if (impl_->gz != nullptr) gzclose(impl_->gz);
  if (impl_->plain.is_open()) impl_->plain.close();
  if (!impl_->committed) {
    std::error_code ec;
    fs::remove(impl_->temp, ec);
  }
}

void LineWriter::write_line(std::string_view line) {
  if (impl_->gz != nullptr) {
    if (!line.empty() && gzwrite(impl_->gz, line.data(), static_cast<unsigned>(line.size())) == 0) {
      fail(ErrorKind::InvalidInput, "write failed: " + impl_->temp.string());
    }
    gzputc(impl_->gz, '\n');
  } else {
    impl_->plain.write(line.data(), static_cast<std::streamsize>(line.size()));
    impl_->plain.put('\n');
  }
}

void LineWriter::commit() {
  if (impl_->gz != nullptr) {
    const int rc = gzclose(impl_->gz);
    impl_->gz = nullptr;
    require(rc == Z_OK, ErrorKind::InvalidInput, "write failed: " + impl_->temp.string());
  } else {
    impl_->plain.close();
    require(!impl_->plain.fail(), ErrorKind::InvalidInput, "write failed: " + impl_->temp.string());
  }
  fs::rename(impl_->temp, impl_->target);
  impl_->committed = true;
}

void for_each_line(const fs::path& path,
                   const std::function<void(std::string_view, std::size_t, bool)>& fn) {
  gzFile in = gzopen(path.c_str(), "rb");
  require(in != nullptr, ErrorKind::InvalidInput, "cannot open " + path.string());
  std::string pending;
  std::array<char, 1 << 16> buf{};
  std::size_t index = 0;
  try {
    for (;;) {
      const int n = gzread(in, buf.data(), static_cast<unsigned>(buf.size()));
      if (n < 0) {
        int errnum = 0;
        const char* msg = gzerror(in, &errnum);
        fail(ErrorKind::CorruptArchive, path.string() + ": read error: " + (msg ? msg : "unknown"));
      }
      if (n == 0) break;
      pending.append(buf.data(), static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (auto nl = pending.find('\n', start); nl != std::string::npos; nl = pending.find('\n', start)) {
        std::string_view line(pending.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) fn(line, index++, true);
        start = nl + 1;
      }
      pending.erase(0, start);
    }
    if (!pending.empty()) fn(pending, index, false);
  } catch (...) {
    gzclose(in);
    throw;
  }
  gzclose(in);
}

// ---- prompts / pairs ------------------------------------------------------

void write_prompts(const fs::path& path, std::span<const Prompt> prompts) {
  LineWriter w(path);
  for (const auto& p : prompts) {
    json j = {{"id", p.id},
              {"text", p.text},
              {"dataset", std::string(to_string(p.dataset))},
              {"set_id", p.set_id},
              {"meta", p.meta}};
    w.write_line(j.dump());
  }
  w.commit();
}

std::vector<Prompt> read_prompts(const fs::path& path) {
  std::vector<Prompt> out;
  for_each_json(path, [&](const json& j, std::size_t index) {
    Prompt p;
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    if (j.contains("dataset")) {
      p.dataset = parse_dataset(j.at("dataset").get<std::string>());
      p.set_id = j.value("set_id", std::string());
      if (j.contains("meta")) p.meta = j.at("meta").get<std::map<std::string, std::string>>();
    } else {
      p.dataset = Dataset::External;
      if (j.contains("label")) {
        const auto& label = j.at("label");
        p.meta["label"] = label.is_string() ? label.get<std::string>() : label.dump();
      }
    }
    require(!p.id.empty() && !p.text.empty(), ErrorKind::InvalidInput,
            where(path, index) + ": prompt id and text must be non-empty");
    out.push_back(std::move(p));
  });
  return out;
}

void write_pairs(const fs::path& path, std::span<const PromptPair> pairs) {
  LineWriter w(path);
  for (const auto& p : pairs) {
    json j = {{"larger_id", p.larger_id},
              {"smaller_id", p.smaller_id},
              {"dataset", std::string(to_string(p.dataset))},
              {"rationale", std::string(to_string(p.rationale))}};
    w.write_line(j.dump());
  }
  w.commit();
}

std::vector<PromptPair> read_pairs(const fs::path& path) {
  std::vector<PromptPair> out;
  for_each_json(path, [&](const json& j, std::size_t index) {
    PromptPair p;
    p.larger_id = j.at("larger_id").get<std::string>();
    p.smaller_id = j.at("smaller_id").get<std::string>();
    p.dataset = parse_dataset(j.value("dataset", std::string("external")));
    p.rationale = parse_rationale(j.value("rationale", std::string("external")));
    require(p.larger_id != p.smaller_id, ErrorKind::InvalidInput,
            where(path, index) + ": pair relates a prompt to itself");
    out.push_back(std::move(p));
  });
  return out;
}

// ---- scores and side inputs ----------------------------------------------

void write_scores(const fs::path& path, std::span<const MetricScore> scores) {
  LineWriter w(path);
  for (const auto& s : scores) {
    json j = {{"prompt_id", s.prompt_id}, {"model_id", s.model_id}, {"metric_name", s.metric_name}, {"value", s.value}};
    w.write_line(j.dump());
  }
  w.commit();
}

std::vector<MetricScore> read_scores(const fs::path& path) {
  std::vector<MetricScore> out;
  for_each_json(path, [&](const json& j, std::size_t index) {
    MetricScore s;
    s.prompt_id = j.at("prompt_id").get<std::string>();
    s.model_id = j.at("model_id").get<std::string>();
    s.metric_name = j.at("metric_name").get<std::string>();
    require(j.at("value").is_number(), ErrorKind::InvalidInput, where(path, index) + ": value must be numeric");
    s.value = j.at("value").get<double>();
    require(std::isfinite(s.value), ErrorKind::InvalidInput, where(path, index) + ": value must be finite");
    out.push_back(std::move(s));
  });
  return out;
}

std::vector<LabelRecord> read_labels(const fs::path& path) {
  std::vector<LabelRecord> out;
  for_each_json(path, [&](const json& j, std::size_t index) {
    LabelRecord r;
    r.prompt_id = j.at("prompt_id").get<std::string>();
    const auto& label = j.at("label");
    if (label.is_boolean()) {
      r.label = label.get<bool>() ? 1 : 0;
    } else {
      r.label = label.get<int>();
    }
    require(r.label == 0 || r.label == 1, ErrorKind::InvalidInput, where(path, index) + ": label must be 0 or 1");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<TokenCountRecord> read_token_counts(const fs::path& path) {
  std::vector<TokenCountRecord> out;
  for_each_json(path, [&](const json& j, std::size_t) {
    out.push_back({j.at("prompt_id").get<std::string>(), j.at("reasoning_token_count").get<double>()});
  });
  return out;
}

std::vector<RewardRecord> read_rewards(const fs::path& path) {
  std::vector<RewardRecord> out;
  for_each_json(path, [&](const json& j, std::size_t index) {
    RewardRecord r{j.at("prompt_id").get<std::string>(), j.at("response_index").get<std::size_t>(),
                   j.at("reward").get<double>()};
    require(std::isfinite(r.reward), ErrorKind::InvalidInput, where(path, index) + ": reward must be finite");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<LooValueRecord> read_loo_values(const fs::path& path) {
  std::vector<LooValueRecord> out;
  for_each_json(path, [&](const json& j, std::size_t) {
    out.push_back({j.at("prompt_id").get<std::string>(), j.at("response_index").get<std::size_t>(),
                   j.at("looe").get<double>()});
  });
  return out;
}

}  // namespace gss
