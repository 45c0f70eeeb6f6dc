#include "gss/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gss/archive.hpp"
#include "gss/bench.hpp"
#include "gss/entailment.hpp"
#include "gss/evaluation.hpp"
#include "gss/gateway.hpp"
#include "gss/metrics.hpp"
#include "gss/preference.hpp"
#include "gss/records.hpp"
#include "gss/stats.hpp"

namespace gss::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- small helpers --------------------------------------------------------

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    std::string item(text.substr(start, end - start));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string env_name(std::string_view option) {
  std::string out = "GSS_";
  for (char c : option) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  LineWriter w(path);
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    w.write_line(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  w.commit();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2)); }

std::string config_value_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) out += (out.empty() ? "" : ",") + config_value_string(item);
    return out;
  }
  return v.dump();
}

// ---- settings: flag > environment > config file > default ------------------

struct OptionSpec {
  OptionSpec(std::string name_, std::string help_, std::string fallback_ = "", bool flag_ = false,
             bool required_ = false, bool secret_ = false)
      : name(std::move(name_)), help(std::move(help_)), fallback(std::move(fallback_)), flag(flag_),
        required(required_), secret(secret_) {}

  std::string name;
  std::string help;
  std::string fallback;
  bool flag;
  bool required;
  bool secret;
};

class Settings {
 public:
  Settings(std::string command, std::vector<OptionSpec> specs) : command_(std::move(command)), specs_(std::move(specs)) {}

  void bind(CLI::App& app) {
    for (const auto& s : specs_) {
      if (s.flag) {
        opts_[s.name] = app.add_flag("--" + s.name, flags_[s.name], s.help);
      } else {
        std::string help = s.help;
        if (!s.fallback.empty()) help += " [default: " + s.fallback + "]";
        if (s.required) help += " (required)";
        opts_[s.name] = app.add_option("--" + s.name, raw_[s.name], help);
      }
    }
  }

  void resolve(const RunContext& ctx, const json& config) {
    for (const auto& s : specs_) {
      std::optional<std::string> value;
      std::string source;
      if (opts_.at(s.name)->count() > 0) {
        value = s.flag ? std::string("true") : raw_.at(s.name);
        source = "flag";
      } else if (auto env = ctx.getenv(env_name(s.name))) {
        value = *env;
        source = "env";
      } else if (config.contains(command_) && config.at(command_).is_object() && config.at(command_).contains(s.name)) {
        value = config_value_string(config.at(command_).at(s.name));
        source = "config";
      } else if (config.contains(s.name) && !config.at(s.name).is_object()) {
        value = config_value_string(config.at(s.name));
        source = "config";
      } else if (!s.fallback.empty() || s.flag) {
        value = s.flag && s.fallback.empty() ? std::string("false") : s.fallback;
        source = "default";
      }
      if (!value && s.required) {
        fail(ErrorKind::Usage, command_ + ": --" + s.name + " is required (flag, " + env_name(s.name) + " or config)");
      }
      if (value) resolved_[s.name] = {*value, source};
    }
  }

  std::optional<std::string> get(const std::string& name) const {
    const auto it = resolved_.find(name);
    if (it == resolved_.end() || it->second.first.empty()) return std::nullopt;
    return it->second.first;
  }

  std::string str(const std::string& name) const { return get(name).value_or(""); }

  double real(const std::string& name) const {
    const std::string v = str(name);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size() && std::isfinite(out), ErrorKind::Usage,
            "--" + name + ": expected a number, got '" + v + "'");
    return out;
  }

  std::uint64_t uint(const std::string& name) const {
    const std::string v = str(name);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && ptr == v.data() + v.size(), ErrorKind::Usage,
            "--" + name + ": expected a non-negative integer, got '" + v + "'");
    return out;
  }

  bool boolean(const std::string& name) const {
    std::string v = str(name);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
    fail(ErrorKind::Usage, "--" + name + ": expected true or false, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& name) const { return split_list(str(name)); }

  json snapshot() const {
    json values = json::object();
    json sources = json::object();
    for (const auto& s : specs_) {
      const auto it = resolved_.find(s.name);
      if (it == resolved_.end()) continue;
      values[s.name] = s.secret ? std::string("<redacted>") : it->second.first;
      sources[s.name] = it->second.second;
    }
    return {{"values", values}, {"sources", sources}};
  }

 private:
  std::string command_;
  std::vector<OptionSpec> specs_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, bool> flags_;
  std::map<std::string, CLI::Option*> opts_;
  std::map<std::string, std::pair<std::string, std::string>> resolved_;
};

/// Accepts a plain settings object or a manifest written by a previous run.
json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  require(in.good(), ErrorKind::Usage, "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Usage, "config file " + path + ": " + e.what());
  }
  require(j.is_object(), ErrorKind::Usage, "config file " + path + " must hold a JSON object");
  if (j.contains("manifest_version") && j.contains("config") && j.contains("command")) {
    json values = j.at("config").at("values");
    for (auto it = values.begin(); it != values.end();) {
      it = it->is_string() && it->get<std::string>() == "<redacted>" ? values.erase(it) : std::next(it);
    }
    return json{{j.at("command").get<std::string>(), values}};
  }
  return j;
}

// ---- run bookkeeping ------------------------------------------------------

class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      fail(ErrorKind::Usage, "output directory is in use by another run (remove " + path_.string() +
                                 " if that run is gone)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

struct Run {
  const Settings& settings;
  fs::path out;
  std::ostream& log;
  json inputs = json::array();
  json outputs = json::array();
  json seeds = json::object();
  json summary = json::object();

  fs::path input(const std::string& path) {
    require(fs::exists(path), ErrorKind::InvalidInput, "input file not found: " + path);
    inputs.push_back(path);
    return path;
  }
  fs::path output(const std::string& name) {
    outputs.push_back((out / name).string());
    return out / name;
  }
};

MetricConfig metric_config(const Settings& s) {
  MetricConfig cfg;
  if (auto a = s.get("alpha")) {
    cfg.alpha = s.real("alpha");
    require(cfg.alpha > 0.0, ErrorKind::Usage, "--alpha must be positive");
  }
  if (auto w = s.get("layer-window")) cfg.layer_window = LayerWindow::parse(*w);
  if (auto m = s.get("seq-prob")) {
    if (*m == "length_normalized") {
      cfg.sequence_prob_mode = SequenceProbMode::LengthNormalized;
    } else if (*m == "raw") {
      cfg.sequence_prob_mode = SequenceProbMode::Raw;
    } else {
      fail(ErrorKind::Usage, "--seq-prob: expected length_normalized or raw, got '" + *m + "'");
    }
  }
  for (const auto& item : s.list("direction")) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, ErrorKind::Usage, "--direction: expected METRIC=higher|lower, got '" + item + "'");
    cfg.direction_overrides[item.substr(0, eq)] = parse_direction(item.substr(eq + 1));
  }
  return cfg;
}

std::vector<MetricScore> load_scores(Run& run, const Settings& s) {
  std::vector<MetricScore> scores;
  const auto models = s.list("models");
  const auto metrics = s.list("metrics");
  for (const auto& path : s.list("scores")) {
    for (auto& sc : read_scores(run.input(path))) {
      if (!models.empty() && std::find(models.begin(), models.end(), sc.model_id) == models.end()) continue;
      if (!metrics.empty() && std::find(metrics.begin(), metrics.end(), sc.metric_name) == metrics.end()) continue;
      scores.push_back(std::move(sc));
    }
  }
  require(!scores.empty(), ErrorKind::InvalidInput, "no scores loaded (check --scores and filters)");
  return scores;
}

std::vector<ArchiveRecord> load_archives(Run& run, const Settings& s) {
  std::vector<ArchiveRecord> records;
  for (const auto& path : s.list("archive")) {
    auto part = read_archive(run.input(path));
    std::move(part.begin(), part.end(), std::back_inserter(records));
  }
  return records;
}

using Cell = std::pair<std::string, std::string>;  // (model_id, metric_name)

std::map<Cell, std::vector<const MetricScore*>> by_cell(std::span<const MetricScore> scores) {
  std::map<Cell, std::vector<const MetricScore*>> cells;
  for (const auto& s : scores) cells[{s.model_id, s.metric_name}].push_back(&s);
  return cells;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard guard(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

// ---- generate -------------------------------------------------------------

void cmd_generate(Run& run) {
  const auto& s = run.settings;
  const std::uint64_t seed = s.uint("seed");
  run.seeds["seed"] = seed;
  TemplateBank bank = TemplateBank::defaults();
  if (auto path = s.get("bank")) bank = load_template_bank(run.input(*path));

  const std::string dataset = s.str("dataset");
  BenchSet set;
  if (dataset == "all") {
    require(!s.get("n") && !s.get("sets"), ErrorKind::Usage, "generate: use --counts with --dataset all");
    BenchCounts counts;
    if (auto c = s.get("counts")) {
      const auto parts = split_list(*c);
      require(parts.size() == 6, ErrorKind::Usage,
              "--counts: expected six values complement,factualqa,random_choice,subset,union,intersection");
      std::array<std::size_t, 6> v{};
      for (std::size_t i = 0; i < 6; ++i) {
        const auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), v[i]);
        require(ec == std::errc() && ptr == parts[i].data() + parts[i].size(), ErrorKind::Usage,
                "--counts: bad value '" + parts[i] + "'");
      }
      counts = {v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    for (Dataset d : {Dataset::Complement, Dataset::FactualQA, Dataset::RandomChoice, Dataset::Subset, Dataset::Union,
                      Dataset::Intersection}) {
      run.seeds[std::string(to_string(d))] = dataset_seed(seed, d);
    }
    set = generate_all(counts, seed, bank);
  } else {
    const Dataset d = parse_dataset(dataset);
    require(d != Dataset::External, ErrorKind::Usage, "generate: 'external' is not a generated dataset");
    require(!(s.get("n") && s.get("sets")), ErrorKind::Usage, "generate: give --n or --sets, not both");
    const BenchCounts defaults;
    std::size_t count = 0;
    switch (d) {
      case Dataset::Complement: count = defaults.complement; break;
      case Dataset::FactualQA: count = defaults.factualqa; break;
      case Dataset::RandomChoice: count = defaults.random_choice; break;
      case Dataset::Subset: count = defaults.subset_sets; break;
      case Dataset::Union: count = defaults.union_sets; break;
      case Dataset::Intersection: count = defaults.intersection_sets; break;
      case Dataset::External: break;
    }
    if (s.get("n")) count = s.uint("n");
    if (s.get("sets")) count = s.uint("sets");
    run.seeds[std::string(to_string(d))] = dataset_seed(seed, d);
    set = generate_dataset(d, count, seed, bank);
  }

  write_prompts(run.output("prompts.jsonl"), set.prompts);
  write_pairs(run.output("pairs.jsonl"), set.pairs);

  std::map<std::string, std::pair<std::size_t, std::size_t>> per;
  for (const auto& p : set.prompts) ++per[std::string(to_string(p.dataset))].first;
  for (const auto& p : set.pairs) ++per[std::string(to_string(p.dataset))].second;
  for (const auto& [name, c] : per) {
    run.summary["datasets"][name] = {{"prompts", c.first}, {"pairs", c.second}};
    run.log << pad(name, 14) << c.first << " prompts, " << c.second << " pairs\n";
  }
  run.summary["prompts"] = set.prompts.size();
  run.summary["pairs"] = set.pairs.size();
  run.log << "total         " << set.prompts.size() << " prompts, " << set.pairs.size() << " pairs\n";
}

// ---- collect --------------------------------------------------------------

HttpProviderConfig provider_config(const Settings& s, const std::string& endpoint) {
  HttpProviderConfig cfg;
  cfg.endpoint = endpoint;
  cfg.bearer_token = s.str("token");
  if (s.get("timeout")) cfg.timeout = std::chrono::seconds(s.uint("timeout"));
  if (s.get("retries")) cfg.retry.max_attempts = static_cast<int>(std::max<std::uint64_t>(1, s.uint("retries")));
  if (s.get("retry-delay-ms")) cfg.retry.base_delay = std::chrono::milliseconds(s.uint("retry-delay-ms"));
  return cfg;
}

void cmd_collect(Run& run) {
  const auto& s = run.settings;
  auto prompts = read_prompts(run.input(s.str("prompts")));
  if (auto pairs_path = s.get("pairs")) {
    std::set<std::string> wanted;
    for (const auto& p : read_pairs(run.input(*pairs_path))) {
      wanted.insert(p.larger_id);
      wanted.insert(p.smaller_id);
    }
    std::set<std::string> known;
    for (const auto& p : prompts) known.insert(p.id);
    for (const auto& id : wanted) {
      require(known.contains(id), ErrorKind::InvalidInput, "pair file references unknown prompt '" + id + "'");
    }
    std::erase_if(prompts, [&](const Prompt& p) { return !wanted.contains(p.id); });
  }

  CollectOptions opt;
  opt.params.model_id = s.str("model");
  opt.params.temperature = s.real("temperature");
  opt.params.top_k = static_cast<int>(s.uint("top-k"));
  opt.params.k = s.uint("k");
  opt.params.max_tokens = s.uint("max-tokens");
  opt.params.validate();
  opt.concurrency = s.uint("concurrency");
  opt.want_layers = s.boolean("layers");
  opt.want_logsumexp = s.boolean("logsumexp");
  opt.embed = s.boolean("embed");
  opt.required_metrics = s.list("metrics");
  for (const auto& m : opt.required_metrics) {
    require(is_metric_name(m), ErrorKind::Usage, "--metrics: unknown metric '" + m + "'");
  }

  HttpProvider provider(provider_config(s, s.str("endpoint")));
  std::optional<HttpProvider> embedder;
  if (auto e = s.get("embed-endpoint")) {
    embedder.emplace(provider_config(s, *e));
    opt.embedder = &*embedder;
  }

  const fs::path archive_path = run.output(s.str("archive-name"));
  std::vector<ArchiveRecord> cached;
  if (fs::exists(archive_path)) cached = read_archive(archive_path);
  const std::size_t resumed_from = cached.size();

  std::map<std::string, ArchiveRecord> done;
  std::vector<CollectError> errors;
  std::size_t hits = 0, calls = 0;
  const std::size_t chunk = std::max<std::uint64_t>(1, s.uint("checkpoint"));
  auto snapshot = [&](std::size_t processed) {
    std::vector<ArchiveRecord> out;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (auto it = done.find(prompts[i].id); it != done.end()) {
        out.push_back(it->second);
      } else if (i >= processed) {
        for (const auto& c : cached) {
          if (c.prompt_id == prompts[i].id) {
            out.push_back(c);
            break;
          }
        }
      }
    }
    write_archive(out, archive_path);
    return out.size();
  };
  for (std::size_t begin = 0; begin < prompts.size(); begin += chunk) {
    const std::size_t end = std::min(prompts.size(), begin + chunk);
    auto result =
        collect_samples(std::span<const Prompt>(prompts).subspan(begin, end - begin), opt, provider, cached);
    for (auto& r : result.records) done[r.prompt_id] = std::move(r);
    std::move(result.errors.begin(), result.errors.end(), std::back_inserter(errors));
    hits += result.cache_hits;
    calls += result.provider_calls;
    snapshot(end);
    run.log << "collected " << done.size() << "/" << prompts.size() << " prompts\n";
  }
  const std::size_t written = snapshot(prompts.size());

  LineWriter err_out(run.output("collect_errors.jsonl"));
  for (const auto& e : errors) {
    err_out.write_line(
        json{{"prompt_id", e.prompt_id}, {"kind", std::string(to_string(e.kind))}, {"message", e.message}}.dump());
  }
  err_out.commit();

  run.summary = {{"records", written},     {"cache_hits", hits}, {"provider_calls", calls},
                 {"errors", errors.size()}, {"resumed_records", resumed_from}};
  run.log << "records " << written << ", cache hits " << hits << ", provider calls " << calls << ", errors "
          << errors.size() << "\n";
  if (!errors.empty()) {
    fail(errors.front().kind, std::to_string(errors.size()) + " prompt(s) failed; first (" + errors.front().prompt_id +
                                  "): " + errors.front().message);
  }
}

// ---- score ----------------------------------------------------------------

void cmd_score(Run& run) {
  const auto& s = run.settings;
  const MetricConfig cfg = metric_config(s);

  std::unique_ptr<EntailmentOracle> oracle;
  std::optional<HttpProvider> entail_provider;
  if (auto ep = s.get("entail-endpoint")) {
    entail_provider.emplace(provider_config(s, *ep));
    oracle = std::make_unique<ProviderEntailmentOracle>(*entail_provider);
  } else {
    const std::string mode = s.str("entailment");
    if (mode == "exact") {
      oracle = std::make_unique<ExactMatchOracle>();
    } else {
      require(mode == "none", ErrorKind::Usage, "--entailment: expected none or exact, got '" + mode + "'");
    }
  }

  std::vector<std::string> metrics;
  for (const auto& m : s.list("metrics")) {
    if (m == "all") {
      for (auto name : metric_names()) {
        if (name == metric::kSemanticEntropy && !oracle) {
          run.log << "note: semantic_entropy skipped (no entailment source)\n";
          continue;
        }
        metrics.emplace_back(name);
      }
    } else {
      require(is_metric_name(m), ErrorKind::Usage, "--metrics: unknown metric '" + m + "'");
      metrics.push_back(m);
    }
  }
  require(!metrics.empty(), ErrorKind::Usage, "--metrics: nothing to compute");
  const auto records = load_archives(run, s);

  struct Outcome {
    std::vector<MetricScore> scores;
    std::vector<json> errors;
  };
  std::vector<Outcome> outcomes(records.size());
  const bool needs_oracle = std::find(metrics.begin(), metrics.end(), metric::kSemanticEntropy) != metrics.end();
  const std::size_t workers = needs_oracle && oracle && !oracle->concurrent_safe() ? 1 : s.uint("concurrency");
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const SampleSet set = records[i].sample_set();
    for (const auto& m : metrics) {
      try {
        outcomes[i].scores.push_back(compute_metric(m, set, cfg, oracle.get()));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Transport || e.kind() == ErrorKind::Protocol) throw;
        outcomes[i].errors.push_back({{"prompt_id", set.prompt_id},
                                      {"model_id", set.model_id},
                                      {"metric_name", m},
                                      {"kind", std::string(to_string(e.kind()))},
                                      {"message", e.what()}});
      }
    }
  });

  std::vector<MetricScore> scores;
  LineWriter err_out(run.output("score_errors.jsonl"));
  std::map<std::string, std::size_t> error_count;
  for (auto& o : outcomes) {
    std::move(o.scores.begin(), o.scores.end(), std::back_inserter(scores));
    for (const auto& e : o.errors) {
      err_out.write_line(e.dump());
      ++error_count[e.at("metric_name").get<std::string>()];
    }
  }
  write_scores(run.output("scores.jsonl"), scores);
  err_out.commit();

  run.summary = {{"records", records.size()}, {"scores", scores.size()}, {"errors", error_count}};
  run.log << "scored " << records.size() << " records: " << scores.size() << " scores\n";
  for (const auto& [m, n] : error_count) run.log << "  " << m << ": " << n << " prompt(s) unscored\n";
}

// ---- eval -----------------------------------------------------------------

void cmd_eval(Run& run) {
  const auto& s = run.settings;
  const MetricConfig cfg = metric_config(s);
  const auto scores = load_scores(run, s);
  std::vector<PromptPair> pairs;
  for (const auto& path : s.list("pairs")) {
    auto part = read_pairs(run.input(path));
    std::move(part.begin(), part.end(), std::back_inserter(pairs));
  }
  const auto reports = evaluate_all(scores, pairs, cfg);

  json jr = json::array();
  std::ostringstream txt;
  std::ostringstream tsv;
  tsv << "model_id\tmetric_name\tdataset\tn_pairs\tn_correct\tn_ties\taccuracy\tci_halfwidth\n";
  LineWriter excl(run.output("exclusions.jsonl"));
  std::set<std::string> models, metric_set;
  for (const auto& r : reports) {
    models.insert(r.model_id);
    metric_set.insert(r.metric_name);
    json cells = json::array();
    for (const auto& d : r.datasets) {
      cells.push_back({{"dataset", d.dataset},
                       {"n_pairs", d.n_pairs},
                       {"n_correct", d.n_correct},
                       {"n_ties", d.n_ties},
                       {"accuracy", d.accuracy},
                       {"ci_halfwidth", d.ci_halfwidth}});
      tsv << r.model_id << '\t' << r.metric_name << '\t' << d.dataset << '\t' << d.n_pairs << '\t' << d.n_correct
          << '\t' << d.n_ties << '\t' << d.accuracy << '\t' << d.ci_halfwidth << '\n';
    }
    jr.push_back({{"model_id", r.model_id},
                  {"metric_name", r.metric_name},
                  {"direction", std::string(to_string(r.direction))},
                  {"datasets", cells},
                  {"macro_average", r.macro_average ? json(*r.macro_average) : json(nullptr)},
                  {"n_exclusions", r.exclusions.size()}});
    for (const auto& e : r.exclusions) {
      excl.write_line(json{{"model_id", r.model_id},
                           {"metric_name", r.metric_name},
                           {"larger_id", e.larger_id},
                           {"smaller_id", e.smaller_id},
                           {"dataset", e.dataset},
                           {"missing_prompt_id", e.missing_prompt_id}}
                          .dump());
    }
  }
  excl.commit();

  json best_metric_j = json::object(), best_model_j = json::object();
  auto selection_json = [](const Selection& sel) {
    return json{{"winner", sel.winner}, {"macro_average", sel.macro_average}, {"tie", sel.tie()},
                {"tied_with", sel.tied_with}};
  };
  for (const auto& m : models) {
    try {
      best_metric_j[m] = selection_json(best_metric(reports, m));
    } catch (const Error&) {
    }
  }
  for (const auto& m : metric_set) {
    try {
      best_model_j[m] = selection_json(best_model(reports, m));
    } catch (const Error&) {
    }
  }

  // Human-readable table, one block per model.
  for (const auto& model : models) {
    std::vector<std::string> datasets;
    for (const auto& r : reports) {
      if (r.model_id != model) continue;
      for (const auto& d : r.datasets) {
        if (std::find(datasets.begin(), datasets.end(), d.dataset) == datasets.end()) datasets.push_back(d.dataset);
      }
    }
    std::stable_sort(datasets.begin(), datasets.end(), [](const std::string& a, const std::string& b) {
      auto rank = [](const std::string& n) {
        try {
          return static_cast<int>(parse_dataset(n));
        } catch (const Error&) {
          return 99;
        }
      };
      return rank(a) < rank(b);
    });
    txt << "model: " << model << "\n" << pad("metric", 22);
    for (const auto& d : datasets) txt << pad(d, 16);
    txt << "macro\n";
    for (const auto& r : reports) {
      if (r.model_id != model) continue;
      txt << pad(r.metric_name + (r.direction == Direction::HigherIsLarger ? " (+)" : " (-)"), 22);
      for (const auto& name : datasets) {
        auto it = std::find_if(r.datasets.begin(), r.datasets.end(), [&](const auto& d) { return d.dataset == name; });
        txt << pad(it == r.datasets.end() ? "-" : fixed(it->accuracy, 3) + " +- " + fixed(it->ci_halfwidth, 3), 16);
      }
      txt << (r.macro_average ? fixed(*r.macro_average, 3) : "-");
      if (!r.exclusions.empty()) txt << "  (" << r.exclusions.size() << " excluded)";
      txt << "\n";
    }
    if (best_metric_j.contains(model)) {
      txt << "best metric: " << best_metric_j[model]["winner"].get<std::string>();
      if (best_metric_j[model]["tie"].get<bool>()) txt << " (tie, lexicographic)";
      txt << "\n";
    }
    txt << "\n";
  }
  for (const auto& [metric_name, sel] : best_model_j.items()) {
    txt << "best model for " << metric_name << ": " << sel["winner"].get<std::string>()
        << (sel["tie"].get<bool>() ? " (tie, lexicographic)" : "") << "\n";
  }

  write_json(run.output("accuracy.json"), {{"reports", jr}, {"best_metric", best_metric_j}, {"best_model", best_model_j}});
  write_text(run.output("accuracy.txt"), txt.str());
  write_text(run.output("accuracy.tsv"), tsv.str());
  run.summary = {{"reports", reports.size()}, {"pairs", pairs.size()}};
  run.log << txt.str();
}

// ---- ttest / corr / classify ---------------------------------------------

std::map<std::string, int> load_label_map(Run& run, const Settings& s) {
  std::map<std::string, int> labels;
  for (const auto& l : read_labels(run.input(s.str("labels")))) {
    const bool fresh = labels.emplace(l.prompt_id, l.label).second;
    require(fresh, ErrorKind::InvalidInput, "duplicate label for prompt '" + l.prompt_id + "'");
  }
  return labels;
}

void cmd_ttest(Run& run) {
  const auto& s = run.settings;
  const MetricConfig cfg = metric_config(s);
  const auto scores = load_scores(run, s);
  const auto labels = load_label_map(run, s);
  json rows = json::array();
  std::ostringstream txt, tsv;
  txt << pad("model", 18) << pad("metric", 22) << pad("mean(1)", 18) << pad("mean(0)", 18) << pad("t", 10)
      << pad("df", 10) << pad("p", 12) << "sig\n";
  tsv << "model_id\tmetric_name\tn_1\tn_0\tmean_1\tmean_0\tt\tdf\tp\tstars\tdirection_correct\n";
  for (const auto& [cell, members] : by_cell(scores)) {
    std::vector<double> a, b;
    std::size_t unlabeled = 0;
    for (const auto* m : members) {
      const auto it = labels.find(m->prompt_id);
      if (it == labels.end()) {
        ++unlabeled;
      } else {
        (it->second == 1 ? a : b).push_back(m->value);
      }
    }
    json row = {{"model_id", cell.first}, {"metric_name", cell.second}, {"unlabeled", unlabeled}};
    std::vector<double> all;
    std::vector<std::string> groups;
    for (double v : a) all.push_back(v), groups.emplace_back("1");
    for (double v : b) all.push_back(v), groups.emplace_back("0");
    const std::vector<std::string> expected = {"1", "0"};
    const auto summary = group_summary(all, groups, expected);
    for (const auto& g : summary.groups) row["groups"][g.group] = {{"n", g.n}, {"mean", g.mean}, {"ci_halfwidth", g.ci_halfwidth}};
    row["notes"] = summary.notes;
    try {
      const auto r = welch_t_test(a, b, cfg.direction_for(cell.second));
      row.update({{"t", r.t_statistic},
                  {"df", r.degrees_of_freedom},
                  {"p", r.p_value},
                  {"stars", std::string(to_string(r.stars))},
                  {"direction_correct", r.direction_correct}});
      auto mean_ci = [&](const std::string& g) {
        for (const auto& x : summary.groups)
          if (x.group == g) return fixed(x.mean, 3) + " +- " + fixed(x.ci_halfwidth, 3);
        return std::string("-");
      };
      txt << pad(cell.first, 18) << pad(cell.second, 22) << pad(mean_ci("1"), 18) << pad(mean_ci("0"), 18)
          << pad(fixed(r.t_statistic, 3), 10) << pad(fixed(r.degrees_of_freedom, 1), 10)
          << pad(fixed(r.p_value, 5), 12) << to_string(r.stars) << (r.direction_correct ? "" : " (wrong direction)")
          << "\n";
      tsv << cell.first << '\t' << cell.second << '\t' << a.size() << '\t' << b.size() << '\t' << r.mean_a << '\t'
          << r.mean_b << '\t' << r.t_statistic << '\t' << r.degrees_of_freedom << '\t' << r.p_value << '\t'
          << to_string(r.stars) << '\t' << (r.direction_correct ? "true" : "false") << '\n';
    } catch (const Error& e) {
      row["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
      txt << pad(cell.first, 18) << pad(cell.second, 22) << "error: " << e.what() << "\n";
    }
    rows.push_back(std::move(row));
  }
  write_json(run.output("ttest.json"), {{"results", rows}});
  write_text(run.output("ttest.txt"), txt.str());
  write_text(run.output("ttest.tsv"), tsv.str());
  run.summary = {{"cells", rows.size()}};
  run.log << txt.str();
}

void cmd_corr(Run& run) {
  const auto& s = run.settings;
  const auto scores = load_scores(run, s);
  std::map<std::string, double> tokens;
  for (const auto& t : read_token_counts(run.input(s.str("token-counts")))) tokens[t.prompt_id] = t.reasoning_token_count;
  json rows = json::array();
  std::ostringstream txt, tsv, points;
  txt << pad("model", 18) << pad("metric", 22) << pad("n", 8) << pad("r", 10) << "p\n";
  tsv << "model_id\tmetric_name\tn\tr\tp\n";
  points << "model_id\tmetric_name\tprompt_id\treasoning_token_count\tvalue\n";
  for (const auto& [cell, members] : by_cell(scores)) {
    std::vector<double> x, y;
    for (const auto* m : members) {
      const auto it = tokens.find(m->prompt_id);
      if (it == tokens.end()) continue;
      x.push_back(it->second);
      y.push_back(m->value);
      points << cell.first << '\t' << cell.second << '\t' << m->prompt_id << '\t' << it->second << '\t' << m->value
             << '\n';
    }
    json row = {{"model_id", cell.first}, {"metric_name", cell.second}, {"missing", members.size() - x.size()}};
    try {
      const auto r = pearson_r(x, y);
      row.update({{"n", r.n}, {"r", r.r}, {"t", r.t_statistic}, {"p", r.p_value}});
      txt << pad(cell.first, 18) << pad(cell.second, 22) << pad(std::to_string(r.n), 8) << pad(fixed(r.r, 3), 10)
          << fixed(r.p_value, 5) << "\n";
      tsv << cell.first << '\t' << cell.second << '\t' << r.n << '\t' << r.r << '\t' << r.p_value << '\n';
    } catch (const Error& e) {
      row["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
      txt << pad(cell.first, 18) << pad(cell.second, 22) << "error: " << e.what() << "\n";
    }
    rows.push_back(std::move(row));
  }
  write_json(run.output("corr.json"), {{"results", rows}});
  write_text(run.output("corr.txt"), txt.str());
  write_text(run.output("corr.tsv"), tsv.str());
  write_text(run.output("corr_points.tsv"), points.str());
  run.summary = {{"cells", rows.size()}};
  run.log << txt.str();
}

void cmd_classify(Run& run) {
  const auto& s = run.settings;
  const MetricConfig cfg = metric_config(s);
  const auto scores = load_scores(run, s);
  const auto labels = load_label_map(run, s);
  const bool has_threshold = s.get("threshold").has_value();
  const double fixed_threshold = has_threshold ? s.real("threshold") : 0.0;
  json rows = json::array();
  std::ostringstream txt, tsv;
  txt << pad("model", 18) << pad("metric", 22) << pad("threshold", 12) << pad("acc", 8) << pad("macro-F1", 10)
      << "AUC\n";
  tsv << "model_id\tmetric_name\tthreshold\tn\taccuracy\tmacro_f1\tauc\n";
  for (const auto& [cell, members] : by_cell(scores)) {
    // Lower-is-larger metrics are negated so that "score > threshold" always predicts label 1.
    const double sign = cfg.direction_for(cell.second) == Direction::HigherIsLarger ? 1.0 : -1.0;
    std::vector<double> x;
    std::vector<int> y;
    for (const auto* m : members) {
      if (auto it = labels.find(m->prompt_id); it != labels.end()) {
        x.push_back(sign * m->value);
        y.push_back(it->second);
      }
    }
    json row = {{"model_id", cell.first}, {"metric_name", cell.second}, {"unlabeled", members.size() - x.size()}};
    try {
      require(!x.empty(), ErrorKind::InvalidInput, "no labeled scores");
      double threshold = 0.0;
      if (has_threshold) {
        threshold = sign * fixed_threshold;
      } else {
        for (double v : x) threshold += v;
        threshold /= static_cast<double>(x.size());
      }
      const auto r = binary_threshold_eval(x, y, threshold);
      row.update({{"threshold", sign * r.threshold},
                  {"n", r.n},
                  {"accuracy", r.accuracy},
                  {"macro_f1", r.macro_f1},
                  {"auc", r.auc}});
      txt << pad(cell.first, 18) << pad(cell.second, 22) << pad(fixed(sign * r.threshold, 4), 12)
          << pad(fixed(r.accuracy, 3), 8) << pad(fixed(r.macro_f1, 3), 10) << fixed(r.auc, 3) << "\n";
      tsv << cell.first << '\t' << cell.second << '\t' << sign * r.threshold << '\t' << r.n << '\t' << r.accuracy
          << '\t' << r.macro_f1 << '\t' << r.auc << '\n';
    } catch (const Error& e) {
      row["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
      txt << pad(cell.first, 18) << pad(cell.second, 22) << "error: " << e.what() << "\n";
    }
    rows.push_back(std::move(row));
  }
  write_json(run.output("classify.json"), {{"results", rows}});
  write_text(run.output("classify.txt"), txt.str());
  write_text(run.output("classify.tsv"), tsv.str());
  run.summary = {{"cells", rows.size()}};
  run.log << txt.str();
}

// ---- loo / pairs-build ----------------------------------------------------

void cmd_loo(Run& run) {
  const auto& s = run.settings;
  const MetricConfig cfg = metric_config(s);
  const EmbeddingSource source = parse_embedding_source(s.str("source"));
  std::vector<LooResult> results;
  std::map<std::string, std::vector<std::string>> texts;
  std::vector<json> errors;

  if (auto raw = s.get("raw")) {
    require(!s.get("archive"), ErrorKind::Usage, "loo: give --archive or --raw, not both");
    std::vector<std::string> order;
    std::map<std::string, std::map<std::size_t, double>> values;
    for (const auto& v : read_loo_values(run.input(*raw))) {
      if (!values.contains(v.prompt_id)) order.push_back(v.prompt_id);
      const bool fresh = values[v.prompt_id].emplace(v.response_index, v.looe).second;
      require(fresh, ErrorKind::InvalidInput,
              "duplicate LOOE for " + v.prompt_id + "#" + std::to_string(v.response_index));
    }
    for (const auto& id : order) {
      std::vector<double> looe;
      std::vector<std::size_t> idx;
      for (const auto& [i, v] : values[id]) idx.push_back(i), looe.push_back(v);
      auto r = make_loo_result(id, looe);
      for (std::size_t n = 0; n < idx.size(); ++n) r.entries[n].response_index = idx[n];
      results.push_back(std::move(r));
    }
  } else {
    require(s.get("archive").has_value(), ErrorKind::Usage, "loo: --archive or --raw is required");
    for (const auto& rec : load_archives(run, s)) {
      const SampleSet set = rec.sample_set();
      try {
        const auto looe = loo_values(set, cfg, source);
        results.push_back(make_loo_result(set.prompt_id, looe));
        for (const auto& smp : set.samples) texts[set.prompt_id].push_back(smp.text);
      } catch (const Error& e) {
        errors.push_back({{"prompt_id", set.prompt_id},
                          {"kind", std::string(to_string(e.kind()))},
                          {"message", e.what()}});
      }
    }
  }

  LineWriter jl(run.output("loo.jsonl"));
  std::ostringstream txt;
  for (const auto& r : results) {
    json entries = json::array();
    txt << "prompt: " << r.prompt_id << "\n" << pad("  #", 6) << pad("LOOE", 10) << pad("normalized", 12) << "response\n";
    for (const auto& e : r.entries) {
      entries.push_back({{"response_index", e.response_index}, {"looe", e.looe}, {"normalized", e.normalized}});
      std::string snippet;
      if (auto it = texts.find(r.prompt_id); it != texts.end() && e.response_index < it->second.size()) {
        snippet = it->second[e.response_index].substr(0, 60);
        std::replace(snippet.begin(), snippet.end(), '\n', ' ');
      }
      txt << pad("  " + std::to_string(e.response_index), 6) << pad(fixed(e.looe, 3), 10)
          << pad(fixed(e.normalized, 2), 12) << snippet << "\n";
    }
    jl.write_line(json{{"prompt_id", r.prompt_id}, {"entries", entries}}.dump());
    txt << "\n";
  }
  jl.commit();
  LineWriter err_out(run.output("loo_errors.jsonl"));
  for (const auto& e : errors) err_out.write_line(e.dump());
  err_out.commit();
  write_text(run.output("loo.txt"), txt.str());
  run.summary = {{"prompts", results.size()}, {"errors", errors.size()}};
  run.log << txt.str();
  if (!errors.empty()) run.log << errors.size() << " prompt(s) without LOOE; see loo_errors.jsonl\n";
}

void cmd_pairs_build(Run& run) {
  const auto& s = run.settings;
  const MetricConfig cfg = metric_config(s);
  PairBuildConfig pc;
  pc.quality_fraction = s.real("fraction");
  pc.diversity_metric = parse_diversity_metric(s.str("diversity"));
  pc.pool_mode = parse_pool_mode(s.str("pool"));
  pc.embedding_source = parse_embedding_source(s.str("source"));
  pc.validate();

  std::vector<SampleSet> sets;
  for (const auto& rec : load_archives(run, s)) sets.push_back(rec.sample_set());
  const auto rewards = read_rewards(run.input(s.str("rewards")));
  std::map<std::string, std::string> prompt_text;
  if (auto p = s.get("prompts")) {
    for (const auto& pr : read_prompts(run.input(*p))) prompt_text[pr.id] = pr.text;
  }
  const auto outcome = build_preference_pairs(sets, rewards, pc, cfg);

  LineWriter out(run.output("preference_pairs.jsonl"));
  for (const auto& p : outcome.pairs) {
    json j = {{"prompt_id", p.prompt_id}};
    if (auto it = prompt_text.find(p.prompt_id); it != prompt_text.end()) j["prompt"] = it->second;
    j.update({{"chosen", p.chosen},
              {"rejected", p.rejected},
              {"chosen_index", p.chosen_index},
              {"rejected_index", p.rejected_index},
              {"chosen_reward", p.chosen_reward},
              {"rejected_reward", p.rejected_reward},
              {"chosen_diversity", p.chosen_diversity},
              {"rejected_diversity", p.rejected_diversity}});
    out.write_line(j.dump());
  }
  out.commit();
  LineWriter skipped(run.output("skipped.jsonl"));
  std::map<std::string, std::size_t> reasons;
  for (const auto& sk : outcome.skipped) {
    skipped.write_line(json{{"prompt_id", sk.prompt_id}, {"reason", sk.reason}, {"detail", sk.detail}}.dump());
    ++reasons[sk.reason];
  }
  skipped.commit();
  run.summary = {{"pairs", outcome.pairs.size()}, {"skipped", reasons}};
  run.log << "preference pairs " << outcome.pairs.size() << ", skipped " << outcome.skipped.size() << "\n";
  for (const auto& [reason, n] : reasons) run.log << "  " << reason << ": " << n << "\n";
}

// ---- command table --------------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  void (*body)(Run&);
};

std::vector<OptionSpec> with_out(std::vector<OptionSpec> specs) {
  specs.push_back({"out", "output directory", "", false, true});
  return specs;
}

const std::vector<OptionSpec>& metric_options() {
  static const std::vector<OptionSpec> specs = {
      {"alpha", "EigenScore regularizer", "0.001"},
      {"layer-window", "layer window FIRST:LAST or FRACTION[:END_OFFSET]", "0.65:2"},
      {"seq-prob", "sequence weights for semantic entropy: length_normalized or raw", "length_normalized"},
      {"direction", "direction overrides METRIC=higher|lower,..."},
  };
  return specs;
}

std::vector<OptionSpec> concat(std::vector<OptionSpec> a, const std::vector<OptionSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<OptionSpec>& transport_options() {
  static const std::vector<OptionSpec> specs = {
      {"token", "bearer token for the endpoint", "", false, false, true},
      {"timeout", "request timeout in seconds", "120"},
      {"retries", "attempts per request", "4"},
      {"retry-delay-ms", "base backoff delay in milliseconds", "200"},
  };
  return specs;
}

std::vector<Command> commands() {
  const OptionSpec scores_opt{"scores", "score files (comma separated)", "", false, true};
  const OptionSpec models_opt{"models", "only these model ids"};
  const OptionSpec metrics_filter{"metrics", "only these metrics"};
  return {
      {"generate",
       "Generate benchmark prompts and ordered pairs",
       with_out({{"dataset", "all or one of complement, factualqa, random_choice, subset, union, intersection", "all"},
                 {"n", "prompt pairs for complement, factualqa, random_choice"},
                 {"sets", "sets for subset, union, intersection"},
                 {"counts", "six counts for --dataset all"},
                 {"seed", "generator seed", "0"},
                 {"bank", "template bank JSON overriding the built-in banks"}}),
       cmd_generate},
      {"collect",
       "Sample responses from a /v1 endpoint into an archive",
       with_out(concat({{"prompts", "prompt file", "", false, true},
                        {"pairs", "restrict to prompts referenced by this pair file"},
                        {"endpoint", "provider base URL, e.g. http://127.0.0.1:8000", "", false, true},
                        {"embed-endpoint", "separate provider for /v1/embed"},
                        {"model", "model id recorded in the archive", "default"},
                        {"k", "samples per prompt", "10"},
                        {"temperature", "sampling temperature", "1"},
                        {"top-k", "top-k sampling cutoff", "10"},
                        {"max-tokens", "generation length cap", "256"},
                        {"layers", "request layer statistics", "true"},
                        {"logsumexp", "request per-token logsumexp", "true"},
                        {"embed", "fill external embeddings through /v1/embed", "", true},
                        {"metrics", "metrics the archive must support (validation)"},
                        {"concurrency", "parallel requests", "4"},
                        {"checkpoint", "prompts per archive checkpoint", "100"},
                        {"archive-name", "archive file name inside --out", "archive.jsonl"}},
                       transport_options())),
       cmd_collect},
      {"score",
       "Compute metrics over archived samples",
       with_out(concat(concat({{"archive", "archive files (comma separated)", "", false, true},
                               {"metrics", "metric names or all", "all"},
                               {"entailment", "entailment source without an endpoint: none or exact", "none"},
                               {"entail-endpoint", "provider base URL for /v1/entail"},
                               {"concurrency", "worker threads", "4"}},
                              metric_options()),
                       transport_options())),
       cmd_score},
      {"eval",
       "Pairwise accuracy of every (model, metric) over ordered pairs",
       with_out(concat({scores_opt, {"pairs", "pair files (comma separated)", "", false, true}, models_opt,
                        metrics_filter},
                       metric_options())),
       cmd_eval},
      {"ttest",
       "Welch t-tests between label-1 and label-0 prompts",
       with_out(concat({scores_opt, {"labels", "label file {prompt_id, label}", "", false, true}, models_opt,
                        metrics_filter},
                       metric_options())),
       cmd_ttest},
      {"corr",
       "Pearson correlation between metric values and reasoning token counts",
       with_out({scores_opt,
                 {"token-counts", "token count file {prompt_id, reasoning_token_count}", "", false, true},
                 models_opt,
                 metrics_filter}),
       cmd_corr},
      {"classify",
       "Threshold classifier accuracy, macro-F1 and AUC",
       with_out(concat({scores_opt,
                        {"labels", "label file {prompt_id, label}", "", false, true},
                        {"threshold", "decision threshold (default: mean score per metric)"},
                        models_opt,
                        metrics_filter},
                       metric_options())),
       cmd_classify},
      {"loo",
       "Leave-one-out EigenScore per response with min-max normalization",
       with_out(concat({{"archive", "archive files (comma separated)"},
                        {"raw", "precomputed values {prompt_id, response_index, looe}"},
                        {"source", "embedding source: average, original or output", "average"}},
                       metric_options())),
       cmd_loo},
      {"pairs-build",
       "Select chosen/rejected preference pairs by reward band and diversity",
       with_out(concat({{"archive", "archive files (comma separated)", "", false, true},
                        {"rewards", "reward file {prompt_id, response_index, reward}", "", false, true},
                        {"prompts", "prompt file for prompt text in the output"},
                        {"fraction", "quality fraction p in (0, 1]", "0.5"},
                        {"diversity", "loo_eigenscore, mean_embedding_distance or negative_log_likelihood",
                         "loo_eigenscore"},
                        {"pool", "pool rule: range or quantile", "range"},
                        {"source", "embedding source: average, original or output", "average"}},
                       metric_options())),
       cmd_pairs_build},
  };
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Configuration:
      return kExitUsage;
    case ErrorKind::InvalidInput:
    case ErrorKind::DataUnavailable:
    case ErrorKind::CorruptArchive:
      return kExitData;
    case ErrorKind::Transport:
    case ErrorKind::Protocol:
      return kExitTransport;
    case ErrorKind::Numeric:
    case ErrorKind::Singular:
    case ErrorKind::Degenerate:
      return kExitNumeric;
  }
  return kExitInternal;
}

int run(std::span<const std::string> args, const RunContext& ctx_in) {
  RunContext ctx = ctx_in;
  if (!ctx.getenv) {
    ctx.getenv = [](std::string_view name) -> std::optional<std::string> {
      const char* v = std::getenv(std::string(name).c_str());
      return v ? std::optional<std::string>(v) : std::nullopt;
    };
  }
  std::ostream& out = ctx.out ? *ctx.out : std::cout;
  std::ostream& err = ctx.err ? *ctx.err : std::cerr;

  CLI::App app{"Generation-space-size benchmark toolkit", "gss"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));
  std::string config_path;
  app.add_option("--config", config_path, "JSON settings file or a previous run's manifest.json");

  auto table = commands();
  std::vector<std::unique_ptr<Settings>> settings;
  std::vector<CLI::App*> subs;
  for (const auto& c : table) {
    auto* sub = app.add_subcommand(c.name, c.help);
    settings.push_back(std::make_unique<Settings>(c.name, c.options));
    settings.back()->bind(*sub);
    subs.push_back(sub);
  }

  std::vector<std::string> argv_store{"gss"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::size_t chosen = 0;
  while (chosen < subs.size() && !subs[chosen]->parsed()) ++chosen;
  if (chosen == subs.size()) return kExitUsage;
  const Command& command = table[chosen];
  Settings& s = *settings[chosen];

  std::unique_ptr<OutputLock> lock;
  std::optional<Run> run_state;
  json manifest;
  try {
    if (config_path.empty()) config_path = ctx.getenv("GSS_CONFIG").value_or("");
    s.resolve(ctx, load_config(config_path));
    const fs::path out_dir = s.str("out");
    lock = std::make_unique<OutputLock>(out_dir);
    run_state.emplace(Run{s, out_dir, out});
    manifest = {{"manifest_version", 1},
                {"tool", "gss"},
                {"tool_version", std::string(kToolVersion)},
                {"command", command.name},
                {"arguments", std::vector<std::string>(args.begin(), args.end())},
                {"config_file", config_path},
                {"config", s.snapshot()},
                {"started_at", utc_now()}};
    command.body(*run_state);
    manifest["status"] = "ok";
  } catch (const Error& e) {
    err << "gss " << command.name << ": " << to_string(e.kind()) << " error: " << e.what() << "\n";
    manifest["status"] = "failed";
    manifest["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
    if (run_state) {
      manifest.update({{"inputs", run_state->inputs}, {"outputs", run_state->outputs}, {"seeds", run_state->seeds},
                       {"finished_at", utc_now()}});
      try {
        write_json(run_state->out / "manifest.json", manifest);
      } catch (...) {
      }
    }
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "gss " << command.name << ": filesystem error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "gss " << command.name << ": internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  manifest.update({{"inputs", run_state->inputs},
                   {"outputs", run_state->outputs},
                   {"seeds", run_state->seeds},
                   {"summary", run_state->summary},
                   {"finished_at", utc_now()}});
  write_json(run_state->out / "manifest.json", manifest);
  return kExitOk;
}

}  // namespace gss::cli
