// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "gss/archive.hpp"
#include "gss/bench.hpp"
#include "gss/cli.hpp"
#include "gss/entailment.hpp"
#include "gss/evaluation.hpp"
#include "gss/linalg.hpp"
#include "gss/metrics.hpp"
#include "gss/records.hpp"
#include "gss/stats.hpp"
#include "oracles.hpp"

using namespace gss;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  [%2d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  std::ostringstream sink;
  cli::RunContext ctx;
  ctx.getenv = [](std::string_view) { return std::optional<std::string>(); };
  ctx.out = &sink;
  ctx.err = &sink;
  const int code = cli::run(args, ctx);
  if (code != 0) std::printf("      gss %s exited %d: %s\n", args[0].c_str(), code, sink.str().c_str());
  return code;
}

oracle::Mat to_rows(const MatrixXd& m) {
  oracle::Mat out(m.rows(), std::vector<double>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

void generator_totals() {
  const auto root = fixture::fresh_dir("acc_gen");
  const auto t0 = std::chrono::steady_clock::now();
  const bool ran = cli({"generate", "--seed", "0", "--out", (root / "a").string()}) == 0 &&
                   cli({"generate", "--seed", "0", "--out", (root / "b").string()}) == 0;
  const double elapsed = seconds_since(t0) / 2;
  if (!ran) {
    report(1, "generator totals", false, "generate failed");
    return;
  }
  std::map<Dataset, std::size_t> counts;
  const auto pairs = read_pairs(root / "a" / "pairs.jsonl");
  for (const auto& p : pairs) ++counts[p.dataset];
  const bool count_ok = pairs.size() == 9300 && counts[Dataset::Complement] == 500 &&
                        counts[Dataset::FactualQA] == 500 && counts[Dataset::RandomChoice] == 500 &&
                        counts[Dataset::Subset] == 1800 && counts[Dataset::Union] == 3000 &&
                        counts[Dataset::Intersection] == 3000;
  const bool same = slurp(root / "a" / "pairs.jsonl") == slurp(root / "b" / "pairs.jsonl") &&
                    slurp(root / "a" / "prompts.jsonl") == slurp(root / "b" / "prompts.jsonl");
  std::ostringstream d;
  d << pairs.size() << " pairs (" << counts[Dataset::Complement] << "/" << counts[Dataset::FactualQA] << "/"
    << counts[Dataset::RandomChoice] << "/" << counts[Dataset::Subset] << "/" << counts[Dataset::Union] << "/"
    << counts[Dataset::Intersection] << "), " << fmt("%.2f", elapsed) << " s per run, "
    << (same ? "byte-identical" : "outputs differ");
  report(1, "generator totals", count_ok && same && elapsed < 10.0, d.str());
  fs::remove_all(root);
}

void lattice() {
  auto got = enumerate_strict_subset_pairs(4);
  auto want = oracle::lattice(4);
  std::sort(want.begin(), want.end());
  bool reversed = true;
  const auto u = gen_union(1, 0);
  const auto x = gen_intersection(1, 0);
  std::map<std::string, std::uint32_t> mask;
  for (const auto* b : {&u, &x})
    for (const auto& p : b->prompts) {
      std::uint32_t m = 0;
      for (char c : p.meta.at("mask")) m |= 1u << (c - 'A');
      mask[p.id] = m;
    }
  std::set<std::pair<std::uint32_t, std::uint32_t>> union_dir, inter_dir;
  for (const auto& p : u.pairs) union_dir.emplace(mask[p.larger_id], mask[p.smaller_id]);
  for (const auto& p : x.pairs) inter_dir.emplace(mask[p.larger_id], mask[p.smaller_id]);
  for (const auto& [a, b] : union_dir) reversed &= inter_dir.count({b, a}) == 1 && inter_dir.count({a, b}) == 0;
  reversed &= union_dir.size() == 50 && inter_dir.size() == 50;
  report(2, "lattice enumeration", got.size() == 50 && got == want && reversed,
         std::to_string(got.size()) + " pairs, brute force " + (got == want ? "matches" : "differs") +
             ", union/intersection " + (reversed ? "reversed on all 50" : "NOT reversed"));
}

void eigenscore_floor() {
  double worst_floor = 0.0;
  for (int k : {2, 3, 10}) {
    const MatrixXd z = MatrixXd::Constant(k, 5, 0.75);
    worst_floor = std::max(worst_floor, std::abs(eigenscore_matrix(z, 1e-3) - std::log(1e-3)));
  }
  std::mt19937_64 rng(2024);
  double worst_rel = 0.0;
  for (int t = 0; t < 100; ++t) {
    const MatrixXd a = random_matrix(rng, 5, 5);
    MatrixXd g = a * a.transpose() + 0.05 * MatrixXd::Identity(5, 5);
    g = (0.5 * (g + g.transpose())).eval();
    const double want = std::log(oracle::det_cofactor(to_rows(g)));
    worst_rel = std::max(worst_rel, std::abs(logdet_psd(g) - want) / std::max(std::abs(want), 1e-300));
  }
  report(3, "eigenscore floor", worst_floor < 1e-9 && worst_rel < 1e-8,
         "floor error " + fmt("%.2e", worst_floor) + ", logdet max rel error " + fmt("%.2e", worst_rel));
}

void window_reduction() {
  std::mt19937_64 rng(7);
  const SampleSet set{"p", "m", fixture::gaussian_samples(rng, 7, 6, 5, 1.0)};
  double worst = 0.0;
  for (int l = 0; l < 5; ++l) {
    MetricConfig cfg;
    cfg.layer_window = LayerWindow(LayerWindow::Absolute{l, l});
    worst = std::max(worst, std::abs(eigenscore_average(set, cfg).value -
                                     eigenscore_matrix(layer_mean_vectors(set, static_cast<std::size_t>(l)), 1e-3)));
  }
  SampleSet hand{"h", "m", {}};
  const float rows[3][3] = {{5, 0, 0}, {5, 1, 0}, {5, 2, 3}};  // layer values per sample
  for (const auto& r : rows) {
    ResponseSample s;
    s.token_count = 1;
    s.token_logprobs = {-1.0};
    for (float v : r) s.layers.push_back({{v}, {v}});
    hand.samples.push_back(s);
  }
  MetricConfig cfg;
  cfg.layer_window = LayerWindow::parse("1:2");
  const double a = 1e-3;
  const double expected = (std::log(2 + a) + std::log(6 + a) + 4 * std::log(a)) / 6.0;
  const double err = std::abs(eigenscore_average(hand, cfg).value - expected);
  report(4, "single-layer window reduction", worst < 1e-12 && err < 1e-9,
         "|S|=1 max error " + fmt("%.2e", worst) + ", 2-layer K=3 fixture error " + fmt("%.2e", err));
}

void looe() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  int fixtures = 0;
  for (int k = 3; k <= 6; ++k)
    for (int d = 1; d <= 4; ++d)
      for (int rep = 0; rep < 5; ++rep) {
        const MatrixXd z = random_matrix(rng, k, d);
        const auto got = loo_eigenscore(z, 1e-3);
        const auto want = oracle::loo(to_rows(z), 1e-3);
        for (int i = 0; i < k; ++i) worst = std::max(worst, std::abs(got(i) - want[i]));
        ++fixtures;
      }
  MatrixXd dup(3, 2);
  dup << 1, 0, 1, 0, 0, 1;
  const auto v = loo_eigenscore(dup, 1e-3);
  const bool order = v(0) <= v(2) && v(1) <= v(2);
  report(5, "LOOE", worst < 1e-9 && order,
         std::to_string(fixtures) + " fixtures, max error " + fmt("%.2e", worst) + "; duplicate " + fmt("%.4f", v(0)) +
             " vs outlier " + fmt("%.4f", v(2)));
}

void table_a9() {
  const std::vector<double> raw = {-0.026, -0.016, -0.029};
  const auto n = minmax_normalize(raw);
  const bool ok = std::abs(n[0] - 0.23) <= 0.01 && std::abs(n[1] - 1.0) <= 0.01 && std::abs(n[2]) <= 0.01;
  report(6, "normalized LOOE table", ok, "{" + fmt("%.4f", n[0]) + ", " + fmt("%.4f", n[1]) + ", " + fmt("%.4f", n[2]) + "}");
}

void semantic_entropy_limits() {
  double worst = 0.0;
  for (std::size_t k : {2u, 5u, 10u}) {
    SampleSet set{"p", "m", {}};
    for (std::size_t i = 0; i < k; ++i) {
      ResponseSample s;
      s.text = "answer " + std::to_string(i);
      s.token_count = 2;
      s.token_logprobs = {-0.3, -0.3};
      set.samples.push_back(s);
    }
    FunctionOracle all([](std::string_view, std::string_view) { return EntailmentVerdict{EntailmentLabel::Entail, 1.0}; });
    FunctionOracle none(
        [](std::string_view, std::string_view) { return EntailmentVerdict{EntailmentLabel::Contradict, 1.0}; });
    worst = std::max(worst, std::abs(semantic_entropy(set, all).value));
    worst = std::max(worst, std::abs(semantic_entropy(set, none).value - std::log(static_cast<double>(k))));
  }
  report(7, "semantic entropy", worst < 1e-9, "max error " + fmt("%.2e", worst) + " over K in {2,5,10}");
}

void statistics() {
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  const auto t = welch_t_test(a, b);
  const double p_oracle = oracle::t_two_sided_p(t.t_statistic, t.degrees_of_freedom);
  const std::vector<double> x = {0.5, 1.5, 2, 4, 7};
  std::vector<double> up, down;
  for (double v : x) {
    up.push_back(3 * v - 2);
    down.push_back(-0.5 * v + 1);
  }
  const double r_up = pearson_r(x, up).r, r_down = pearson_r(x, down).r;
  const std::vector<double> s = {0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
  const std::vector<int> y = {0, 0, 0, 1, 1, 1};
  const double auc = rank_auc(s, y);
  const bool ok = std::abs(t.t_statistic + 3.6742) < 1e-4 && std::abs(t.degrees_of_freedom - 4) < 1e-9 &&
                  std::abs(t.p_value - p_oracle) < 1e-3 && std::abs(r_up - 1) < 1e-12 && std::abs(r_down + 1) < 1e-12 &&
                  auc == 1.0;
  report(8, "statistics oracles", ok,
         "t=" + fmt("%.4f", t.t_statistic) + " df=" + fmt("%.6f", t.degrees_of_freedom) + " p=" +
             fmt("%.6f", t.p_value) + " (oracle " + fmt("%.6f", p_oracle) + "), r=" + fmt("%.15f", r_up) + "/" +
             fmt("%.15f", r_down) + ", auc=" + fmt("%.3f", auc));
}

void planted_pipeline() {
  const auto root = fixture::fresh_dir("acc_planted");
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = cli({"generate", "--counts", "100,100,100,30,10,10", "--seed", "3", "--out", (root / "bench").string()}) == 0;
  double macro = -1.0;
  std::size_t n_pairs = 0;
  if (ok) {
    const auto prompts = read_prompts(root / "bench" / "prompts.jsonl");
    const auto pairs = read_pairs(root / "bench" / "pairs.jsonl");
    n_pairs = pairs.size();
    write_archive(fixture::planted_archive(prompts, pairs, "planted", 17), root / "archive.jsonl.gz");
    ok = cli({"score", "--archive", (root / "archive.jsonl.gz").string(), "--metrics", "eigenscore_average", "--out",
              (root / "scores").string()}) == 0 &&
         cli({"eval", "--scores", (root / "scores" / "scores.jsonl").string(), "--pairs",
              (root / "bench" / "pairs.jsonl").string(), "--out", (root / "eval").string()}) == 0;
    if (ok) {
      const auto acc = nlohmann::json::parse(slurp(root / "eval" / "accuracy.json"));
      for (const auto& r : acc.at("reports"))
        if (r.at("metric_name") == "eigenscore_average" && !r.at("macro_average").is_null())
          macro = r.at("macro_average").get<double>();
    }
  }
  const double elapsed = seconds_since(t0);
  report(9, "end-to-end planted run", ok && macro >= 0.95 && elapsed < 60.0,
         std::to_string(n_pairs) + " pairs over six datasets, eigenscore_average macro accuracy " + fmt("%.4f", macro) +
             ", " + fmt("%.1f", elapsed) + " s");
  fs::remove_all(root);
}

void invariance() {
  const auto bench = generate_all({}, 1);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<MetricScore> scores;
  for (const auto& p : bench.prompts) scores.push_back({p.id, "m", "energy", std::round(n(rng) * 8) / 8, Direction::HigherIsLarger});
  const auto ref = pairwise_accuracy(scores, bench.pairs, "m", "energy", Direction::HigherIsLarger);
  int changed = 0;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 20; ++t) {
    const double a = u(rng), b = n(rng) * 10, c = u(rng);
    auto moved = scores;
    for (auto& s : moved) {
      const double v = s.value;
      switch (t % 4) {
        case 0: s.value = a * v + b; break;
        case 1: s.value = std::exp(c * v) + b; break;
        case 2: s.value = std::atan(v) * a; break;
        default: s.value = v * v * v + a * v; break;
      }
    }
    const auto got = pairwise_accuracy(moved, bench.pairs, "m", "energy", Direction::HigherIsLarger);
    bool same = got.datasets.size() == ref.datasets.size() && got.macro_average == ref.macro_average;
    for (std::size_t d = 0; same && d < ref.datasets.size(); ++d) {
      const auto &g = got.datasets[d], &r = ref.datasets[d];
      same = g.dataset == r.dataset && g.n_pairs == r.n_pairs && g.n_correct == r.n_correct && g.n_ties == r.n_ties &&
             g.accuracy == r.accuracy && g.ci_halfwidth == r.ci_halfwidth;
    }
    if (!same) ++changed;
  }
  report(10, "pairwise-accuracy invariance", changed == 0,
         std::to_string(20 - changed) + "/20 transforms left every cell unchanged (" +
             std::to_string(bench.pairs.size()) + " pairs, " + std::to_string(ref.datasets.size()) + " datasets)");
}

}  // namespace

int main() {
  const std::vector<void (*)()> checks = {generator_totals, lattice,  eigenscore_floor,        window_reduction, looe,
                                          table_a9,         semantic_entropy_limits, statistics, planted_pipeline,
                                          invariance};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    try {
      checks[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "criterion", false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%s: %d of %zu criteria failed\n", failures ? "FAILED" : "OK", failures, checks.size());
  return failures == 0 ? 0 : 1;
}
