#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "gss/archive.hpp"
#include "gss/cli.hpp"
#include "gss/records.hpp"
#include "mock_server.hpp"

using nlohmann::json;
using namespace gss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  gss::cli::RunContext ctx;
  ctx.getenv = [env](std::string_view name) -> std::optional<std::string> {
    const auto it = env.find(std::string(name));
    return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
  };
  ctx.out = &out;
  ctx.err = &err;
  const int code = gss::cli::run(args, ctx);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate union is deterministic") {
  const auto a = fixture::fresh_dir("gen_a");
  const auto b = fixture::fresh_dir("gen_b");
  for (const auto& dir : {a, b}) {
    const auto r = invoke({"generate", "--dataset", "union", "--sets", "60", "--seed", "7", "--out", dir.string()});
    REQUIRE(r.code == 0);
  }
  CHECK(read_pairs(a / "pairs.jsonl").size() == 3000);
  CHECK(read_prompts(a / "prompts.jsonl").size() == 900);
  CHECK(slurp(a / "pairs.jsonl") == slurp(b / "pairs.jsonl"));
  CHECK(slurp(a / "prompts.jsonl") == slurp(b / "prompts.jsonl"));
  const auto m = read_json(a / "manifest.json");
  CHECK(m.at("status") == "ok");
  CHECK(m.at("command") == "generate");
  CHECK(m.at("summary").at("pairs") == 3000);
  CHECK(m.at("seeds").contains("union"));
  CHECK(!fs::exists(a / ".lock"));
}

TEST_CASE("usage errors exit 2") {
  const auto dir = fixture::fresh_dir("usage");
  CHECK(invoke({"generate", "--dataset", "nope", "--out", dir.string()}).code == 2);
  CHECK(invoke({"generate"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"generate", "--dataset", "union", "--n", "3", "--sets", "2", "--out", dir.string()}).code == 2);
  CHECK(invoke({"score", "--archive", "x", "--metrics", "bogus", "--out", dir.string()}).code == 2);
  CHECK(invoke({"--version"}).code == 0);
}

TEST_CASE("settings precedence: flag over env over config over default") {
  const auto root = fixture::fresh_dir("prec");
  spit(root / "cfg.json", R"({"generate": {"seed": 3, "n": 4}, "dataset": "complement"})");
  const auto out1 = root / "one";
  REQUIRE(invoke({"generate", "--config", (root / "cfg.json").string(), "--out", out1.string()},
                 {{"GSS_SEED", "5"}})
              .code == 0);
  auto m = read_json(out1 / "manifest.json").at("config");
  CHECK(m.at("values").at("seed") == "5");
  CHECK(m.at("sources").at("seed") == "env");
  CHECK(m.at("values").at("n") == "4");
  CHECK(m.at("sources").at("n") == "config");
  CHECK(m.at("values").at("dataset") == "complement");
  CHECK(!m.at("sources").contains("bank"));
  CHECK(read_pairs(out1 / "pairs.jsonl").size() == 4);

  const auto out2 = root / "two";
  REQUIRE(invoke({"generate", "--seed", "9", "--out", out2.string()},
                 {{"GSS_SEED", "5"}, {"GSS_CONFIG", (root / "cfg.json").string()}})
              .code == 0);
  m = read_json(out2 / "manifest.json").at("config");
  CHECK(m.at("values").at("seed") == "9");
  CHECK(m.at("sources").at("seed") == "flag");
  CHECK(m.at("sources").at("n") == "config");

  const auto out3 = root / "three";
  REQUIRE(invoke({"generate", "--dataset", "complement", "--n", "2", "--out", out3.string()}).code == 0);
  CHECK(read_json(out3 / "manifest.json").at("config").at("sources").at("seed") == "default");
}

TEST_CASE("a previous manifest reproduces the run") {
  const auto root = fixture::fresh_dir("replay");
  REQUIRE(invoke({"generate", "--dataset", "subset", "--sets", "6", "--seed", "11", "--out", (root / "a").string()})
              .code == 0);
  REQUIRE(invoke({"generate", "--config", (root / "a" / "manifest.json").string(), "--out", (root / "b").string()})
              .code == 0);
  CHECK(slurp(root / "a" / "prompts.jsonl") == slurp(root / "b" / "prompts.jsonl"));
}

TEST_CASE("a held output directory is refused") {
  const auto dir = fixture::fresh_dir("lock");
  spit(dir / ".lock", "12345\n");
  const auto r = invoke({"generate", "--dataset", "complement", "--n", "2", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("in use") != std::string::npos);
  CHECK(!fs::exists(dir / "pairs.jsonl"));
}

TEST_CASE("score and eval on a planted archive") {
  const auto root = fixture::fresh_dir("planted");
  REQUIRE(invoke({"generate", "--dataset", "union", "--sets", "4", "--out", (root / "bench").string()}).code == 0);
  const auto prompts = read_prompts(root / "bench" / "prompts.jsonl");
  const auto pairs = read_pairs(root / "bench" / "pairs.jsonl");
  write_archive(fixture::planted_archive(prompts, pairs, "planted", 5), root / "archive.jsonl.gz");

  REQUIRE(invoke({"score", "--archive", (root / "archive.jsonl.gz").string(), "--out", (root / "scores").string()})
              .code == 0);
  const auto scores = read_scores(root / "scores" / "scores.jsonl");
  CHECK(scores.size() == prompts.size() * 7);  // semantic_entropy skipped without an oracle

  const auto r = invoke({"eval", "--scores", (root / "scores" / "scores.jsonl").string(), "--pairs",
                         (root / "bench" / "pairs.jsonl").string(), "--out", (root / "eval").string()});
  REQUIRE(r.code == 0);
  const auto acc = read_json(root / "eval" / "accuracy.json");
  bool seen = false;
  for (const auto& rep : acc.at("reports")) {
    if (rep.at("metric_name") == "eigenscore_average") {
      seen = true;
      CHECK(rep.at("macro_average").get<double>() >= 0.95);
    }
  }
  CHECK(seen);
  CHECK(acc.at("best_metric").contains("planted"));
  CHECK(fs::exists(root / "eval" / "accuracy.tsv"));
  CHECK(slurp(root / "eval" / "accuracy.txt").find("eigenscore_average") != std::string::npos);
}

TEST_CASE("score records per-prompt metric errors and keeps going") {
  const auto root = fixture::fresh_dir("score_err");
  std::mt19937_64 rng(3);
  std::vector<gss::ArchiveRecord> recs;
  recs.push_back(fixture::record("ok", "m", fixture::gaussian_samples(rng, 3, 4, 9, 1.0)));
  auto bare = fixture::gaussian_samples(rng, 3, 4, 9, 1.0);
  for (auto& s : bare) {
    s.layers.clear();
    s.token_logsumexp.clear();
  }
  recs.push_back(fixture::record("bare", "m", bare));
  write_archive(recs, root / "a.jsonl");
  REQUIRE(invoke({"score", "--archive", (root / "a.jsonl").string(), "--metrics",
                  "eigenscore_average,energy,perplexity,semantic_entropy", "--entailment", "exact", "--out",
                  (root / "out").string()})
              .code == 0);
  CHECK(read_scores(root / "out" / "scores.jsonl").size() == 6);
  const auto errs = read_jsonl(root / "out" / "score_errors.jsonl");
  REQUIRE(errs.size() == 2);
  CHECK(errs[0].at("prompt_id") == "bare");
  CHECK(errs[0].at("kind") == "data-unavailable");
}

TEST_CASE("corrupt archives exit 3") {
  const auto root = fixture::fresh_dir("corrupt");
  spit(root / "a.jsonl", "{\"prompt_id\":\"x\"}\n");
  CHECK(invoke({"score", "--archive", (root / "a.jsonl").string(), "--out", (root / "o").string()}).code == 3);
  const auto m = read_json(root / "o" / "manifest.json");
  CHECK(m.at("status") == "failed");
  CHECK(m.at("error").at("kind") == "corrupt-archive");
}

TEST_CASE("ttest, corr and classify on labeled scores") {
  const auto root = fixture::fresh_dir("labeled");
  std::vector<gss::MetricScore> scores;
  std::string labels, tokens;
  for (int i = 1; i <= 6; ++i) {
    const std::string id = "q" + std::to_string(i);
    scores.push_back({id, "m", "energy", static_cast<double>(i), gss::Direction::HigherIsLarger});
    labels += "{\"prompt_id\":\"" + id + "\",\"label\":" + (i <= 3 ? "1" : "0") + "}\n";
    tokens += "{\"prompt_id\":\"" + id + "\",\"reasoning_token_count\":" + std::to_string(10 * i + 5) + "}\n";
  }
  gss::write_scores(root / "s.jsonl", scores);
  spit(root / "l.jsonl", labels);
  spit(root / "t.jsonl", tokens);

  REQUIRE(invoke({"ttest", "--scores", (root / "s.jsonl").string(), "--labels", (root / "l.jsonl").string(), "--out",
                  (root / "tt").string()})
              .code == 0);
  const auto tt = read_json(root / "tt" / "ttest.json").at("results").at(0);
  CHECK(tt.at("t").get<double>() == doctest::Approx(-3.6742).epsilon(1e-4));
  CHECK(tt.at("df").get<double>() == doctest::Approx(4.0));
  CHECK(tt.at("direction_correct") == false);

  REQUIRE(invoke({"corr", "--scores", (root / "s.jsonl").string(), "--token-counts", (root / "t.jsonl").string(),
                  "--out", (root / "co").string()})
              .code == 0);
  CHECK(read_json(root / "co" / "corr.json").at("results").at(0).at("r").get<double>() == doctest::Approx(1.0));

  REQUIRE(invoke({"classify", "--scores", (root / "s.jsonl").string(), "--labels", (root / "l.jsonl").string(),
                  "--direction", "energy=lower", "--out", (root / "cl").string()})
              .code == 0);
  const auto cl = read_json(root / "cl" / "classify.json").at("results").at(0);
  CHECK(cl.at("accuracy").get<double>() == 1.0);
  CHECK(cl.at("auc").get<double>() == 1.0);
  CHECK(cl.at("threshold").get<double>() == doctest::Approx(3.5));
}

TEST_CASE("loo on raw values and on an archive") {
  const auto root = fixture::fresh_dir("loo");
  spit(root / "raw.jsonl",
       "{\"prompt_id\":\"t\",\"response_index\":0,\"looe\":-0.026}\n"
       "{\"prompt_id\":\"t\",\"response_index\":1,\"looe\":-0.016}\n"
       "{\"prompt_id\":\"t\",\"response_index\":2,\"looe\":-0.029}\n");
  REQUIRE(invoke({"loo", "--raw", (root / "raw.jsonl").string(), "--out", (root / "r").string()}).code == 0);
  const auto rows = read_jsonl(root / "r" / "loo.jsonl");
  REQUIRE(rows.size() == 1);
  const auto& e = rows[0].at("entries");
  CHECK(std::abs(e.at(0).at("normalized").get<double>() - 0.23) < 0.01);
  CHECK(e.at(1).at("normalized").get<double>() == 1.0);
  CHECK(e.at(2).at("normalized").get<double>() == 0.0);
  CHECK(slurp(root / "r" / "loo.txt").find("0.23") != std::string::npos);

  std::mt19937_64 rng(9);
  std::vector<gss::ArchiveRecord> recs = {fixture::record("p", "m", fixture::gaussian_samples(rng, 4, 3, 9, 1.0))};
  write_archive(recs, root / "a.jsonl");
  REQUIRE(invoke({"loo", "--archive", (root / "a.jsonl").string(), "--out", (root / "a").string()}).code == 0);
  CHECK(read_jsonl(root / "a" / "loo.jsonl")[0].at("entries").size() == 4);
  CHECK(invoke({"loo", "--out", (root / "none").string()}).code == 2);
}

TEST_CASE("pairs-build writes chosen/rejected pairs and skips") {
  const auto root = fixture::fresh_dir("pairs_build");
  std::mt19937_64 rng(13);
  std::vector<gss::ArchiveRecord> recs;
  std::string rewards;
  for (int p = 0; p < 3; ++p) {
    const std::string id = "p" + std::to_string(p);
    recs.push_back(fixture::record(id, "m", fixture::gaussian_samples(rng, 4, 3, 9, 1.0)));
    for (int i = 0; i < 4; ++i) {
      if (p == 1 && i == 0) continue;
      rewards += "{\"prompt_id\":\"" + id + "\",\"response_index\":" + std::to_string(i) +
                 ",\"reward\":" + std::to_string(0.1 * ((i * 3 + p) % 4)) + "}\n";
    }
  }
  write_archive(recs, root / "a.jsonl");
  spit(root / "r.jsonl", rewards);
  spit(root / "prompts.jsonl", "{\"id\":\"p0\",\"text\":\"Say hi\",\"label\":0}\n");
  REQUIRE(invoke({"pairs-build", "--archive", (root / "a.jsonl").string(), "--rewards", (root / "r.jsonl").string(),
                  "--prompts", (root / "prompts.jsonl").string(), "--out", (root / "o").string()})
              .code == 0);
  const auto pairs = read_jsonl(root / "o" / "preference_pairs.jsonl");
  CHECK(pairs.size() == 2);
  CHECK(pairs[0].at("prompt") == "Say hi");
  const auto skipped = read_jsonl(root / "o" / "skipped.jsonl");
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0].at("reason") == "missing_reward");
  CHECK(invoke({"pairs-build", "--archive", (root / "a.jsonl").string(), "--rewards", (root / "r.jsonl").string(),
                "--fraction", "0", "--out", (root / "bad").string()})
            .code == 2);
}

TEST_CASE("collect against a mock backend, then resume from the archive") {
  mock::Server server;
  server.required_token = "tok";
  const auto root = fixture::fresh_dir("collect");
  REQUIRE(invoke({"generate", "--dataset", "complement", "--n", "3", "--out", (root / "bench").string()}).code == 0);
  const std::vector<std::string> args = {"collect",
                                         "--prompts",
                                         (root / "bench" / "prompts.jsonl").string(),
                                         "--endpoint",
                                         server.endpoint(),
                                         "--k",
                                         "4",
                                         "--metrics",
                                         "eigenscore_average,energy",
                                         "--checkpoint",
                                         "2",
                                         "--out",
                                         (root / "run").string()};
  const auto r = invoke(args, {{"GSS_TOKEN", "tok"}});
  REQUIRE(r.code == 0);
  const auto archive = gss::read_archive(root / "run" / "archive.jsonl");
  CHECK(archive.size() == 6);
  for (const auto& rec : archive) CHECK(rec.samples.size() == 4);
  CHECK(server.sample_calls == 6);
  const auto m = read_json(root / "run" / "manifest.json");
  CHECK(m.at("config").at("values").at("token") == "<redacted>");
  CHECK(slurp(root / "run" / "manifest.json").find("\"tok\"") == std::string::npos);

  REQUIRE(invoke(args, {{"GSS_TOKEN", "tok"}}).code == 0);
  CHECK(server.sample_calls == 6);
  CHECK(read_json(root / "run" / "manifest.json").at("summary").at("cache_hits") == 6);
  CHECK(gss::read_archive(root / "run" / "archive.jsonl") == archive);

  REQUIRE(invoke({"score", "--archive", (root / "run" / "archive.jsonl").string(), "--out",
                  (root / "scores").string()})
              .code == 0);
  CHECK(read_scores(root / "scores" / "scores.jsonl").size() == 6 * 6);  // no external embeddings, no oracle
}

TEST_CASE("collect failures map to exit codes") {
  const auto root = fixture::fresh_dir("collect_fail");
  REQUIRE(invoke({"generate", "--dataset", "complement", "--n", "1", "--out", (root / "bench").string()}).code == 0);
  const int port = fixture::closed_port();
  const auto r = invoke({"collect", "--prompts", (root / "bench" / "prompts.jsonl").string(), "--endpoint",
                         "http://127.0.0.1:" + std::to_string(port), "--retries", "2", "--retry-delay-ms", "1",
                         "--out", (root / "run").string()});
  CHECK(r.code == 4);
  CHECK(read_jsonl(root / "run" / "collect_errors.jsonl").size() == 2);

  mock::Server server;
  server.wire_version = 9;
  CHECK(invoke({"collect", "--prompts", (root / "bench" / "prompts.jsonl").string(), "--endpoint", server.endpoint(),
                "--out", (root / "run2").string()})
            .code == 4);
}

}
