#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "gss/entailment.hpp"
#include "gss/error.hpp"
#include "gss/text.hpp"
#include "oracles.hpp"

using namespace gss;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected gss::Error");
  return ErrorKind::Usage;
}

SampleSet texts_with_logprob(const std::vector<std::string>& texts, double logprob, std::size_t tokens = 3) {
  SampleSet set{"p", "m", {}};
  for (const auto& t : texts) {
    ResponseSample s;
    s.text = t;
    s.token_count = tokens;
    s.token_logprobs.assign(tokens, logprob);
    set.samples.push_back(s);
  }
  return set;
}

FunctionOracle constant_oracle(EntailmentLabel label) {
  return FunctionOracle([label](std::string_view, std::string_view) { return EntailmentVerdict{label, 1.0}; });
}

}  // namespace

TEST_SUITE("text") {

TEST_CASE("tokenize_words") {
  CHECK(tokenize_words("Hello, World!  it's") == std::vector<std::string>{"hello", "world", "it", "s"});
  CHECK(tokenize_words("") .empty());
  CHECK(tokenize_words("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("lcs and rouge-l agree with the recursive oracle") {
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> x(rng() % 9), y(rng() % 9);
    std::string xs, ys;
    for (auto& w : x) xs += (w = vocab[rng() % 4]) + " ";
    for (auto& w : y) ys += (w = vocab[rng() % 4]) + " ";
    const auto l = oracle::lcs(x, y);
    CHECK(lcs_length(x, y) == l);
    double want = 0.0;
    if (x.empty() && y.empty()) {
      want = 1.0;
    } else if (l > 0) {
      const double p = static_cast<double>(l) / y.size();
      const double r = static_cast<double>(l) / x.size();
      want = 2 * p * r / (p + r);
    }
    CHECK(rouge_l_f1(xs, ys) == doctest::Approx(want));
    CHECK(rouge_l_f1(xs, ys) == doctest::Approx(rouge_l_f1(ys, xs)));
  }
}

TEST_CASE("entailment labels") {
  CHECK(parse_entailment_label("entailment") == EntailmentLabel::Entail);
  CHECK(parse_entailment_label("contradict") == EntailmentLabel::Contradict);
  CHECK(parse_entailment_label("neutral") == EntailmentLabel::Neutral);
  CHECK(kind_of([] { parse_entailment_label("maybe"); }) == ErrorKind::Protocol);
  CHECK(parse_entailment_label(to_string(EntailmentLabel::Entail)) == EntailmentLabel::Entail);
}

TEST_CASE("greedy clustering by exact match") {
  ExactMatchOracle oracle;
  const std::vector<std::string> texts = {"Paris", "paris!", "Lyon", "PARIS", "lyon", "Nice"};
  const auto part = cluster_by_entailment(texts, oracle);
  REQUIRE(part.clusters.size() == 3);
  CHECK(part.clusters[0] == std::vector<std::size_t>{0, 1, 3});
  CHECK(part.clusters[1] == std::vector<std::size_t>{2, 4});
  CHECK(part.assignment == std::vector<std::size_t>{0, 0, 1, 0, 1, 2});
}

TEST_CASE("one-directional entailment does not merge") {
  // "a" entails everything but nothing entails "a".
  FunctionOracle oracle([](std::string_view premise, std::string_view) {
    return EntailmentVerdict{premise == "a" ? EntailmentLabel::Entail : EntailmentLabel::Neutral, 1.0};
  });
  const std::vector<std::string> texts = {"a", "b", "c"};
  CHECK(cluster_by_entailment(texts, oracle).clusters.size() == 3);
}

TEST_CASE("semantic entropy extremes") {
  for (std::size_t k : {2u, 5u, 10u}) {
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < k; ++i) texts.push_back("text " + std::to_string(i));
    const auto set = texts_with_logprob(texts, -0.7);
    auto all = constant_oracle(EntailmentLabel::Entail);
    auto none = constant_oracle(EntailmentLabel::Contradict);
    CHECK(std::abs(semantic_entropy(set, all).value) < 1e-12);
    CHECK(std::abs(semantic_entropy(set, none).value - std::log(static_cast<double>(k))) < 1e-12);
  }
}

TEST_CASE("cluster entropy with unequal weights") {
  Partition part;
  part.clusters = {{0, 1}, {2}};
  part.assignment = {0, 0, 1};
  const std::vector<double> w = {1.0, 1.0, 2.0};
  CHECK(cluster_entropy(w, part) == doctest::Approx(std::log(2.0)));
  const std::vector<double> bad = {1.0, -1.0, 1.0};
  CHECK(kind_of([&] { cluster_entropy(bad, part); }) == ErrorKind::InvalidInput);
  const std::vector<double> short_w = {1.0};
  CHECK(kind_of([&] { cluster_entropy(short_w, part); }) == ErrorKind::InvalidInput);
}

TEST_CASE("sequence weights by mode") {
  const auto set = texts_with_logprob({"x", "y"}, -2.0, 4);
  CHECK(sequence_weights(set, SequenceProbMode::LengthNormalized)[0] == doctest::Approx(std::exp(-2.0)));
  CHECK(sequence_weights(set, SequenceProbMode::Raw)[0] == doctest::Approx(std::exp(-8.0)));
}

TEST_CASE("underflowed weights are a numeric error with a hint") {
  const auto set = texts_with_logprob({"x", "y"}, -500.0, 4);
  auto none = constant_oracle(EntailmentLabel::Contradict);
  MetricConfig raw;
  raw.sequence_prob_mode = SequenceProbMode::Raw;
  try {
    semantic_entropy(set, none, raw);
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("sequence probability mode") != std::string::npos);
  }
  CHECK(std::isfinite(semantic_entropy(set, none).value));
}

TEST_CASE("oracle failures propagate with the pair that failed") {
  FunctionOracle broken([](std::string_view, std::string_view) -> EntailmentVerdict {
    fail(ErrorKind::Transport, "connection refused");
  });
  const std::vector<std::string> texts = {"a", "b"};
  try {
    cluster_by_entailment(texts, broken);
    FAIL("expected transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transport);
    CHECK(std::string(e.what()).find("connection refused") != std::string::npos);
  }
}

}
