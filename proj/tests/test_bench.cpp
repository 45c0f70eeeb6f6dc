#include <doctest.h>

#include <algorithm>
#include <bit>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "gss/bench.hpp"
#include "gss/error.hpp"
#include "gss/records.hpp"
#include "oracles.hpp"

using namespace gss;

namespace {

std::map<Dataset, std::size_t> pair_counts(const BenchSet& b) {
  std::map<Dataset, std::size_t> out;
  for (const auto& p : b.pairs) ++out[p.dataset];
  return out;
}

const Prompt& find_prompt(const BenchSet& b, const std::string& id) {
  const auto it = std::find_if(b.prompts.begin(), b.prompts.end(), [&](const Prompt& p) { return p.id == id; });
  REQUIRE(it != b.prompts.end());
  return *it;
}

std::uint32_t mask_of(const Prompt& p) {
  std::uint32_t m = 0;
  for (char c : p.meta.at("mask")) m |= 1u << (c - 'A');
  return m;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("strict-subset lattice matches brute force") {
  for (int n = 1; n <= 6; ++n) {
    auto got = enumerate_strict_subset_pairs(n);
    auto want = oracle::lattice(n);
    std::sort(want.begin(), want.end());
    CHECK(got == want);
  }
  CHECK(enumerate_strict_subset_pairs(4).size() == 50);
}

TEST_CASE("mask labels") {
  CHECK(mask_label(0b0001) == "A");
  CHECK(mask_label(0b0101) == "AC");
  CHECK(mask_label(0b1111) == "ABCD");
}

TEST_CASE("full benchmark counts and determinism") {
  const auto a = generate_all({}, 0);
  const auto counts = pair_counts(a);
  CHECK(counts.at(Dataset::Complement) == 500);
  CHECK(counts.at(Dataset::FactualQA) == 500);
  CHECK(counts.at(Dataset::RandomChoice) == 500);
  CHECK(counts.at(Dataset::Subset) == 1800);
  CHECK(counts.at(Dataset::Union) == 3000);
  CHECK(counts.at(Dataset::Intersection) == 3000);
  CHECK(a.pairs.size() == 9300);

  const auto b = generate_all({}, 0);
  CHECK(a.prompts == b.prompts);
  CHECK(a.pairs == b.pairs);

  const auto c = generate_all({}, 1);
  CHECK(a.prompts != c.prompts);
}

TEST_CASE("ids are unique and every pair references known prompts") {
  const auto all = generate_all({}, 5);
  std::set<std::string> ids;
  for (const auto& p : all.prompts) CHECK(ids.insert(p.id).second);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : all.pairs) {
    CHECK(ids.count(p.larger_id) == 1);
    CHECK(ids.count(p.smaller_id) == 1);
    CHECK(p.larger_id != p.smaller_id);
    CHECK(seen.emplace(p.larger_id, p.smaller_id).second);
  }
}

TEST_CASE("union and intersection orient the lattice in opposite directions") {
  const auto u = gen_union(3, 9);
  const auto x = gen_intersection(3, 9);
  CHECK(u.pairs.size() == 150);
  CHECK(x.pairs.size() == 150);
  CHECK(u.prompts.size() == 45);
  for (const auto& p : u.pairs) {
    const auto big = mask_of(find_prompt(u, p.larger_id));
    const auto small = mask_of(find_prompt(u, p.smaller_id));
    CHECK((big & small) == small);
    CHECK(std::popcount(big) > std::popcount(small));
    CHECK(p.rationale == Rationale::UnionSuperset);
  }
  for (const auto& p : x.pairs) {
    const auto big = mask_of(find_prompt(x, p.larger_id));
    const auto small = mask_of(find_prompt(x, p.smaller_id));
    CHECK((big & small) == big);
    CHECK(std::popcount(big) < std::popcount(small));
    CHECK(p.rationale == Rationale::IntersectionSubset);
  }
}

TEST_CASE("the first intersection family renders the email example") {
  const auto x = gen_intersection(1, 0);
  CHECK(find_prompt(x, "intersection-0001-AB").text == "Compose an email with a word count of approximately 200 words.");
  CHECK(find_prompt(x, "intersection-0001-A").text == "Compose an email.");
}

TEST_CASE("union prompts list their options with 'or'") {
  const UnionFamily f{"Name a fruit:", {"apple", "pear", "plum", "fig"}};
  CHECK(render_union(f, 0b0101) == "Name a fruit: apple or plum");
  CHECK(render_union(f, 0b0001) == "Name a fruit: apple");
}

TEST_CASE("complement and subset structure") {
  const auto c = gen_complement(20, 3);
  CHECK(c.pairs.size() == 20);
  for (const auto& p : c.pairs) {
    CHECK(find_prompt(c, p.larger_id).text.rfind("Generate anything that is not ", 0) == 0);
    CHECK(find_prompt(c, p.smaller_id).text.rfind("Generate ", 0) == 0);
  }
  const auto s = gen_subset(4, 3);
  CHECK(s.prompts.size() == 20);
  CHECK(s.pairs.size() == 40);
  for (const auto& p : s.pairs) {
    const int big = std::stoi(find_prompt(s, p.larger_id).meta.at("level"));
    const int small = std::stoi(find_prompt(s, p.smaller_id).meta.at("level"));
    CHECK(big < small);
  }
}

TEST_CASE("random choice: the two options come from the ten") {
  const auto r = gen_random_choice(50, 11);
  CHECK(r.pairs.size() == 50);
  for (const auto& p : r.pairs) {
    const auto& big = find_prompt(r, p.larger_id).meta.at("options");
    const auto& small = find_prompt(r, p.smaller_id).meta.at("options");
    std::set<std::string> ten;
    for (std::size_t start = 0, bar; start <= big.size(); start = bar + 1) {
      bar = std::min(big.find('|', start), big.size());
      ten.insert(big.substr(start, bar - start));
    }
    CHECK(ten.size() == 10);
    const auto bar = small.find('|');
    CHECK(ten.count(small.substr(0, bar)) == 1);
    CHECK(ten.count(small.substr(bar + 1)) == 1);
  }
}

TEST_CASE("factual QA pairs an open question with a narrower one") {
  const auto f = gen_factualqa(30, 2);
  CHECK(f.pairs.size() == 30);
  for (const auto& p : f.pairs) {
    CHECK(p.rationale == Rationale::OpenCategory);
    CHECK(find_prompt(f, p.larger_id).text != find_prompt(f, p.smaller_id).text);
  }
}

TEST_CASE("asking for more than the bank holds is a configuration error") {
  try {
    gen_union(100000, 0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Configuration);
  }
  CHECK_THROWS_AS(parse_dataset("nonsense"), Error);
}

TEST_CASE("template bank JSON round trip drives identical output") {
  const auto dir = fixture::fresh_dir("bank");
  save_template_bank(TemplateBank::defaults(), dir / "bank.json");
  const auto loaded = load_template_bank(dir / "bank.json");
  BenchCounts small{10, 10, 10, 5, 3, 3};
  const auto a = generate_all(small, 4);
  const auto b = generate_all(small, 4, loaded);
  CHECK(a.prompts == b.prompts);
  CHECK(a.pairs == b.pairs);
}

TEST_CASE("prompt and pair files round trip") {
  const auto dir = fixture::fresh_dir("prompts");
  const auto b = generate_all({5, 5, 5, 2, 1, 1}, 8);
  write_prompts(dir / "prompts.jsonl", b.prompts);
  write_pairs(dir / "pairs.jsonl", b.pairs);
  CHECK(read_prompts(dir / "prompts.jsonl") == b.prompts);
  CHECK(read_pairs(dir / "pairs.jsonl") == b.pairs);
}

}
