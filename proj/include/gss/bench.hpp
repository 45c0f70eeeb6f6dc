#pragma once

// Seeded synthesis of prompt pairs whose ground-truth generation-space
// ordering follows from a set relation between the two prompts.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gss {

enum class Dataset { Complement, FactualQA, RandomChoice, Subset, Union, Intersection, External };

std::string_view to_string(Dataset d) noexcept;
Dataset parse_dataset(std::string_view text);

/// Set relation that justifies `larger` having the bigger generation space.
enum class Rationale {
  Complement,    // "anything that is not X" vs X
  OpenCategory,  // open category question vs its superlative instance
  OptionSuperset,
  Specificity,   // fewer appended requirements
  UnionSuperset,
  IntersectionSubset,  // fewer conjoined constraints
  External,
};

std::string_view to_string(Rationale r) noexcept;
Rationale parse_rationale(std::string_view text);

struct Prompt {
  std::string id;
  std::string text;
  Dataset dataset = Dataset::External;
  std::string set_id;
  std::map<std::string, std::string> meta;

  bool operator==(const Prompt&) const = default;
};

struct PromptPair {
  std::string larger_id;
  std::string smaller_id;
  Dataset dataset = Dataset::External;
  Rationale rationale = Rationale::External;

  bool operator==(const PromptPair&) const = default;
};

struct BenchSet {
  std::vector<Prompt> prompts;
  std::vector<PromptPair> pairs;

  void append(BenchSet other);
  /// Prompts by id, pairs by (larger_id, smaller_id).
  void sort();
};

// ---- template banks -------------------------------------------------------

struct GenreBank {
  std::string name;          // "email"
  std::string noun;          // "an email"
  std::string topic_joiner;  // "about" / "for"
  std::vector<std::string> topics;
  std::vector<std::string> contexts;
  std::vector<std::string> qualifiers;  // clause following "that"
  std::vector<std::string> outlines;    // comma-separated parts are numbered
};

struct FactualTemplate {
  std::string smaller;  // may contain {country} / {continent}
  std::string larger;
};

struct Country {
  std::string name;
  std::string continent;
};

struct CategoryBank {
  std::string name;
  std::vector<std::string> items;
};

struct UnionStem {
  std::string stem;                  // "Come up with an idea for"
  std::vector<std::string> options;  // 4-subsets become families
};

struct UnionFamily {
  std::string stem;
  std::array<std::string, 4> options;
};

struct Requirement {
  std::string fragment;   // "consisting of three paragraphs"
  std::string base_text;  // optional stand-alone phrasing for the singleton prompt
};

struct IntersectionFamily {
  std::string verb;          // "Compose"
  std::string task_noun;     // element A, "an email"
  std::string generic_noun;  // used when A is absent, "a piece"
  std::string task_text;     // optional stand-alone phrasing for {A}
  std::array<Requirement, 3> requirements;  // elements B, C, D
};

struct IntersectionGrammar {
  struct Task {
    std::string verb;
    std::string noun;
  };
  std::vector<Task> tasks;
  std::string generic_noun = "a piece";
  /// Requirement fragments by category; a family takes 3 categories, one fragment each.
  std::vector<std::pair<std::string, std::vector<std::string>>> requirement_categories;
};

struct TemplateBank {
  std::vector<GenreBank> genres;
  std::vector<FactualTemplate> factual_templates;
  std::vector<Country> countries;
  std::vector<std::string> continents;
  std::vector<CategoryBank> categories;
  std::vector<UnionFamily> union_fixed;  // emitted first, before sampled families
  std::vector<UnionStem> union_stems;
  std::vector<IntersectionFamily> intersection_fixed;
  IntersectionGrammar intersection_grammar;

  static const TemplateBank& defaults();
};

TemplateBank load_template_bank(const std::filesystem::path& path);
void save_template_bank(const TemplateBank& bank, const std::filesystem::path& path);

// ---- rendering ------------------------------------------------------------

struct GenreChoice {
  std::size_t genre = 0;
  std::optional<std::size_t> topic, context, qualifier, outline;
};

/// "a poem about autumn leaves in a small town that ..." (no verb).
std::string describe(const GenreBank& genre, const GenreChoice& choice);
std::string complement_text(std::string_view description);  // "Generate anything that is not ..."
std::string base_text(std::string_view description);        // "Generate ..."
std::string format_outline(std::string_view outline);        // "1) Greeting 2) Purpose"

std::string render_union(const UnionFamily& family, std::uint32_t mask);
std::string render_intersection(const IntersectionFamily& family, std::uint32_t mask);
std::string mask_label(std::uint32_t mask);  // 0b0101 -> "AC"

// ---- generators -----------------------------------------------------------

/// All (superset, subset) mask pairs with ∅ ≠ subset ⊊ superset over `base_count` elements.
std::vector<std::pair<std::uint32_t, std::uint32_t>> enumerate_strict_subset_pairs(int base_count);

BenchSet gen_complement(std::size_t n, std::uint64_t seed, const TemplateBank& bank = TemplateBank::defaults());
BenchSet gen_factualqa(std::size_t n, std::uint64_t seed, const TemplateBank& bank = TemplateBank::defaults());
BenchSet gen_random_choice(std::size_t n, std::uint64_t seed, const TemplateBank& bank = TemplateBank::defaults());
BenchSet gen_subset(std::size_t n_sets, std::uint64_t seed, const TemplateBank& bank = TemplateBank::defaults());
BenchSet gen_union(std::size_t n_sets, std::uint64_t seed, const TemplateBank& bank = TemplateBank::defaults());
BenchSet gen_intersection(std::size_t n_sets, std::uint64_t seed,
                          const TemplateBank& bank = TemplateBank::defaults());

struct BenchCounts {
  std::size_t complement = 500;
  std::size_t factualqa = 500;
  std::size_t random_choice = 500;
  std::size_t subset_sets = 180;
  std::size_t union_sets = 60;
  std::size_t intersection_sets = 60;
};

/// Per-dataset seed derived from the run seed.
std::uint64_t dataset_seed(std::uint64_t seed, Dataset d) noexcept;

BenchSet generate_dataset(Dataset d, std::size_t count, std::uint64_t seed,
                          const TemplateBank& bank = TemplateBank::defaults());
BenchSet generate_all(const BenchCounts& counts, std::uint64_t seed,
                      const TemplateBank& bank = TemplateBank::defaults());

}  // namespace gss
