#include "gss/bench.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <random>
#include <set>
#include <tuple>

#include "gss/error.hpp"

namespace gss {

namespace {

constexpr std::array<std::pair<Dataset, std::string_view>, 7> kDatasetNames = {{
    {Dataset::Complement, "complement"},
    {Dataset::FactualQA, "factualqa"},
    {Dataset::RandomChoice, "random_choice"},
    {Dataset::Subset, "subset"},
    {Dataset::Union, "union"},
    {Dataset::Intersection, "intersection"},
    {Dataset::External, "external"},
}};

constexpr std::array<std::pair<Rationale, std::string_view>, 7> kRationaleNames = {{
    {Rationale::Complement, "complement"},
    {Rationale::OpenCategory, "open_category"},
    {Rationale::OptionSuperset, "option_superset"},
    {Rationale::Specificity, "specificity"},
    {Rationale::UnionSuperset, "union_superset"},
    {Rationale::IntersectionSubset, "intersection_subset"},
    {Rationale::External, "external"},
}};

// std distributions are implementation-defined; these keep output identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::size_t below(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
    std::uint64_t draw = 0;
    do {
      draw = engine_();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::string padded(std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", n);
  return buf;
}

std::string set_id(Dataset d, std::size_t index) { return std::string(to_string(d)) + "-" + padded(index); }

void require_capacity(std::size_t wanted, std::size_t available, std::string_view what) {
  if (wanted > available) {
    fail(ErrorKind::Configuration, std::string(what) + ": requested " + std::to_string(wanted) +
                                       " but the template bank only yields " + std::to_string(available) +
                                       " unique combinations");
  }
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

std::string join_fragments(const std::vector<std::string>& parts) {
  if (parts.size() == 1) return parts[0];
  if (parts.size() == 2) return parts[0] + " and " + parts[1];
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += i + 1 == parts.size() ? ", and " : ", ";
    out += parts[i];
  }
  return out;
}

std::vector<GenreChoice> all_genre_choices(const TemplateBank& bank, bool require_every_field) {
  std::vector<GenreChoice> out;
  auto options = [&](std::size_t n) {
    std::vector<std::optional<std::size_t>> v;
    if (!require_every_field) v.push_back(std::nullopt);
    for (std::size_t i = 0; i < n; ++i) v.emplace_back(i);
    return v;
  };
  for (std::size_t g = 0; g < bank.genres.size(); ++g) {
    const auto& genre = bank.genres[g];
    for (std::size_t t = 0; t < genre.topics.size(); ++t) {
      for (auto c : options(genre.contexts.size())) {
        for (auto q : options(genre.qualifiers.size())) {
          for (auto o : options(genre.outlines.size())) out.push_back({g, t, c, q, o});
        }
      }
    }
  }
  return out;
}

void put_choice_meta(Prompt& p, const GenreBank& genre, const GenreChoice& c) {
  p.meta["genre"] = genre.name;
  if (c.topic) p.meta["topic"] = genre.topics[*c.topic];
  if (c.context) p.meta["context"] = genre.contexts[*c.context];
  if (c.qualifier) p.meta["qualifier"] = genre.qualifiers[*c.qualifier];
  if (c.outline) p.meta["outline"] = genre.outlines[*c.outline];
}

BenchSet lattice_set(Dataset dataset, std::size_t index, const std::vector<std::string>& texts_by_mask,
                     const std::map<std::string, std::string>& family_meta) {
  BenchSet out;
  const std::string sid = set_id(dataset, index);
  for (std::uint32_t mask = 1; mask < 16; ++mask) {
    Prompt p{sid + "-" + mask_label(mask), texts_by_mask[mask], dataset, sid, family_meta};
    p.meta["mask"] = mask_label(mask);
    out.prompts.push_back(std::move(p));
  }
  for (auto [super, sub] : enumerate_strict_subset_pairs(4)) {
    const std::string sup_id = sid + "-" + mask_label(super);
    const std::string sub_id = sid + "-" + mask_label(sub);
    if (dataset == Dataset::Union) {
      out.pairs.push_back({sup_id, sub_id, dataset, Rationale::UnionSuperset});
    } else {
      out.pairs.push_back({sub_id, sup_id, dataset, Rationale::IntersectionSubset});
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Dataset d) noexcept {
  for (auto [value, name] : kDatasetNames)
    if (value == d) return name;
  return "external";
}

Dataset parse_dataset(std::string_view text) {
  for (auto [value, name] : kDatasetNames)
    if (name == text) return value;
  fail(ErrorKind::Usage, "unknown dataset '" + std::string(text) + "'");
}

std::string_view to_string(Rationale r) noexcept {
  for (auto [value, name] : kRationaleNames)
    if (value == r) return name;
  return "external";
}

Rationale parse_rationale(std::string_view text) {
  for (auto [value, name] : kRationaleNames)
    if (name == text) return value;
  fail(ErrorKind::InvalidInput, "unknown rationale '" + std::string(text) + "'");
}

void BenchSet::append(BenchSet other) {
  prompts.insert(prompts.end(), std::make_move_iterator(other.prompts.begin()),
                 std::make_move_iterator(other.prompts.end()));
  pairs.insert(pairs.end(), std::make_move_iterator(other.pairs.begin()), std::make_move_iterator(other.pairs.end()));
}

void BenchSet::sort() {
  std::sort(prompts.begin(), prompts.end(), [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
  std::sort(pairs.begin(), pairs.end(), [](const PromptPair& a, const PromptPair& b) {
    return std::tie(a.larger_id, a.smaller_id) < std::tie(b.larger_id, b.smaller_id);
  });
}

// ---- rendering ------------------------------------------------------------

std::string format_outline(std::string_view outline) {
  if (outline.find(',') == std::string_view::npos) return std::string(outline);
  std::string out;
  int index = 1;
  std::size_t start = 0;
  while (start <= outline.size()) {
    auto end = outline.find(',', start);
    if (end == std::string_view::npos) end = outline.size();
    auto part = outline.substr(start, end - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (!out.empty()) out += ' ';
    out += std::to_string(index++) + ") " + std::string(part);
    start = end + 1;
  }
  return out;
}

std::string describe(const GenreBank& genre, const GenreChoice& c) {
  std::string s = genre.noun;
  if (c.topic) s += " " + genre.topic_joiner + " " + genre.topics.at(*c.topic);
  if (c.context) s += " " + genre.contexts.at(*c.context);
  if (c.qualifier) s += " that " + genre.qualifiers.at(*c.qualifier);
  if (c.outline) {
    s += c.qualifier ? " and follows the outline: " : " that follows the outline: ";
    s += format_outline(genre.outlines.at(*c.outline));
  }
  return s;
}

std::string base_text(std::string_view description) { return "Generate " + std::string(description); }

std::string complement_text(std::string_view description) {
  return "Generate anything that is not " + std::string(description);
}

std::string mask_label(std::uint32_t mask) {
  std::string s;
  for (int i = 0; i < 4; ++i)
    if (mask & (1u << i)) s.push_back(static_cast<char>('A' + i));
  return s;
}

std::string render_union(const UnionFamily& family, std::uint32_t mask) {
  require(mask > 0 && mask < 16, ErrorKind::InvalidInput, "render_union: mask out of range");
  std::string s = family.stem;
  bool first = true;
  for (int i = 0; i < 4; ++i) {
    if (!(mask & (1u << i))) continue;
    s += first ? " " : " or ";
    s += family.options[static_cast<std::size_t>(i)];
    first = false;
  }
  return s;
}

std::string render_intersection(const IntersectionFamily& family, std::uint32_t mask) {
  require(mask > 0 && mask < 16, ErrorKind::InvalidInput, "render_intersection: mask out of range");
  const bool has_task = (mask & 1u) != 0;
  if (std::popcount(mask) == 1) {
    if (has_task) {
      return family.task_text.empty() ? family.verb + " " + family.task_noun + "." : family.task_text;
    }
    const auto& req = family.requirements[static_cast<std::size_t>(std::countr_zero(mask) - 1)];
    return req.base_text.empty() ? family.verb + " " + family.generic_noun + " " + req.fragment + "."
                                 : req.base_text;
  }
  std::vector<std::string> fragments;
  for (int i = 1; i < 4; ++i)
    if (mask & (1u << i)) fragments.push_back(family.requirements[static_cast<std::size_t>(i - 1)].fragment);
  return family.verb + " " + (has_task ? family.task_noun : family.generic_noun) + " " + join_fragments(fragments) +
         ".";
}

// ---- generators -----------------------------------------------------------

std::vector<std::pair<std::uint32_t, std::uint32_t>> enumerate_strict_subset_pairs(int base_count) {
  require(base_count >= 1 && base_count <= 16, ErrorKind::InvalidInput,
          "enumerate_strict_subset_pairs: base_count must be in [1,16]");
  const std::uint32_t full = (1u << base_count) - 1;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t super = 1; super <= full; ++super) {
    // Walk the proper non-empty submasks of `super`.
    for (std::uint32_t sub = (super - 1) & super; sub != 0; sub = (sub - 1) & super) out.emplace_back(super, sub);
  }
  std::sort(out.begin(), out.end());
  return out;
}

BenchSet gen_complement(std::size_t n, std::uint64_t seed, const TemplateBank& bank) {
  require(n >= 1, ErrorKind::Configuration, "complement: n must be >= 1");
  auto choices = all_genre_choices(bank, false);
  require_capacity(n, choices.size(), "complement");
  Rng rng(seed);
  rng.shuffle(choices);
  BenchSet out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = choices[i];
    const auto& genre = bank.genres[c.genre];
    const std::string desc = describe(genre, c);
    const std::string sid = set_id(Dataset::Complement, i + 1);
    Prompt base{sid + "-base", base_text(desc), Dataset::Complement, sid, {}};
    Prompt comp{sid + "-not", complement_text(desc), Dataset::Complement, sid, {}};
    put_choice_meta(base, genre, c);
    put_choice_meta(comp, genre, c);
    comp.meta["form"] = "complement";
    base.meta["form"] = "base";
    out.pairs.push_back({comp.id, base.id, Dataset::Complement, Rationale::Complement});
    out.prompts.push_back(std::move(base));
    out.prompts.push_back(std::move(comp));
  }
  out.sort();
  return out;
}

BenchSet gen_factualqa(std::size_t n, std::uint64_t seed, const TemplateBank& bank) {
  require(n >= 1, ErrorKind::Configuration, "factualqa: n must be >= 1");
  struct Instance {
    std::size_t template_index;
    std::string fill;
    std::string smaller, larger;
  };
  std::vector<Instance> pool;
  std::set<std::pair<std::string, std::string>> seen;
  auto add = [&](std::size_t t, std::string fill, std::string smaller, std::string larger) {
    if (seen.emplace(smaller, larger).second) pool.push_back({t, std::move(fill), std::move(smaller), std::move(larger)});
  };
  for (std::size_t t = 0; t < bank.factual_templates.size(); ++t) {
    const auto& tpl = bank.factual_templates[t];
    const bool uses_country = (tpl.smaller + tpl.larger).find("{country}") != std::string::npos;
    const bool uses_continent = (tpl.smaller + tpl.larger).find("{continent}") != std::string::npos;
    if (uses_country) {
      for (const auto& c : bank.countries) {
        auto fill = [&](const std::string& s) {
          return replace_all(replace_all(s, "{country}", c.name), "{continent}", c.continent);
        };
        add(t, c.name, fill(tpl.smaller), fill(tpl.larger));
      }
    } else if (uses_continent) {
      for (const auto& cont : bank.continents) {
        add(t, cont, replace_all(tpl.smaller, "{continent}", cont), replace_all(tpl.larger, "{continent}", cont));
      }
    } else {
      add(t, "", tpl.smaller, tpl.larger);
    }
  }
  require_capacity(n, pool.size(), "factualqa");
  Rng rng(seed);
  rng.shuffle(pool);
  BenchSet out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = pool[i];
    const std::string sid = set_id(Dataset::FactualQA, i + 1);
    std::map<std::string, std::string> meta{{"template", std::to_string(inst.template_index)}};
    if (!inst.fill.empty()) meta["fill"] = inst.fill;
    Prompt specific{sid + "-specific", inst.smaller, Dataset::FactualQA, sid, meta};
    Prompt open{sid + "-open", inst.larger, Dataset::FactualQA, sid, meta};
    out.pairs.push_back({open.id, specific.id, Dataset::FactualQA, Rationale::OpenCategory});
    out.prompts.push_back(std::move(specific));
    out.prompts.push_back(std::move(open));
  }
  out.sort();
  return out;
}

BenchSet gen_random_choice(std::size_t n, std::uint64_t seed, const TemplateBank& bank) {
  constexpr std::size_t kSmall = 2;
  constexpr std::size_t kLarge = 10;
  require(n >= 1, ErrorKind::Configuration, "random_choice: n must be >= 1");
  require(!bank.categories.empty(), ErrorKind::Configuration, "random_choice: no categories in bank");
  for (const auto& c : bank.categories) {
    require(c.items.size() >= kLarge, ErrorKind::Configuration,
            "random_choice: category '" + c.name + "' has fewer than 10 items");
  }
  Rng rng(seed);
  std::set<std::pair<std::string, std::string>> seen;
  BenchSet out;
  auto join = [](const std::vector<std::string>& items, std::size_t count, std::string_view sep) {
    std::string s;
    for (std::size_t i = 0; i < count; ++i) s += (i ? std::string(sep) : std::string()) + items[i];
    return s;
  };
  const std::size_t max_attempts = 1000 * n;
  std::size_t attempts = 0;
  for (std::size_t i = 0; i < n;) {
    if (++attempts > max_attempts) {
      fail(ErrorKind::Configuration, "random_choice: could not draw " + std::to_string(n) + " distinct pairs");
    }
    const auto& cat = bank.categories[rng.below(bank.categories.size())];
    std::vector<std::string> items = cat.items;
    rng.shuffle(items);
    items.resize(kLarge);
    // The two-option prompt picks from the ten listed in the larger prompt.
    std::vector<std::string> pick = items;
    rng.shuffle(pick);
    const std::string larger = "Choose one from the following: " + join(items, kLarge, ", ") + ".";
    const std::string smaller = "Choose one from the following: " + join(pick, kSmall, ", ") + ".";
    if (!seen.emplace(smaller, larger).second) continue;
    ++i;
    const std::string sid = set_id(Dataset::RandomChoice, i);
    Prompt small{sid + "-n2", smaller, Dataset::RandomChoice, sid,
                 {{"category", cat.name}, {"options", join(pick, kSmall, "|")}}};
    Prompt large{sid + "-n10", larger, Dataset::RandomChoice, sid,
                 {{"category", cat.name}, {"options", join(items, kLarge, "|")}}};
    out.pairs.push_back({large.id, small.id, Dataset::RandomChoice, Rationale::OptionSuperset});
    out.prompts.push_back(std::move(small));
    out.prompts.push_back(std::move(large));
  }
  out.sort();
  return out;
}

BenchSet gen_subset(std::size_t n_sets, std::uint64_t seed, const TemplateBank& bank) {
  require(n_sets >= 1, ErrorKind::Configuration, "subset: n_sets must be >= 1");
  auto chains = all_genre_choices(bank, true);
  require_capacity(n_sets, chains.size(), "subset");
  Rng rng(seed);
  rng.shuffle(chains);
  BenchSet out;
  for (std::size_t i = 0; i < n_sets; ++i) {
    const auto& full = chains[i];
    const auto& genre = bank.genres[full.genre];
    const std::string sid = set_id(Dataset::Subset, i + 1);
    std::array<GenreChoice, 5> levels{};
    levels[0] = {full.genre, {}, {}, {}, {}};
    levels[1] = {full.genre, full.topic, {}, {}, {}};
    levels[2] = {full.genre, full.topic, full.context, {}, {}};
    levels[3] = {full.genre, full.topic, full.context, full.qualifier, {}};
    levels[4] = full;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      Prompt p{sid + "-l" + std::to_string(l + 1), "Write " + describe(genre, levels[l]), Dataset::Subset, sid, {}};
      put_choice_meta(p, genre, levels[l]);
      p.meta["level"] = std::to_string(l + 1);
      out.prompts.push_back(std::move(p));
    }
    for (std::size_t a = 1; a <= 5; ++a) {
      for (std::size_t b = a + 1; b <= 5; ++b) {
        out.pairs.push_back({sid + "-l" + std::to_string(a), sid + "-l" + std::to_string(b), Dataset::Subset,
                             Rationale::Specificity});
      }
    }
  }
  out.sort();
  return out;
}

BenchSet gen_union(std::size_t n_sets, std::uint64_t seed, const TemplateBank& bank) {
  require(n_sets >= 1, ErrorKind::Configuration, "union: n_sets must be >= 1");
  std::vector<UnionFamily> families;
  std::set<std::pair<std::string, std::array<std::string, 4>>> seen;
  for (const auto& f : bank.union_fixed) {
    if (seen.emplace(f.stem, f.options).second) families.push_back(f);
  }
  std::vector<UnionFamily> sampled;
  for (const auto& stem : bank.union_stems) {
    const std::size_t m = stem.options.size();
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        for (std::size_t c = b + 1; c < m; ++c)
          for (std::size_t d = c + 1; d < m; ++d) {
            UnionFamily f{stem.stem, {stem.options[a], stem.options[b], stem.options[c], stem.options[d]}};
            if (!seen.count({f.stem, f.options})) sampled.push_back(std::move(f));
          }
  }
  Rng rng(seed);
  rng.shuffle(sampled);
  // Sampled families are unique by construction; only fixed/sampled overlap needs the seen-set.
  families.insert(families.end(), sampled.begin(), sampled.end());
  require_capacity(n_sets, families.size(), "union");
  BenchSet out;
  for (std::size_t i = 0; i < n_sets; ++i) {
    const auto& f = families[i];
    std::vector<std::string> texts(16);
    for (std::uint32_t mask = 1; mask < 16; ++mask) texts[mask] = render_union(f, mask);
    out.append(lattice_set(Dataset::Union, i + 1, texts, {{"stem", f.stem}}));
  }
  out.sort();
  return out;
}

BenchSet gen_intersection(std::size_t n_sets, std::uint64_t seed, const TemplateBank& bank) {
  require(n_sets >= 1, ErrorKind::Configuration, "intersection: n_sets must be >= 1");
  const auto& g = bank.intersection_grammar;
  std::vector<IntersectionFamily> families = bank.intersection_fixed;
  std::set<std::vector<std::string>> seen;
  auto key = [](const IntersectionFamily& f) {
    return std::vector<std::string>{f.verb, f.task_noun, f.requirements[0].fragment, f.requirements[1].fragment,
                                    f.requirements[2].fragment};
  };
  for (const auto& f : families) seen.insert(key(f));

  std::vector<IntersectionFamily> sampled;
  const std::size_t n_cat = g.requirement_categories.size();
  for (const auto& task : g.tasks) {
    // One fragment from each of three distinct categories, categories in bank order.
    for (std::size_t c0 = 0; c0 < n_cat; ++c0)
      for (std::size_t c1 = c0 + 1; c1 < n_cat; ++c1)
        for (std::size_t c2 = c1 + 1; c2 < n_cat; ++c2) {
          const auto& f0 = g.requirement_categories[c0].second;
          const auto& f1 = g.requirement_categories[c1].second;
          const auto& f2 = g.requirement_categories[c2].second;
          for (const auto& a : f0)
            for (const auto& b : f1)
              for (const auto& c : f2) {
                IntersectionFamily fam{task.verb, task.noun, g.generic_noun, "", {{{a, ""}, {b, ""}, {c, ""}}}};
                if (!seen.count(key(fam))) sampled.push_back(std::move(fam));
              }
        }
  }
  Rng rng(seed);
  rng.shuffle(sampled);
  families.insert(families.end(), sampled.begin(), sampled.end());
  require_capacity(n_sets, families.size(), "intersection");
  BenchSet out;
  for (std::size_t i = 0; i < n_sets; ++i) {
    const auto& f = families[i];
    std::vector<std::string> texts(16);
    for (std::uint32_t mask = 1; mask < 16; ++mask) texts[mask] = render_intersection(f, mask);
    out.append(lattice_set(Dataset::Intersection, i + 1, texts, {{"task", f.task_noun}}));
  }
  out.sort();
  return out;
}

std::uint64_t dataset_seed(std::uint64_t seed, Dataset d) noexcept {
  // splitmix64 finalizer over (seed, dataset ordinal)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(d) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

BenchSet generate_dataset(Dataset d, std::size_t count, std::uint64_t seed, const TemplateBank& bank) {
  const std::uint64_t s = dataset_seed(seed, d);
  switch (d) {
    case Dataset::Complement: return gen_complement(count, s, bank);
    case Dataset::FactualQA: return gen_factualqa(count, s, bank);
    case Dataset::RandomChoice: return gen_random_choice(count, s, bank);
    case Dataset::Subset: return gen_subset(count, s, bank);
    case Dataset::Union: return gen_union(count, s, bank);
    case Dataset::Intersection: return gen_intersection(count, s, bank);
    case Dataset::External: break;
  }
  fail(ErrorKind::Usage, "the external dataset is loaded from files, not generated");
}

BenchSet generate_all(const BenchCounts& counts, std::uint64_t seed, const TemplateBank& bank) {
  BenchSet out;
  out.append(generate_dataset(Dataset::Complement, counts.complement, seed, bank));
  out.append(generate_dataset(Dataset::FactualQA, counts.factualqa, seed, bank));
  out.append(generate_dataset(Dataset::RandomChoice, counts.random_choice, seed, bank));
  out.append(generate_dataset(Dataset::Subset, counts.subset_sets, seed, bank));
  out.append(generate_dataset(Dataset::Union, counts.union_sets, seed, bank));
  out.append(generate_dataset(Dataset::Intersection, counts.intersection_sets, seed, bank));
  out.sort();
  return out;
}

}  // namespace gss
