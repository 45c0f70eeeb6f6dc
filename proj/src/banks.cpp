#include <fstream>

#include <nlohmann/json.hpp>

#include "gss/bench.hpp"
#include "gss/error.hpp"

namespace gss {

namespace {

TemplateBank build_defaults() {
  TemplateBank b;

  b.genres = {
      {"email",
       "an email",
       "about",
       {"job opportunities", "an upcoming conference", "a new product launch", "a team milestone"},
       {"at a tech firm", "for remote engineers", "in the non-profit sector"},
       {"includes a discussion of my qualifications", "asks about remote-work policies"},
       {"Greeting, Purpose, Qualifications, Next steps", "Subject, Body, Closing"}},
      {"poem",
       "a poem",
       "about",
       {"autumn leaves", "lost love", "a starry night", "the ocean's whispers"},
       {"in a small town", "during wartime", "over the desert"},
       {"employs vivid imagery", "uses iambic pentameter", "is limited to 14 lines"},
       {"haiku (5-7-5)", "limerick", "free verse"}},
      {"python",
       "a Python program",
       "for",
       {"sorting a list", "scraping a website", "converting CSV to JSON", "analyzing text sentiment"},
       {"using merge sort", "handling pagination", "with nested objects"},
       {"includes docstrings", "uses type hints", "avoids external libraries"},
       {"main(), helper functions, guard block", "CLI interface"}},
      {"story",
       "a short story",
       "about",
       {"a time-travel mishap", "an unlikely friendship", "a dystopian future", "a family reunion"},
       {"in Victorian London", "between a robot and a child", "ruled by algorithms"},
       {"is written in first person", "contains a twist ending", "is under 500 words"},
       {"Freytag's pyramid", "journal entries", "letters format"}},
      {"persona",
       "a persona",
       "of",
       {"a tech-savvy college student", "a health-conscious parent", "a budget traveler",
        "a small business owner"},
       {"majoring in computer science", "with two toddlers", "backpacking in Southeast Asia"},
       {"includes demographic info", "identifies pain points", "lists preferred communication channels"},
       {"Background, Goals, Challenges", "bullet points", "short narrative example"}},
  };

  b.factual_templates = {
      // Country templates.
      {"Who was the first president of {country}?", "Name a president of {country}."},
      {"What is the capital of {country}?", "Name a city in {country}."},
      {"What is the largest river in {country}?", "Name a river in {country}."},
      {"What is the tallest mountain in {country}?", "Name a mountain in {country}."},
      {"What is the most populated city in {country}?", "Name a city in {country}."},
      {"What is the official language of {country}?", "Name a language spoken in {country}."},
      {"What is the currency of {country}?", "Name a currency used in {continent}."},
      {"What is the national animal of {country}?", "Name an animal that lives in {country}."},
      {"What is the national dish of {country}?", "Name a dish eaten in {country}."},
      {"What is the largest lake in {country}?", "Name a lake in {country}."},
      {"What is the national flower of {country}?", "Name a flower that grows in {country}."},
      {"What is the oldest university in {country}?", "Name a university in {country}."},
      {"What is the busiest airport in {country}?", "Name an airport in {country}."},
      {"What is the national sport of {country}?", "Name a sport played in {country}."},
      {"What is the busiest port in {country}?", "Name a port city in {country}."},
      {"What is the largest stadium in {country}?", "Name a stadium in {country}."},
      {"What is the largest national park in {country}?", "Name a national park in {country}."},
      {"Who is the most famous painter from {country}?", "Name a painter from {country}."},
      {"Who is the best-selling author from {country}?", "Name an author from {country}."},
      {"What is the most visited museum in {country}?", "Name a museum in {country}."},
      {"What is the tallest building in {country}?", "Name a building in {country}."},
      {"What is the largest company headquartered in {country}?", "Name a company headquartered in {country}."},
      {"What is the most widely read newspaper in {country}?", "Name a newspaper published in {country}."},
      {"What is the national anthem of {country}?", "Name a song from {country}."},
      {"What is the southernmost city in {country}?", "Name a city in {country}."},
      {"What is the longest highway in {country}?", "Name a road in {country}."},
      {"What is the most popular tourist attraction in {country}?", "Name a tourist attraction in {country}."},
      {"What is the oldest city in {country}?", "Name a city in {country}."},
      {"What is the deepest lake in {country}?", "Name a lake in {country}."},
      {"What is the largest bank in {country}?", "Name a bank in {country}."},
      {"What is the highest waterfall in {country}?", "Name a waterfall in {country}."},
      // Continent templates.
      {"What is the longest river in {continent}?", "Name a river in {continent}."},
      {"What is the highest mountain in {continent}?", "Name a mountain in {continent}."},
      {"What is the largest country in {continent}?", "Name a country in {continent}."},
      {"What is the most populated city in {continent}?", "Name a city in {continent}."},
      {"What is the largest lake in {continent}?", "Name a lake in {continent}."},
      {"What is the largest desert in {continent}?", "Name a desert in {continent}."},
      {"What is the smallest country in {continent}?", "Name a country in {continent}."},
      {"What is the most widely spoken language in {continent}?", "Name a language spoken in {continent}."},
      {"What is the tallest building in {continent}?", "Name a building in {continent}."},
      // Fixed questions.
      {"Who was the 16th president of the United States?", "Who was a president of the United States?"},
      {"What is the fastest land animal?", "Name a land animal."},
      {"What is the largest planet in the solar system?", "Name a planet in the solar system."},
      {"What is the chemical symbol for gold?", "Name a chemical element."},
      {"What is the largest ocean on Earth?", "Name an ocean on Earth."},
      {"What is the smallest prime number?", "Name a prime number."},
      {"Who wrote Romeo and Juliet?", "Name a playwright."},
      {"What is the tallest mountain in the world?", "Name a mountain."},
      {"What is the longest river in the world?", "Name a river."},
      {"What is the hardest natural substance?", "Name a mineral."},
      {"Who painted the Mona Lisa?", "Name a Renaissance painter."},
      {"What is the largest mammal?", "Name a mammal."},
      {"What is the closest star to Earth?", "Name a star."},
      {"Who was the first person to walk on the Moon?", "Name an astronaut."},
      {"What is the most abundant gas in Earth's atmosphere?", "Name a gas in Earth's atmosphere."},
      {"What is the largest bone in the human body?", "Name a bone in the human body."},
      {"Who composed the Moonlight Sonata?", "Name a classical composer."},
      {"What is the fastest bird?", "Name a bird."},
      {"What is the largest desert in the world?", "Name a desert."},
      {"Who invented the telephone?", "Name an inventor."},
  };

  b.countries = {
      {"Argentina", "South America"}, {"Australia", "Australia"},    {"Bangladesh", "Asia"},
      {"Belgium", "Europe"},          {"Brazil", "South America"},   {"Canada", "North America"},
      {"Chile", "South America"},     {"China", "Asia"},             {"Colombia", "South America"},
      {"Denmark", "Europe"},          {"Egypt", "Africa"},           {"Ethiopia", "Africa"},
      {"Finland", "Europe"},          {"France", "Europe"},          {"Germany", "Europe"},
      {"India", "Asia"},              {"Indonesia", "Asia"},         {"Iran", "Asia"},
      {"Iraq", "Asia"},               {"Italy", "Europe"},           {"Japan", "Asia"},
      {"Kenya", "Africa"},            {"Mexico", "North America"},   {"Netherlands", "Europe"},
      {"Nigeria", "Africa"},          {"Pakistan", "Asia"},          {"Russia", "Europe"},
      {"South Africa", "Africa"},     {"South Korea", "Asia"},       {"United Kingdom", "Europe"},
  };
  b.continents = {"Asia", "Africa", "Europe", "North America", "South America", "Australia"};

  b.categories = {
      {"animals", {"cat", "dog", "sheep", "horse", "bird", "whale", "lion", "tiger", "bear", "elephant", "giraffe", "zebra"}},
      {"colors", {"red", "blue", "green", "yellow", "black", "white", "orange", "purple", "pink", "gray", "brown", "cyan"}},
      {"numbers", {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16", "17", "18", "19", "20"}},
      {"fruits", {"apple", "banana", "cherry", "grape", "kiwi", "lemon", "mango", "orange", "pear", "peach", "plum", "melon"}},
      {"vehicles", {"car", "truck", "bus", "motorcycle", "bicycle", "scooter", "van", "train", "boat", "plane", "helicopter", "submarine"}},
  };

  b.union_fixed = {
      {"Come up with an idea for", {"breakfast", "lunch", "dinner", "afternoon snack"}},
      {"Come up with an idea for", {"a song", "a poem", "a movie", "a book"}},
  };
  b.union_stems = {
      {"Come up with an idea for", {"breakfast", "lunch", "dinner", "afternoon snack", "dessert", "brunch"}},
      {"Come up with an idea for", {"a song", "a poem", "a movie", "a book", "a painting", "a podcast"}},
      {"Name a", {"fruit", "vegetable", "grain", "nut", "spice", "herb"}},
      {"Suggest a hobby involving", {"music", "painting", "cooking", "gardening", "hiking", "photography"}},
      {"Recommend a place to visit in", {"spring", "summer", "autumn", "winter"}},
      {"Write a short story about", {"a dragon", "a robot", "a pirate", "a detective", "a ghost", "an astronaut"}},
      {"Suggest a name for", {"a cat", "a dog", "a parrot", "a goldfish", "a hamster", "a rabbit"}},
      {"Describe", {"a sunrise", "a sunset", "a thunderstorm", "a snowfall", "a rainbow"}},
      {"Plan a weekend trip to", {"the beach", "the mountains", "a big city", "the countryside", "a lake"}},
      {"Give me a recipe for", {"soup", "salad", "pasta", "curry", "tacos", "pancakes"}},
      {"Suggest a gift for", {"a teacher", "a coworker", "a grandparent", "a child", "a neighbor"}},
      {"Write a poem about", {"love", "friendship", "the sea", "the moon", "winter", "a city"}},
      {"Recommend a board game for", {"two players", "a family night", "a party", "a rainy afternoon", "kids"}},
      {"Name an animal that lives in", {"the ocean", "the desert", "the rainforest", "the arctic", "a river"}},
      {"Suggest a workout for", {"the morning", "a lunch break", "the evening", "a rest day", "a hotel room"}},
      {"Invent a festival celebrating", {"bread", "kites", "lanterns", "rivers", "books", "stars"}},
      {"Write a slogan for", {"a bakery", "a bookstore", "a gym", "a coffee shop", "a bike shop"}},
      {"Suggest a color for", {"a kitchen", "a bedroom", "a front door", "a logo", "a car"}},
  };

  b.intersection_fixed = {
      {"Compose",
       "an email",
       "a piece",
       "Compose an email.",
       {{{"with a word count of approximately 200 words", "Please write a piece that is 200 words long."},
         {"consisting of three paragraphs", "Please write something that is three paragraphs in length."},
         {"utilizing formal language", "Compose a piece utilizing formal language."}}}},
      {"Write",
       "a poem",
       "a piece",
       "Please write a poem.",
       {{{"using rhyming couplets", ""}, {"limited to 8 lines", ""}, {"about the ocean", ""}}}},
  };

  b.intersection_grammar.generic_noun = "a piece";
  b.intersection_grammar.tasks = {
      {"Compose", "an email"},         {"Write", "a poem"},          {"Write", "a short story"},
      {"Write", "an essay"},           {"Write", "a blog post"},     {"Compose", "a letter"},
      {"Write", "a speech"},           {"Write", "a product description"}, {"Write", "a song"},
      {"Write", "a news article"},     {"Compose", "a cover letter"}, {"Write", "a book review"},
      {"Write", "a movie review"},     {"Write", "a travel guide"},  {"Write", "a recipe"},
      {"Write", "a toast"},            {"Compose", "a thank-you note"}, {"Write", "a diary entry"},
      {"Write", "a dialogue"},         {"Write", "a press release"},
  };
  b.intersection_grammar.requirement_categories = {
      {"length",
       {"with a word count of approximately 200 words", "of no more than 100 words", "of roughly 300 words",
        "limited to 8 lines"}},
      {"structure",
       {"consisting of three paragraphs", "organized as a numbered list", "divided into two sections",
        "with a title"}},
      {"style",
       {"utilizing formal language", "using a humorous tone", "written in the second person",
        "using rhyming couplets"}},
      {"content",
       {"that mentions the color blue", "that includes a question", "that ends with a call to action",
        "set in a coastal town"}},
  };
  return b;
}

}  // namespace

const TemplateBank& TemplateBank::defaults() {
  static const TemplateBank bank = build_defaults();
  return bank;
}

// ---- JSON mapping ---------------------------------------------------------

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GenreBank, name, noun, topic_joiner, topics, contexts, qualifiers, outlines)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FactualTemplate, smaller, larger)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Country, name, continent)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CategoryBank, name, items)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(UnionStem, stem, options)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(UnionFamily, stem, options)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Requirement, fragment, base_text)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IntersectionFamily, verb, task_noun, generic_noun, task_text, requirements)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IntersectionGrammar::Task, verb, noun)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IntersectionGrammar, tasks, generic_noun, requirement_categories)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TemplateBank, genres, factual_templates, countries, continents, categories,
                                   union_fixed, union_stems, intersection_fixed, intersection_grammar)

TemplateBank load_template_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Configuration, "cannot open template bank " + path.string());
  try {
    // Missing sections fall back to the shipped defaults.
    nlohmann::json merged = TemplateBank::defaults();
    merged.merge_patch(nlohmann::json::parse(in));
    return merged.get<TemplateBank>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, "template bank " + path.string() + ": " + e.what());
  }
}

void save_template_bank(const TemplateBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Configuration, "cannot write " + path.string());
  out << nlohmann::json(bank).dump(2) << '\n';
}

}  // namespace gss
