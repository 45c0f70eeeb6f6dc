#include "gss/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "gss/error.hpp"

namespace gss {

namespace {

int dataset_rank(const std::string& name) {
  try {
    return static_cast<int>(parse_dataset(name));
  } catch (const Error&) {
    return 1 << 20;
  }
}

Selection select(std::vector<std::pair<std::string, double>> candidates, std::string_view what) {
  require(!candidates.empty(), ErrorKind::InvalidInput, std::string(what) + ": no scorable reports");
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Selection s{candidates.front().first, candidates.front().second, {}};
  for (std::size_t i = 1; i < candidates.size() && candidates[i].second == s.macro_average; ++i) {
    s.tied_with.push_back(candidates[i].first);
  }
  return s;
}

}  // namespace

AccuracyReport pairwise_accuracy(std::span<const MetricScore> scores, std::span<const PromptPair> pairs,
                                 std::string_view model_id, std::string_view metric_name, Direction direction) {
  std::unordered_map<std::string, double> value_of;
  for (const auto& s : scores) {
    if (s.model_id != model_id || s.metric_name != metric_name) continue;
    const bool fresh = value_of.emplace(s.prompt_id, s.value).second;
    require(fresh, ErrorKind::InvalidInput,
            "duplicate score for prompt '" + s.prompt_id + "' (" + std::string(model_id) + ", " +
                std::string(metric_name) + ")");
  }

  AccuracyReport report;
  report.model_id = model_id;
  report.metric_name = metric_name;
  report.direction = direction;
  std::map<std::string, DatasetAccuracy> cells;
  for (const auto& p : pairs) {
    const std::string dataset(to_string(p.dataset));
    const auto larger = value_of.find(p.larger_id);
    const auto smaller = value_of.find(p.smaller_id);
    if (larger == value_of.end() || smaller == value_of.end()) {
      report.exclusions.push_back(
          {p.larger_id, p.smaller_id, dataset, larger == value_of.end() ? p.larger_id : p.smaller_id});
      continue;
    }
    auto& cell = cells[dataset];
    cell.dataset = dataset;
    ++cell.n_pairs;
    const double a = larger->second;
    const double b = smaller->second;
    if (a == b) {
      ++cell.n_ties;
    } else if (direction == Direction::HigherIsLarger ? a > b : a < b) {
      ++cell.n_correct;
    }
  }

  for (auto& [name, cell] : cells) {
    const double n = static_cast<double>(cell.n_pairs);
    cell.accuracy = static_cast<double>(cell.n_correct) / n;
    cell.ci_halfwidth = 1.96 * std::sqrt(cell.accuracy * (1.0 - cell.accuracy) / n);
    report.datasets.push_back(cell);
  }
  std::stable_sort(report.datasets.begin(), report.datasets.end(), [](const auto& a, const auto& b) {
    const int ra = dataset_rank(a.dataset);
    const int rb = dataset_rank(b.dataset);
    return ra != rb ? ra < rb : a.dataset < b.dataset;
  });
  if (!report.datasets.empty()) {
    double sum = 0.0;
    for (const auto& d : report.datasets) sum += d.accuracy;
    report.macro_average = sum / static_cast<double>(report.datasets.size());
  }
  return report;
}

std::vector<AccuracyReport> evaluate_all(std::span<const MetricScore> scores, std::span<const PromptPair> pairs,
                                         const MetricConfig& cfg) {
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& s : scores) cells.emplace(s.model_id, s.metric_name);
  std::vector<AccuracyReport> out;
  out.reserve(cells.size());
  for (const auto& [model, metric_name] : cells) {
    out.push_back(pairwise_accuracy(scores, pairs, model, metric_name, cfg.direction_for(metric_name)));
  }
  return out;
}

Selection best_metric(std::span<const AccuracyReport> reports, std::string_view model_id) {
  std::vector<std::pair<std::string, double>> candidates;
  for (const auto& r : reports) {
    if (r.model_id == model_id && r.macro_average) candidates.emplace_back(r.metric_name, *r.macro_average);
  }
  return select(std::move(candidates), "best_metric(" + std::string(model_id) + ")");
}

Selection best_model(std::span<const AccuracyReport> reports, std::string_view metric_name) {
  std::vector<std::pair<std::string, double>> candidates;
  for (const auto& r : reports) {
    if (r.metric_name == metric_name && r.macro_average) candidates.emplace_back(r.model_id, *r.macro_average);
  }
  return select(std::move(candidates), "best_model(" + std::string(metric_name) + ")");
}

}  // namespace gss
