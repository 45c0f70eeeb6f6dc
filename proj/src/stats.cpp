#include "gss/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "gss/error.hpp"

namespace gss {

namespace {

// Gauss-Kronrod 7/15 on [-1, 1]; abscissae in decreasing order, centre last.
constexpr std::array<double, 8> kXgk = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                        0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd Kronrod nodes kXgk[1], [3], [5], [7].
constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
Segment gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    const double s = f(c - dx) + f(c + dx);
    kronrod += kWgk[i] * s;
    if (i % 2 == 1) gauss += kWg[i / 2] * s;
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

/// Global adaptive quadrature: bisect the worst segment until the summed
/// error estimate meets the relative tolerance.
template <typename F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-8) {
  std::priority_queue<Segment> heap;
  heap.push(gk15(f, a, b));
  double value = heap.top().value;
  double error = heap.top().error;
  for (int iter = 0; iter < 5000; ++iter) {
    if (error <= std::max(rel_tol * std::abs(value), 1e-300)) break;
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = gk15(f, worst.a, mid);
    const Segment right = gk15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed accumulated rounding from the running updates.
  double total = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    heap.pop();
  }
  return total;
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

void require_finite_values(std::span<const double> v, std::string_view what) {
  for (double x : v) require(std::isfinite(x), ErrorKind::InvalidInput, std::string(what) + ": non-finite value");
}

}  // namespace

double student_t_pdf(double x, double df) {
  require(df > 0 && std::isfinite(df), ErrorKind::InvalidInput, "student_t_pdf: df must be positive");
  const double log_norm = std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
  return std::exp(log_norm - 0.5 * (df + 1) * std::log1p(x * x / df));
}

double student_t_two_sided_p(double t, double df) {
  require(df > 0 && std::isfinite(df), ErrorKind::InvalidInput, "student_t_two_sided_p: df must be positive");
  require(!std::isnan(t), ErrorKind::InvalidInput, "student_t_two_sided_p: t is NaN");
  const double a = std::abs(t);
  if (a == 0.0) return 1.0;
  if (std::isinf(a)) return 0.0;
  if (a <= 1.0) {
    const double body = integrate([df](double x) { return student_t_pdf(x, df); }, 0.0, a);
    return std::clamp(1.0 - 2.0 * body, 0.0, 1.0);
  }
  // Tail mass with x = a / w maps [a, inf) onto (0, 1]; no node sits on w = 0.
  const double tail = integrate([a, df](double w) { return student_t_pdf(a / w, df) * a / (w * w); }, 0.0, 1.0);
  return std::clamp(2.0 * tail, 0.0, 1.0);
}

double student_t_cdf(double x, double df) {
  const double p = student_t_two_sided_p(x, df);
  return x >= 0 ? 1.0 - 0.5 * p : 0.5 * p;
}

std::string_view to_string(StarBand band) noexcept {
  switch (band) {
    case StarBand::P001: return "***";
    case StarBand::P01: return "**";
    case StarBand::P05: return "*";
    case StarBand::NotSignificant: break;
  }
  return "ns";
}

StarBand star_band(double p) noexcept {
  if (p < 0.001) return StarBand::P001;
  if (p < 0.01) return StarBand::P01;
  if (p < 0.05) return StarBand::P05;
  return StarBand::NotSignificant;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b, Direction expected) {
  require(a.size() >= 2 && b.size() >= 2, ErrorKind::InvalidInput,
          "welch_t_test: each group needs at least 2 values (got " + std::to_string(a.size()) + " and " +
              std::to_string(b.size()) + ")");
  require_finite_values(a, "welch_t_test");
  require_finite_values(b, "welch_t_test");
  TTestResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_a = mean_of(a);
  r.mean_b = mean_of(b);
  const double qa = sample_variance(a, r.mean_a) / static_cast<double>(r.n_a);
  const double qb = sample_variance(b, r.mean_b) / static_cast<double>(r.n_b);
  const double se2 = qa + qb;
  require(se2 > 0.0, ErrorKind::Degenerate, "welch_t_test: both groups have zero variance");
  r.t_statistic = (r.mean_a - r.mean_b) / std::sqrt(se2);
  r.degrees_of_freedom =
      se2 * se2 / (qa * qa / static_cast<double>(r.n_a - 1) + qb * qb / static_cast<double>(r.n_b - 1));
  r.p_value = student_t_two_sided_p(r.t_statistic, r.degrees_of_freedom);
  r.stars = star_band(r.p_value);
  r.direction_correct = expected == Direction::HigherIsLarger ? r.t_statistic > 0 : r.t_statistic < 0;
  return r;
}

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::InvalidInput, "pearson_r: length mismatch");
  require(x.size() >= 3, ErrorKind::InvalidInput, "pearson_r: need at least 3 pairs");
  require_finite_values(x, "pearson_r");
  require_finite_values(y, "pearson_r");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::Degenerate, "pearson_r: constant input");
  CorrelationResult out;
  out.n = x.size();
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(out.n - 2);
  const double rest = 1.0 - out.r * out.r;
  if (rest <= 0.0) {
    out.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), out.r);
    out.p_value = 0.0;
  } else {
    out.t_statistic = out.r * std::sqrt(df / rest);
    out.p_value = student_t_two_sided_p(out.t_statistic, df);
  }
  return out;
}

double rank_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorKind::InvalidInput, "rank_auc: length mismatch");
  require_finite_values(scores, "rank_auc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, ErrorKind::InvalidInput, "rank_auc: labels must be 0 or 1");
    n_pos += labels[i] == 1 ? 1 : 0;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorKind::Degenerate, "rank_auc: labels contain a single class");
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    const double midrank = 0.5 * static_cast<double>(start + 1 + end);  // ranks start+1 .. end
    for (std::size_t i = start; i < end; ++i) {
      if (labels[order[i]] == 1) positive_rank_sum += midrank;
    }
    start = end;
  }
  const double np = static_cast<double>(n_pos);
  const double u = positive_rank_sum - np * (np + 1) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

ClassifierResult binary_threshold_eval(std::span<const double> scores, std::span<const int> labels, double threshold) {
  ClassifierResult out;
  out.auc = rank_auc(scores, labels);
  out.threshold = threshold;
  out.n = scores.size();
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  auto f1 = [](std::size_t hit, std::size_t false_pos, std::size_t miss) {
    const std::size_t denom = 2 * hit + false_pos + miss;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(hit) / static_cast<double>(denom);
  };
  out.accuracy = static_cast<double>(tp + tn) / static_cast<double>(out.n);
  out.macro_f1 = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
  return out;
}

GroupSummaryReport group_summary(std::span<const double> values, std::span<const std::string> group_labels,
                                 std::span<const std::string> expected_groups) {
  require(values.size() == group_labels.size(), ErrorKind::InvalidInput, "group_summary: length mismatch");
  require_finite_values(values, "group_summary");
  std::vector<std::string> order;
  std::vector<std::vector<double>> members;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto it = std::find(order.begin(), order.end(), group_labels[i]);
    if (it == order.end()) {
      order.push_back(group_labels[i]);
      members.emplace_back();
      it = order.end() - 1;
    }
    members[static_cast<std::size_t>(it - order.begin())].push_back(values[i]);
  }
  GroupSummaryReport report;
  for (std::size_t g = 0; g < order.size(); ++g) {
    GroupSummary s;
    s.group = order[g];
    s.n = members[g].size();
    s.mean = mean_of(members[g]);
    if (s.n >= 2) {
      s.ci_halfwidth = 1.96 * std::sqrt(sample_variance(members[g], s.mean) / static_cast<double>(s.n));
    } else {
      report.notes.push_back("group '" + s.group + "' has a single value; interval set to 0");
    }
    report.groups.push_back(std::move(s));
  }
  for (const auto& g : expected_groups) {
    if (std::find(order.begin(), order.end(), g) == order.end()) {
      report.notes.push_back("group '" + g + "' is empty and was excluded");
    }
  }
  return report;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  require_finite_values(values, "minmax_normalize");
  std::vector<double> out(values.size(), 0.5);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (range == 0.0) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

}  // namespace gss
