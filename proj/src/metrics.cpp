#include "tabembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

namespace tabembed {

namespace {

void check_binary(const std::vector<double>& scores, const LabelVector& labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kLengthMismatch, "scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                                         std::to_string(labels.size()) + ")");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double auroc(const std::vector<double>& scores, const LabelVector& labels) {
  check_binary(scores, labels);
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCode::kSingleClass, "AUROC needs both classes");
  for (double s : scores) {
    if (std::isnan(s)) fail(ErrorCode::kNonFiniteValues, "AUROC scores contain NaN");
  }
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::kInvalidArgument, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

MetricCI bootstrap_ci(const Statistic& statistic, const std::vector<double>& scores, const LabelVector& labels,
                      std::size_t n_resamples, double level, std::uint64_t seed, int jobs) {
  check_binary(scores, labels);
  if (n_resamples < 100) fail(ErrorCode::kInvalidArgument, "bootstrap needs at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::kInvalidArgument, "confidence level must lie in (0, 1)");
  const std::size_t n = scores.size();
  if (n == 0) fail(ErrorCode::kEmptyMatrix, "bootstrap of empty sample");

  MetricCI ci;
  ci.point = statistic(scores, labels);
  ci.level = level;
  ci.n_resamples = n_resamples;
  ci.seed = seed;

  constexpr int kMaxRetries = 10;
  std::vector<double> stats(n_resamples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n_resamples, jobs, [&](std::size_t r) {
    std::mt19937_64 rng(mix_seed(seed, r));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> s(n);
    LabelVector y(n);
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = pick(rng);
        s[i] = scores[j];
        y[i] = labels[j];
        pos += static_cast<std::size_t>(y[i]);
      }
      if (pos > 0 && pos < n) {
        stats[r] = statistic(s, y);
        return;
      }
    }
  });

  std::vector<double> valid;
  valid.reserve(n_resamples);
  for (double v : stats) {
    if (std::isnan(v)) {
      ++ci.n_skipped;
    } else {
      valid.push_back(v);
    }
  }
  if (2 * ci.n_skipped > n_resamples) {
    fail(ErrorCode::kTooFewValidResamples,
         std::to_string(ci.n_skipped) + " of " + std::to_string(n_resamples) + " bootstrap resamples were single-class");
  }
  const double tail = (1.0 - level) / 2.0;
  ci.lo = quantile(valid, tail);
  ci.hi = quantile(valid, 1.0 - tail);
  ci.degenerate = ci.point < ci.lo || ci.point > ci.hi;
  return ci;
}

nlohmann::json MetricCI::to_json() const {
  return {{"point", point},       {"lo", lo},           {"hi", hi},   {"level", level},
          {"n_resamples", n_resamples}, {"n_skipped", n_skipped}, {"seed", seed}, {"degenerate", degenerate}};
}

MetricCI MetricCI::from_json(const nlohmann::json& j) {
  MetricCI ci;
  ci.point = j.at("point").get<double>();
  ci.lo = j.at("lo").get<double>();
  ci.hi = j.at("hi").get<double>();
  ci.level = j.at("level").get<double>();
  ci.n_resamples = j.at("n_resamples").get<std::size_t>();
  ci.n_skipped = j.value("n_skipped", std::size_t{0});
  ci.seed = j.at("seed").get<std::uint64_t>();
  ci.degenerate = j.value("degenerate", false);
  return ci;
}

CalibrationCurve calibration_curve(const std::vector<double>& probs, const LabelVector& labels, std::size_t n_bins) {
  check_binary(probs, labels);
  if (n_bins == 0) fail(ErrorCode::kInvalidArgument, "calibration needs at least one bin");
  CalibrationCurve c;
  for (std::size_t b = 0; b <= n_bins; ++b) c.edges.push_back(static_cast<double>(b) / static_cast<double>(n_bins));
  c.bins.resize(n_bins);
  std::vector<double> sum_p(n_bins, 0.0), sum_y(n_bins, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kInvalidArgument, "calibration probabilities must lie in [0, 1]");
    const auto b = std::min(n_bins - 1, static_cast<std::size_t>(p * static_cast<double>(n_bins)));
    sum_p[b] += p;
    sum_y[b] += labels[i];
    ++c.bins[b].count;
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    CalibrationBin& bin = c.bins[b];
    bin.lo = c.edges[b];
    bin.hi = c.edges[b + 1];
    bin.defined = bin.count > 0;
    if (bin.defined) {
      bin.mean_predicted = sum_p[b] / static_cast<double>(bin.count);
      bin.observed_rate = sum_y[b] / static_cast<double>(bin.count);
    }
  }
  return c;
}

nlohmann::json CalibrationCurve::to_json() const {
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : bins) {
    bs.push_back({{"lo", b.lo},
                  {"hi", b.hi},
                  {"count", b.count},
                  {"mean_predicted", b.defined ? nlohmann::json(b.mean_predicted) : nlohmann::json()},
                  {"observed_rate", b.defined ? nlohmann::json(b.observed_rate) : nlohmann::json()}});
  }
  return {{"edges", edges}, {"bins", bs}};
}

CalibrationCurve CalibrationCurve::from_json(const nlohmann::json& j) {
  CalibrationCurve c;
  c.edges = j.at("edges").get<std::vector<double>>();
  for (const auto& b : j.at("bins")) {
    CalibrationBin bin;
    bin.lo = b.at("lo").get<double>();
    bin.hi = b.at("hi").get<double>();
    bin.count = b.at("count").get<std::size_t>();
    bin.defined = !b.at("mean_predicted").is_null();
    if (bin.defined) {
      bin.mean_predicted = b.at("mean_predicted").get<double>();
      bin.observed_rate = b.at("observed_rate").get<double>();
    }
    c.bins.push_back(bin);
  }
  return c;
}

void CalibrationCurve::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  out << "bin_mid,predicted,observed,count\n";
  for (const auto& b : bins) {
    out << (b.lo + b.hi) / 2.0 << ',';
    if (b.defined) out << b.mean_predicted << ',' << b.observed_rate;
    else out << ',';
    out << ',' << b.count << '\n';
  }
}

std::string_view to_string(CorrelationMethod m) { return m == CorrelationMethod::kPearson ? "pearson" : "spearman"; }

nlohmann::json CorrelationResult::to_json() const {
  return {{"method", to_string(method)}, {"coefficient", coefficient}, {"p_value", p_value}, {"n", n}, {"exact", exact}};
}

namespace {

struct Centered {
  std::vector<double> a, b;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
};

Centered center(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorCode::kLengthMismatch, "correlation inputs differ in length");
  if (a.size() < 3) fail(ErrorCode::kInvalidArgument, "correlation needs at least 3 observations");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  Centered c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.a.push_back(a[i] - ma);
    c.b.push_back(b[i] - mb);
    c.saa += c.a.back() * c.a.back();
    c.sbb += c.b.back() * c.b.back();
    c.sab += c.a.back() * c.b.back();
  }
  if (c.saa <= 0.0 || c.sbb <= 0.0) fail(ErrorCode::kConstantInput, "correlation of a constant vector is undefined");
  return c;
}

double t_pvalue(double r, std::size_t n) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

// Fraction of all n! pairings whose |sum (a_i - ma)(b_pi(i) - mb)| reaches the observed one.
// Heap's algorithm swaps one pair per step, so the raw cross sum updates in O(1); on integer
// or half-integer data (ranks) those updates are exact.
double permutation_pvalue(const std::vector<double>& a_raw, const std::vector<double>& b_raw, const Centered& c) {
  const std::size_t n = a_raw.size();
  if (n > 12) fail(ErrorCode::kInvalidArgument, "exact permutation p-values are limited to n <= 12");
  const double offset = std::inner_product(a_raw.begin(), a_raw.end(), b_raw.begin(), 0.0) - c.sab;
  const double observed = std::abs(c.sab) * (1.0 - 1e-9);
  std::vector<double> b = b_raw;
  double s = c.sab + offset;
  std::uint64_t hits = 0, total = 0;
  auto visit = [&] {
    ++total;
    if (std::abs(s - offset) >= observed) ++hits;
  };
  auto swap_at = [&](std::size_t p, std::size_t q) {
    s += (a_raw[p] - a_raw[q]) * (b[q] - b[p]);
    std::swap(b[p], b[q]);
  };
  visit();
  std::vector<std::size_t> counter(n, 0);
  std::size_t i = 1;
  while (i < n) {
    if (counter[i] < i) {
      swap_at(i % 2 == 0 ? 0 : counter[i], i);
      visit();
      ++counter[i];
      i = 1;
    } else {
      counter[i] = 0;
      ++i;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

CorrelationResult correlate(const std::vector<double>& a, const std::vector<double>& b, CorrelationMethod method,
                            PValueMethod p_method) {
  const Centered c = center(a, b);
  CorrelationResult r;
  r.method = method;
  r.n = a.size();
  r.coefficient = std::clamp(c.sab / std::sqrt(c.saa * c.sbb), -1.0, 1.0);
  r.exact = p_method == PValueMethod::kExactPermutation ||
            (p_method == PValueMethod::kAuto && r.n <= kExactPermutationMaxN);
  r.p_value = r.exact ? permutation_pvalue(a, b, c) : t_pvalue(r.coefficient, r.n);
  return r;
}

}  // namespace

CorrelationResult pearson(const std::vector<double>& a, const std::vector<double>& b, PValueMethod p_method) {
  return correlate(a, b, CorrelationMethod::kPearson, p_method);
}

CorrelationResult spearman(const std::vector<double>& a, const std::vector<double>& b, PValueMethod p_method) {
  if (a.size() != b.size()) fail(ErrorCode::kLengthMismatch, "correlation inputs differ in length");
  return correlate(average_ranks(a), average_ranks(b), CorrelationMethod::kSpearman, p_method);
}

double ConfusionMatrix::accuracy() const {
  if (total() == 0) fail(ErrorCode::kEmptyMatrix, "accuracy of an empty confusion matrix");
  return static_cast<double>(tp + tn) / static_cast<double>(total());
}

nlohmann::json ConfusionMatrix::to_json() const { return {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}; }

ConfusionMatrix confusion_matrix(const LabelVector& predictions, const LabelVector& labels) {
  if (predictions.size() != labels.size()) fail(ErrorCode::kLengthMismatch, "predictions and labels differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    if (p == 1 && y == 1) ++m.tp;
    else if (p == 1) ++m.fp;
    else if (y == 0) ++m.tn;
    else ++m.fn;
  }
  return m;
}

double accuracy(const LabelVector& predictions, const LabelVector& labels) {
  return confusion_matrix(predictions, labels).accuracy();
}

double exact_match_mean(const std::vector<McqaResult>& results) {
  if (results.empty()) fail(ErrorCode::kInvalidArgument, "exact match mean of no inputs");
  double sum = 0.0;
  for (const auto& r : results) sum += r.exact_match_mean;
  return sum / static_cast<double>(results.size());
}

}  // namespace tabembed
