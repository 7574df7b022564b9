#pragma once

// AUROC, bootstrap intervals, calibration, correlations, confusion matrices.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <json.hpp>

#include "tabembed/scoring.hpp"
#include "tabembed/tabular.hpp"

namespace tabembed {

// Mann-Whitney AUROC: (concordant + 0.5 * tied) / (n_pos * n_neg).
double auroc(const std::vector<double>& scores, const LabelVector& labels);

struct MetricCI {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  std::size_t n_resamples = 0;
  std::size_t n_skipped = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;  // point outside [lo, hi]

  nlohmann::json to_json() const;
  static MetricCI from_json(const nlohmann::json& j);
  bool operator==(const MetricCI&) const = default;
};

using Statistic = std::function<double(const std::vector<double>& scores, const LabelVector& labels)>;

// Percentile bootstrap. Resample i draws from mix_seed(seed, i); single-class resamples are
// redrawn up to 10 times, then skipped. More than half skipped raises kTooFewValidResamples.
MetricCI bootstrap_ci(const Statistic& statistic, const std::vector<double>& scores, const LabelVector& labels,
                      std::size_t n_resamples = 1000, double level = 0.95, std::uint64_t seed = 0, int jobs = 1);

// Type-7 (linear interpolation) sample quantile of unsorted values.
double quantile(std::vector<double> values, double q);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_predicted = 0.0;
  double observed_rate = 0.0;
  std::size_t count = 0;
  bool defined = false;  // false for empty bins
};

struct CalibrationCurve {
  std::vector<double> edges;  // n_bins + 1, strictly increasing over [0, 1]
  std::vector<CalibrationBin> bins;

  nlohmann::json to_json() const;
  static CalibrationCurve from_json(const nlohmann::json& j);
  // Plot data: bin_mid, predicted, observed, count. Empty bins leave predicted/observed blank.
  void write_csv(const std::filesystem::path& path) const;
};

// Uniform bins over [0, 1]; bin b holds p in [b/n, (b+1)/n), with p = 1 in the last bin.
CalibrationCurve calibration_curve(const std::vector<double>& probs, const LabelVector& labels,
                                   std::size_t n_bins = 10);

enum class CorrelationMethod { kPearson, kSpearman };
std::string_view to_string(CorrelationMethod m);

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;
  CorrelationMethod method = CorrelationMethod::kPearson;
  std::size_t n = 0;
  bool exact = false;  // p-value from full permutation enumeration

  nlohmann::json to_json() const;
};

enum class PValueMethod { kAuto, kTDistribution, kExactPermutation };

// Inclusive size limit for the default switch to exact permutation p-values.
inline constexpr std::size_t kExactPermutationMaxN = 10;

// Two-sided p-values. kTDistribution uses t = r * sqrt((n - 2) / (1 - r^2)) with n - 2
// degrees of freedom; kExactPermutation enumerates all n! pairings (n <= 12); kAuto picks
// the permutation test up to kExactPermutationMaxN and the t transform above it.
CorrelationResult pearson(const std::vector<double>& a, const std::vector<double>& b,
                          PValueMethod p_method = PValueMethod::kAuto);
CorrelationResult spearman(const std::vector<double>& a, const std::vector<double>& b,
                           PValueMethod p_method = PValueMethod::kAuto);

// Ranks starting at 1; tied values share their mean rank.
std::vector<double> average_ranks(const std::vector<double>& values);

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  nlohmann::json to_json() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(const LabelVector& predictions, const LabelVector& labels);
double accuracy(const LabelVector& predictions, const LabelVector& labels);

// Mean over inputs of each input's mean exact match.
double exact_match_mean(const std::vector<McqaResult>& results);

}  // namespace tabembed
