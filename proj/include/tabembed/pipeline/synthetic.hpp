#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabembed/tabular.hpp"

namespace tabembed {

// Label rule: y ~ Bernoulli(sigmoid(w . z + b + noise_sd * eps)), eps ~ N(0, 1), where z is
// each feature standardized by its generating distribution. b is solved for the prevalence.
struct SynthesisTask {
  std::string name;
  std::map<std::string, double> weights;
  double noise_sd = 0.0;
  double prevalence = 0.5;
};

struct SynthesisSpec {
  std::shared_ptr<const FeatureSchema> schema;
  std::size_t n_records = 660;
  std::vector<SynthesisTask> tasks;
  double missing_rate = 0.0;  // per cell, missing at random, applied after labels are drawn
  std::uint64_t seed = 0;

  void check() const;
  nlohmann::json to_json() const;
  static SynthesisSpec from_json(const nlohmann::json& j, std::shared_ptr<const FeatureSchema> schema);
};

struct SyntheticDataset {
  RecordSet records;
  // Per task: P(y = 1 | observed features) for every record, and the solved intercept.
  std::map<std::string, std::vector<double>> true_probability;
  std::map<std::string, double> intercept;
};

// Numeric features are truncated normals on their plausible range (mean at the centre,
// sd = width / 6), rounded to 2 decimals. Categorical features are uniform over categories.
// Series features get 1-4 timestamped points within 24 hours around a per-record level.
SyntheticDataset generate_synthetic(const SynthesisSpec& spec);

// Expected AUROC of the Bayes score over the realized records: positives and negatives are
// weighted by the true probabilities and ranked by those same probabilities.
double bayes_auroc(const std::vector<double>& true_probability);

}  // namespace tabembed
