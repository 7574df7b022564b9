#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "tabembed/common.hpp"
#include "tabembed/learners/tree.hpp"
#include "tabembed/tabular.hpp"

namespace tabembed {

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 10;  // 0 = grow until pure
  double max_features_fraction = 0.5;
  std::size_t min_samples_leaf = 1;
  bool bootstrap = true;

  void check() const;
  nlohmann::json to_json() const;
  static ForestParams from_json(const nlohmann::json& j);
  bool operator==(const ForestParams&) const = default;
};

struct ForestModel {
  ForestParams params;
  std::vector<Tree> trees;  // leaf value = positive fraction

  // Mean leaf frequency clipped to (1e-6, 1 - 1e-6).
  double probability(const double* x) const;
};

// Gini trees on bootstrap samples. Each node considers max(1, round(fraction * d)) features
// drawn without replacement (all features in column order when fraction = 1). A split must
// strictly lower the weighted impurity; ties go to the lower feature, then the lower threshold.
ForestModel train_random_forest(const Matrix& x, const LabelVector& y, const ForestParams& params, std::uint64_t seed);

}  // namespace tabembed
