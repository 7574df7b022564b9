#pragma once

#include <vector>

#include <json.hpp>

#include "tabembed/common.hpp"
#include "tabembed/learners/tree.hpp"
#include "tabembed/tabular.hpp"

namespace tabembed {

struct GbtParams {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 5;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;  // minimum hessian sum per child
  double lambda_l2 = 1.0;

  void check() const;
  nlohmann::json to_json() const;
  static GbtParams from_json(const nlohmann::json& j);
  bool operator==(const GbtParams&) const = default;
};

struct GbtModel {
  GbtParams params;
  double base_score = 0.0;        // logit of the training base rate
  std::vector<Tree> trees;        // leaf values already scaled by the learning rate
  std::vector<double> train_loss; // mean log-loss; [0] is the base score, [r] after round r

  // Raw score using the first `n_trees` trees (all when n_trees exceeds the ensemble).
  double margin(const double* x, std::size_t n_trees = static_cast<std::size_t>(-1)) const;
};

// Second-order boosting on logistic loss with exact greedy level-wise splits.
GbtModel train_gbt(const Matrix& x, const LabelVector& y, const GbtParams& params);

// Shared precondition of all learners: shape, {0,1} labels, both classes present.
void check_training_data(const Matrix& x, const LabelVector& y);

}  // namespace tabembed
