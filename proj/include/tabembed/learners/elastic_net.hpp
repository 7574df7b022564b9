#pragma once

#include <vector>

#include <json.hpp>

#include "tabembed/common.hpp"
#include "tabembed/tabular.hpp"

namespace tabembed {

struct ElasticNetParams {
  double alpha = 0.1;     // overall penalty strength
  double l1_ratio = 0.5;  // 1 = lasso, 0 = ridge
  double tol = 1e-6;
  std::size_t max_iters = 20000;

  void check() const;
  nlohmann::json to_json() const;
  static ElasticNetParams from_json(const nlohmann::json& j);
  bool operator==(const ElasticNetParams&) const = default;
};

// Logistic model on internally standardized inputs: z = (x - mean) / scale.
struct LinearModel {
  ElasticNetParams params;
  std::vector<double> means;
  std::vector<double> scales;
  std::vector<double> coef;  // on standardized inputs
  double intercept = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  double decision(const double* x) const;
};

// Objective on standardized inputs Z (population std, constant columns scale 1):
//   mean log-loss(Z w + b) + alpha * (l1_ratio * |w|_1 + (1 - l1_ratio) / 2 * |w|_2^2)
// minimized by accelerated proximal gradient with backtracking and adaptive restart.
// Stops when the max-norm of a proximal step falls below tol.
LinearModel train_elasticnet_lr(const Matrix& x, const LabelVector& y, const ElasticNetParams& params);

// Smooth part of the objective (log-loss plus L2 term) and its gradient at (w, b) on
// already standardized inputs. grad has size d + 1 with the intercept last.
double elasticnet_smooth_loss(const Matrix& z, const LabelVector& y, const std::vector<double>& w, double b,
                              double alpha, double l1_ratio, std::vector<double>* grad = nullptr);

}  // namespace tabembed
