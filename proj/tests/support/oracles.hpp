#pragma once

// Independent reference implementations used to check the library. None of these call
// into the code under test.

#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

// (concordant + 0.5 * tied) / (n_pos * n_neg) by counting every positive/negative pair.
double exhaustive_auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// 1 - 6 sum d^2 / (n (n^2 - 1)) on tie-free data.
double rank_difference_spearman(const std::vector<double>& a, const std::vector<double>& b);

double pearson_r(const std::vector<double>& a, const std::vector<double>& b);

// Ranks of tie-free data, starting at 1.
std::vector<double> simple_ranks(const std::vector<double>& v);

// Two-sided permutation p-value of Pearson r: every ordering of b is visited with
// std::next_permutation and r is recomputed from scratch.
double permutation_pvalue(const std::vector<double>& a, const std::vector<double>& b);

struct LogisticFit {
  std::vector<double> w;  // on standardized inputs
  double b = 0.0;
};

// Population-std standardization; constant columns keep scale 1.
std::vector<std::vector<double>> standardize(const std::vector<std::vector<double>>& x);

// Ridge logistic regression, mean log-loss + alpha/2 |w|^2 with a free intercept, solved by
// damped Newton steps with a dense Cholesky solve.
LogisticFit ridge_logistic(const std::vector<std::vector<double>>& z, const std::vector<int>& y, double alpha);

// Gradient of mean log-loss + alpha (1 - l1_ratio) / 2 |w|^2 with respect to (w, b).
std::vector<double> smooth_gradient(const std::vector<std::vector<double>>& z, const std::vector<int>& y,
                                    const std::vector<double>& w, double b, double alpha, double l1_ratio);

// Plain recursive Gini tree over all features: candidate thresholds are midpoints of
// adjacent distinct values, a split must strictly reduce weighted impurity, ties go to the
// lower feature and then the lower threshold. Leaves hold the positive fraction.
class CartTree {
 public:
  CartTree(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int max_depth);
  double predict(const std::vector<double>& row) const;

 private:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  int grow(const std::vector<std::vector<double>>& x, const std::vector<int>& y, std::vector<int> rows, int depth);
  int max_depth_;
  std::vector<Node> nodes_;
};

// Bayes AUROC by explicit double sum over ordered pairs i != j: pair weight p_i (1 - p_j),
// credit 1 when p_i > p_j and 0.5 on ties.
double pairwise_bayes_auroc(const std::vector<double>& p);

// Cumulative probability of the standard normal.
double normal_cdf(double x);

// Quantile of the standard normal by bisection on normal_cdf.
double normal_quantile(double p);

}  // namespace oracle
