#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

double exhaustive_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double concordant = 0.0, tied = 0.0, pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) pos += 1.0; else neg += 1.0;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) tied += 1.0;
    }
  }
  return (concordant + 0.5 * tied) / (pos * neg);
}

std::vector<double> simple_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k + 1);
  return r;
}

double rank_difference_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = simple_ranks(a), rb = simple_ranks(b);
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const double n = static_cast<double>(a.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double pearson_r(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double permutation_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const double observed = std::abs(pearson_r(a, b));
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> shuffled(b.size());
  double hits = 0.0, total = 0.0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = b[perm[i]];
    if (std::abs(pearson_r(a, shuffled)) >= observed - 1e-12) hits += 1.0;
    total += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return hits / total;
}

std::vector<std::vector<double>> standardize(const std::vector<std::vector<double>>& x) {
  if (x.empty()) return x;
  const std::size_t n = x.size(), d = x[0].size();
  auto z = x;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x[r][c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x[r][c] - mean) * (x[r][c] - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    if (sd <= 1e-12) sd = 1.0;
    for (std::size_t r = 0; r < n; ++r) z[r][c] = (x[r][c] - mean) / sd;
  }
  return z;
}

namespace {

double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double ridge_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                       double alpha) {
  const Eigen::VectorXd eta = a * theta;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) loss += log1pexp(eta(i)) - y(i) * eta(i);
  loss /= static_cast<double>(eta.size());
  const Eigen::Index d = theta.size() - 1;
  return loss + 0.5 * alpha * theta.head(d).squaredNorm();
}

}  // namespace

LogisticFit ridge_logistic(const std::vector<std::vector<double>>& z, const std::vector<int>& y, double alpha) {
  const Eigen::Index n = static_cast<Eigen::Index>(z.size());
  const Eigen::Index d = static_cast<Eigen::Index>(z[0].size());
  Eigen::MatrixXd a(n, d + 1);
  Eigen::VectorXd yy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = z[i][j];
    a(i, d) = 1.0;
    yy(i) = y[i];
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, alpha);
  penalty(d) = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd eta = a * theta;
    Eigen::VectorXd p(n), wgt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      wgt(i) = p(i) * (1.0 - p(i));
    }
    Eigen::VectorXd grad = a.transpose() * (p - yy) / static_cast<double>(n);
    grad += penalty.cwiseProduct(theta);
    Eigen::MatrixXd hess = a.transpose() * wgt.asDiagonal() * a / static_cast<double>(n);
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-14;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    const double f0 = ridge_objective(a, yy, theta, alpha);
    while (t > 1e-10 && ridge_objective(a, yy, theta - t * step, alpha) > f0 - 1e-4 * t * grad.dot(step)) t *= 0.5;
    theta -= t * step;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  LogisticFit fit;
  fit.w.assign(theta.data(), theta.data() + d);
  fit.b = theta(d);
  return fit;
}

std::vector<double> smooth_gradient(const std::vector<std::vector<double>>& z, const std::vector<int>& y,
                                    const std::vector<double>& w, double b, double alpha, double l1_ratio) {
  const std::size_t n = z.size(), d = w.size();
  std::vector<double> g(d + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = b;
    for (std::size_t j = 0; j < d; ++j) eta += z[i][j] * w[j];
    const double r = 1.0 / (1.0 + std::exp(-eta)) - y[i];
    for (std::size_t j = 0; j < d; ++j) g[j] += r * z[i][j] / static_cast<double>(n);
    g[d] += r / static_cast<double>(n);
  }
  for (std::size_t j = 0; j < d; ++j) g[j] += alpha * (1.0 - l1_ratio) * w[j];
  return g;
}

CartTree::CartTree(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int max_depth)
    : max_depth_(max_depth) {
  std::vector<int> rows(x.size());
  std::iota(rows.begin(), rows.end(), 0);
  grow(x, y, rows, 0);
}

int CartTree::grow(const std::vector<std::vector<double>>& x, const std::vector<int>& y, std::vector<int> rows,
                   int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  double pos = 0.0;
  for (int r : rows) pos += y[r];
  const double n = static_cast<double>(rows.size());
  nodes_[id].value = pos / n;
  if ((max_depth_ > 0 && depth >= max_depth_) || pos == 0.0 || pos == n) return id;

  // Impurity scaled by n: n - (pos^2 + neg^2) / n.
  auto impurity = [](double p, double m) { return m == 0.0 ? 0.0 : m - (p * p + (m - p) * (m - p)) / m; };
  double best = impurity(pos, n);
  int best_f = -1;
  double best_t = 0.0;
  const std::size_t d = x[0].size();
  for (std::size_t f = 0; f < d; ++f) {
    std::vector<double> values;
    for (int r : rows) values.push_back(x[r][f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      double t = 0.5 * (values[k] + values[k + 1]);
      if (!(t > values[k] && t < values[k + 1])) t = values[k];
      double lp = 0.0, ln = 0.0;
      for (int r : rows) {
        if (x[r][f] <= t) {
          ln += 1.0;
          lp += y[r];
        }
      }
      const double total = impurity(lp, ln) + impurity(pos - lp, n - ln);
      if (total < best) {
        best = total;
        best_f = static_cast<int>(f);
        best_t = t;
      }
    }
  }
  if (best_f < 0) return id;
  std::vector<int> left, right;
  for (int r : rows) (x[r][best_f] <= best_t ? left : right).push_back(r);
  nodes_[id].feature = best_f;
  nodes_[id].threshold = best_t;
  const int l = grow(x, y, left, depth + 1);
  nodes_[id].left = l;
  const int rr = grow(x, y, right, depth + 1);
  nodes_[id].right = rr;
  return id;
}

double CartTree::predict(const std::vector<double>& row) const {
  int i = 0;
  while (nodes_[i].feature >= 0) i = row[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].value;
}

double pairwise_bayes_auroc(const std::vector<double>& p) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i == j) continue;
      const double w = p[i] * (1.0 - p[j]);
      den += w;
      if (p[i] > p[j]) num += w;
      else if (p[i] == p[j]) num += 0.5 * w;
    }
  }
  return num / den;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
