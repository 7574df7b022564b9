#include "tabembed/learners/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabembed/learners/gbt.hpp"

namespace tabembed {

void ElasticNetParams::check() const {
  if (!(alpha > 0.0)) fail(ErrorCode::kConfigError, "alpha must be positive");
  if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) fail(ErrorCode::kConfigError, "l1_ratio must lie in [0, 1]");
  if (!(tol > 0.0)) fail(ErrorCode::kConfigError, "tol must be positive");
  if (max_iters < 1) fail(ErrorCode::kConfigError, "max_iters must be at least 1");
}

nlohmann::json ElasticNetParams::to_json() const {
  return {{"alpha", alpha}, {"l1_ratio", l1_ratio}, {"tol", tol}, {"max_iters", max_iters}};
}

ElasticNetParams ElasticNetParams::from_json(const nlohmann::json& j) {
  ElasticNetParams p;
  p.alpha = j.value("alpha", p.alpha);
  p.l1_ratio = j.value("l1_ratio", p.l1_ratio);
  p.tol = j.value("tol", p.tol);
  p.max_iters = j.value("max_iters", p.max_iters);
  p.check();
  return p;
}

double LinearModel::decision(const double* x) const {
  double s = intercept;
  for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * (x[j] - means[j]) / scales[j];
  return s;
}

double elasticnet_smooth_loss(const Matrix& z, const LabelVector& y, const std::vector<double>& w, double b,
                              double alpha, double l1_ratio, std::vector<double>* grad) {
  const std::size_t n = z.rows, d = z.cols;
  const double l2 = alpha * (1.0 - l1_ratio);
  if (grad) grad->assign(d + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = z.row(i);
    double m = b;
    for (std::size_t j = 0; j < d; ++j) m += w[j] * r[j];
    loss += (m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m))) - y[i] * m;
    if (grad) {
      const double resid = sigmoid(m) - y[i];
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += resid * r[j];
      (*grad)[d] += resid;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  double wsq = 0.0;
  for (double v : w) wsq += v * v;
  loss += 0.5 * l2 * wsq;
  if (grad) {
    for (auto& v : *grad) v *= inv_n;
    for (std::size_t j = 0; j < d; ++j) (*grad)[j] += l2 * w[j];
  }
  return loss;
}

LinearModel train_elasticnet_lr(const Matrix& x, const LabelVector& y, const ElasticNetParams& params) {
  check_training_data(x, y);
  params.check();
  const std::size_t n = x.rows, d = x.cols;

  LinearModel model;
  model.params = params;
  model.means.assign(d, 0.0);
  model.scales.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x(i, j);
    const double mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    model.means[j] = mean;
    model.scales[j] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z(i, j) = (x(i, j) - model.means[j]) / model.scales[j];
  }

  const double l1 = params.alpha * params.l1_ratio;
  // Parameters packed as [w..., b].
  std::vector<double> cur(d + 1, 0.0);
  cur[d] = logit(std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n));
  std::vector<double> prev = cur, mom = cur, grad, next(d + 1);
  double t = 1.0;
  double lip = 1.0;

  auto smooth = [&](const std::vector<double>& p, std::vector<double>* gr) {
    std::vector<double> w(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d));
    return elasticnet_smooth_loss(z, y, w, p[d], params.alpha, params.l1_ratio, gr);
  };
  auto prox_step = [&](const std::vector<double>& at, const std::vector<double>& g, double step) {
    for (std::size_t j = 0; j < d; ++j) {
      const double u = at[j] - step * g[j];
      next[j] = std::copysign(std::max(std::abs(u) - step * l1, 0.0), u);
    }
    next[d] = at[d] - step * g[d];
  };

  for (std::size_t it = 1; it <= params.max_iters; ++it) {
    const double f_mom = smooth(mom, &grad);
    while (true) {
      prox_step(mom, grad, 1.0 / lip);
      double lin = 0.0, sq = 0.0;
      for (std::size_t j = 0; j <= d; ++j) {
        const double diff = next[j] - mom[j];
        lin += grad[j] * diff;
        sq += diff * diff;
      }
      if (smooth(next, nullptr) <= f_mom + lin + 0.5 * lip * sq + 1e-15 * std::abs(f_mom)) break;
      lip *= 2.0;
    }
    double change = 0.0, restart = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      change = std::max(change, std::abs(next[j] - mom[j]));
      restart += (mom[j] - next[j]) * (next[j] - cur[j]);
    }
    prev = cur;
    cur = next;
    model.iterations = it;
    if (change < params.tol) {
      model.converged = true;
      break;
    }
    if (restart > 0.0) {
      t = 1.0;
      mom = cur;
      continue;
    }
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    const double beta = (t - 1.0) / t_next;
    for (std::size_t j = 0; j <= d; ++j) mom[j] = cur[j] + beta * (cur[j] - prev[j]);
    t = t_next;
  }
  if (!model.converged) {
    warn("NonConvergence: elastic net stopped after " + std::to_string(params.max_iters) +
         " iterations; returning last iterate");
  }
  model.coef.assign(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(d));
  model.intercept = cur[d];
  return model;
}

}  // namespace tabembed
