#include "tabembed/learners/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tabembed/learners/gbt.hpp"

namespace tabembed {

void ForestParams::check() const {
  if (n_trees < 1) fail(ErrorCode::kConfigError, "n_trees must be at least 1");
  if (!(max_features_fraction > 0.0 && max_features_fraction <= 1.0)) {
    fail(ErrorCode::kConfigError, "max_features_fraction must lie in (0, 1]");
  }
  if (min_samples_leaf < 1) fail(ErrorCode::kConfigError, "min_samples_leaf must be at least 1");
}

nlohmann::json ForestParams::to_json() const {
  return {{"n_trees", n_trees},
          {"max_depth", max_depth},
          {"max_features_fraction", max_features_fraction},
          {"min_samples_leaf", min_samples_leaf},
          {"bootstrap", bootstrap}};
}

ForestParams ForestParams::from_json(const nlohmann::json& j) {
  ForestParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.max_features_fraction = j.value("max_features_fraction", p.max_features_fraction);
  p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
  p.bootstrap = j.value("bootstrap", p.bootstrap);
  p.check();
  return p;
}

double ForestModel::probability(const double* x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return std::clamp(s / static_cast<double>(trees.size()), 1e-6, 1.0 - 1e-6);
}

namespace {

// n * gini(n) = n - (n0^2 + n1^2) / n, from integer counts.
double weighted_gini(std::size_t n0, std::size_t n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n == 0.0) return 0.0;
  const double a = static_cast<double>(n0), b = static_cast<double>(n1);
  return n - (a * a + b * b) / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const LabelVector& y, const ForestParams& p, std::mt19937_64& rng)
      : x_(x), y_(y), p_(p), rng_(rng) {
    const auto d = static_cast<double>(x.cols);
    n_features_ = p.max_features_fraction >= 1.0
                      ? x.cols
                      : std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(p.max_features_fraction * d)), 1, x.cols);
  }

  Tree build(std::vector<std::uint32_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::uint32_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t n1 = 0;
    for (auto i : rows) n1 += static_cast<std::size_t>(y_[i]);
    const std::size_t n0 = rows.size() - n1;
    tree_.nodes[id].value = static_cast<double>(n1) / static_cast<double>(rows.size());
    if (n0 == 0 || n1 == 0) return id;
    if (p_.max_depth > 0 && depth >= p_.max_depth) return id;
    if (rows.size() < 2 * p_.min_samples_leaf) return id;

    std::vector<std::size_t> features(x_.cols);
    std::iota(features.begin(), features.end(), std::size_t{0});
    if (n_features_ < x_.cols) {
      for (std::size_t k = 0; k < n_features_; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, x_.cols - 1);
        std::swap(features[k], features[pick(rng_)]);
      }
      features.resize(n_features_);
      std::sort(features.begin(), features.end());
    }

    double best = weighted_gini(n0, n1);
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::uint32_t> sorted = rows;
    for (std::size_t f : features) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return x_(a, f) < x_(b, f); });
      std::size_t l0 = 0, l1 = 0;
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        (y_[sorted[k]] ? l1 : l0)++;
        const double v = x_(sorted[k], f), next = x_(sorted[k + 1], f);
        if (!(next > v)) continue;
        const std::size_t nl = k + 1, nr = sorted.size() - nl;
        if (nl < p_.min_samples_leaf || nr < p_.min_samples_leaf) continue;
        const double score = weighted_gini(l0, l1) + weighted_gini(n0 - l0, n1 - l1);
        if (score < best) {
          best = score;
          best_feature = static_cast<int>(f);
          best_threshold = split_threshold(v, next);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::uint32_t> left, right;
    for (auto i : rows) (x_(i, best_feature) <= best_threshold ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[id].feature = best_feature;
    tree_.nodes[id].threshold = best_threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Matrix& x_;
  const LabelVector& y_;
  const ForestParams& p_;
  std::mt19937_64& rng_;
  std::size_t n_features_ = 0;
  Tree tree_;
};

}  // namespace

ForestModel train_random_forest(const Matrix& x, const LabelVector& y, const ForestParams& params, std::uint64_t seed) {
  check_training_data(x, y);
  params.check();
  ForestModel model;
  model.params = params;
  const std::size_t n = x.rows;
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    std::mt19937_64 rng(mix_seed(seed, t));
    std::vector<std::uint32_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
      for (auto& r : rows) r = pick(rng);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    model.trees.push_back(TreeBuilder(x, y, params, rng).build(std::move(rows)));
  }
  return model;
}

}  // namespace tabembed
