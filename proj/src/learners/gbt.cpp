#include "tabembed/learners/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabembed {

void check_training_data(const Matrix& x, const LabelVector& y) {
  if (x.rows == 0 || x.cols == 0) fail(ErrorCode::kEmptyMatrix, "training matrix is empty");
  if (x.rows != y.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "matrix has " + std::to_string(x.rows) + " rows but " + std::to_string(y.size()) + " labels");
  }
  if (x.rows < 2) fail(ErrorCode::kTooFewRecords, "need at least 2 training rows");
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(v);
  }
  if (pos == 0 || pos == y.size()) fail(ErrorCode::kDegenerateLabels, "training labels contain a single class");
  for (double v : x.values) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValues, "training matrix contains non-finite values");
  }
}

void GbtParams::check() const {
  if (n_estimators < 1) fail(ErrorCode::kConfigError, "n_estimators must be at least 1");
  if (max_depth < 1) fail(ErrorCode::kConfigError, "max_depth must be at least 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail(ErrorCode::kConfigError, "learning_rate must lie in (0, 1]");
  if (!(min_child_weight >= 0.0)) fail(ErrorCode::kConfigError, "min_child_weight must be non-negative");
  if (!(lambda_l2 >= 0.0)) fail(ErrorCode::kConfigError, "lambda_l2 must be non-negative");
}

nlohmann::json GbtParams::to_json() const {
  return {{"n_estimators", n_estimators},
          {"max_depth", max_depth},
          {"learning_rate", learning_rate},
          {"min_child_weight", min_child_weight},
          {"lambda_l2", lambda_l2}};
}

GbtParams GbtParams::from_json(const nlohmann::json& j) {
  GbtParams p;
  p.n_estimators = j.value("n_estimators", p.n_estimators);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.min_child_weight = j.value("min_child_weight", p.min_child_weight);
  p.lambda_l2 = j.value("lambda_l2", p.lambda_l2);
  p.check();
  return p;
}

double GbtModel::margin(const double* x, std::size_t n_trees) const {
  double m = base_score;
  const std::size_t n = std::min(n_trees, trees.size());
  for (std::size_t t = 0; t < n; ++t) m += trees[t].predict(x);
  return m;
}

namespace {

double log_loss(const std::vector<double>& margins, const LabelVector& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = margins[i];
    // log(1 + e^m) - y m, stable for large |m|
    sum += (m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m))) - y[i] * m;
  }
  return sum / static_cast<double>(y.size());
}

struct SortedColumn {
  std::vector<std::uint32_t> rows;
  std::vector<double> values;
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

}  // namespace

GbtModel train_gbt(const Matrix& x, const LabelVector& y, const GbtParams& params) {
  check_training_data(x, y);
  params.check();
  const std::size_t n = x.rows, d = x.cols;
  const double lambda = params.lambda_l2;
  constexpr double kMinGain = 1e-6;

  std::vector<SortedColumn> columns(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& col = columns[f];
    col.rows.resize(n);
    std::iota(col.rows.begin(), col.rows.end(), 0u);
    std::stable_sort(col.rows.begin(), col.rows.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    col.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) col.values[k] = x(col.rows[k], f);
  }

  GbtModel model;
  model.params = params;
  const double base_rate = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  model.base_score = logit(base_rate);
  std::vector<double> margins(n, model.base_score);
  model.train_loss.push_back(log_loss(margins, y));

  std::vector<double> g(n), h(n);
  std::vector<int> node_of(n);
  for (std::size_t round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margins[i]);
      g[i] = p - y[i];
      h[i] = p * (1.0 - p);
    }
    Tree tree;
    std::vector<double> node_g{std::accumulate(g.begin(), g.end(), 0.0)};
    std::vector<double> node_h{std::accumulate(h.begin(), h.end(), 0.0)};
    tree.nodes.emplace_back();
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<int> frontier{0};

    for (std::size_t depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
      const std::size_t m = frontier.size();
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t a = 0; a < m; ++a) slot[frontier[a]] = static_cast<int>(a);
      std::vector<Candidate> best(m);
      std::vector<double> gl(m), hl(m), last(m);
      std::vector<char> seen(m);
      std::vector<double> parent_score(m);
      for (std::size_t a = 0; a < m; ++a) {
        const double G = node_g[frontier[a]], H = node_h[frontier[a]];
        parent_score[a] = G * G / (H + lambda);
      }
      for (std::size_t f = 0; f < d; ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        const auto& col = columns[f];
        for (std::size_t k = 0; k < n; ++k) {
          const std::uint32_t i = col.rows[k];
          const int a = slot[node_of[i]];
          if (a < 0) continue;
          const double v = col.values[k];
          if (seen[a] && v > last[a]) {
            const double G = node_g[frontier[a]], H = node_h[frontier[a]];
            const double hr = H - hl[a];
            if (hl[a] >= params.min_child_weight && hr >= params.min_child_weight) {
              const double gr = G - gl[a];
              const double gain =
                  0.5 * (gl[a] * gl[a] / (hl[a] + lambda) + gr * gr / (hr + lambda) - parent_score[a]);
              if (gain > best[a].gain) best[a] = {gain, static_cast<int>(f), split_threshold(last[a], v)};
            }
          }
          gl[a] += g[i];
          hl[a] += h[i];
          last[a] = v;
          seen[a] = 1;
        }
      }

      std::vector<int> next;
      for (std::size_t a = 0; a < m; ++a) {
        if (best[a].feature < 0 || best[a].gain <= kMinGain) continue;
        const int id = frontier[a];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes[id].feature = best[a].feature;
        tree.nodes[id].threshold = best[a].threshold;
        tree.nodes[id].left = left;
        tree.nodes[id].right = left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        node_g.resize(tree.nodes.size(), 0.0);
        node_h.resize(tree.nodes.size(), 0.0);
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;
      for (std::size_t i = 0; i < n; ++i) {
        const TreeNode& node = tree.nodes[node_of[i]];
        if (node.feature < 0) continue;
        node_of[i] = x(i, node.feature) <= node.threshold ? node.left : node.right;
        node_g[node_of[i]] += g[i];
        node_h[node_of[i]] += h[i];
      }
      frontier = std::move(next);
    }

    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      if (tree.nodes[id].feature < 0) {
        tree.nodes[id].value = -node_g[id] / (node_h[id] + lambda) * params.learning_rate;
      }
    }
    for (std::size_t i = 0; i < n; ++i) margins[i] += tree.nodes[node_of[i]].value;
    model.train_loss.push_back(log_loss(margins, y));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace tabembed
