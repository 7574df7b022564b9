#include "tabembed/learners/tree.hpp"

#include <algorithm>
#include <functional>

#include "tabembed/common.hpp"

namespace tabembed {

double Tree::predict(const double* x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::function<std::size_t(int)> rec = [&](int i) -> std::size_t {
    if (nodes[i].feature < 0) return 0;
    return 1 + std::max(rec(nodes[i].left), rec(nodes[i].right));
  };
  return rec(0);
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

nlohmann::json Tree::to_json() const {
  // Columnar layout keeps model files compact.
  nlohmann::json f = nlohmann::json::array(), t = nlohmann::json::array(), l = nlohmann::json::array(),
                 r = nlohmann::json::array(), v = nlohmann::json::array();
  for (const auto& n : nodes) {
    f.push_back(n.feature);
    t.push_back(n.threshold);
    l.push_back(n.left);
    r.push_back(n.right);
    v.push_back(n.value);
  }
  return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"value", v}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  Tree tree;
  const auto& f = j.at("feature");
  const std::size_t n = f.size();
  if (j.at("threshold").size() != n || j.at("left").size() != n || j.at("right").size() != n ||
      j.at("value").size() != n || n == 0) {
    fail(ErrorCode::kParseFailure, "malformed tree");
  }
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = tree.nodes[i];
    node.feature = f[i].get<int>();
    node.threshold = j["threshold"][i].get<double>();
    node.left = j["left"][i].get<int>();
    node.right = j["right"][i].get<int>();
    node.value = j["value"][i].get<double>();
    if (node.feature >= 0) {
      const auto bad = [&](int c) { return c <= static_cast<int>(i) || c >= static_cast<int>(n); };
      if (bad(node.left) || bad(node.right)) fail(ErrorCode::kParseFailure, "tree child index out of range");
    }
  }
  return tree;
}

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

}  // namespace tabembed
