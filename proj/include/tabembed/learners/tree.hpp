#pragma once

#include <vector>

#include <json.hpp>

namespace tabembed {

// Binary decision tree stored as a flat node array; node 0 is the root.
// Rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const double* x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
  bool operator==(const Tree&) const = default;
};

// Midpoint of two adjacent sorted values; falls back to `lo` when the midpoint rounds up to `hi`.
double split_threshold(double lo, double hi);

}  // namespace tabembed
