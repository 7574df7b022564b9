#include "tabembed/learners/grid_search.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "tabembed/metrics.hpp"

namespace tabembed {

namespace {

const std::vector<std::string>& grid_keys(LearnerKind kind) {
  static const std::vector<std::string> gbt{"n_estimators", "max_depth", "learning_rate", "min_child_weight",
                                            "lambda_l2"};
  static const std::vector<std::string> lr{"alpha", "l1_ratio", "tol", "max_iters"};
  static const std::vector<std::string> rf{"n_trees", "max_depth", "max_features_fraction", "min_samples_leaf",
                                           "bootstrap"};
  switch (kind) {
    case LearnerKind::kGbt: return gbt;
    case LearnerKind::kElasticNet: return lr;
    case LearnerKind::kRandomForest: return rf;
  }
  return gbt;
}

}  // namespace

std::vector<LearnerParams> grid_from_json(LearnerKind kind, const nlohmann::json& spec) {
  if (!spec.is_object()) fail(ErrorCode::kConfigError, "grid must be a JSON object");
  const auto& keys = grid_keys(kind);
  for (const auto& [k, v] : spec.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      fail(ErrorCode::kConfigError, "unknown grid parameter '" + k + "' for " + std::string(to_string(kind)));
    }
  }
  std::vector<nlohmann::json> cells{nlohmann::json::object()};
  for (const auto& key : keys) {
    if (!spec.contains(key)) continue;
    nlohmann::json values = spec.at(key);
    if (!values.is_array()) values = nlohmann::json::array({values});
    if (values.empty()) fail(ErrorCode::kConfigError, "grid parameter '" + key + "' has no values");
    std::vector<nlohmann::json> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        nlohmann::json c = cell;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  std::vector<LearnerParams> out;
  for (const auto& c : cells) {
    try {
      out.push_back(params_from_json(kind, c));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfigError, std::string("bad grid value: ") + e.what());
    }
  }
  return out;
}

std::vector<LearnerParams> default_gbt_grid() {
  return grid_from_json(LearnerKind::kGbt, {{"n_estimators", {50, 100, 250, 500}},
                                            {"max_depth", {2, 5, 10, 15, 20}},
                                            {"learning_rate", {0.005, 0.01, 0.05, 0.1}},
                                            {"min_child_weight", {1, 2, 3}}});
}

std::vector<LearnerParams> default_lr_grid() {
  return grid_from_json(LearnerKind::kElasticNet, {{"alpha", {0.1, 0.5, 1.0}}, {"l1_ratio", {0.1, 0.5, 0.9}}});
}

std::vector<LearnerParams> default_forest_grid() {
  return grid_from_json(LearnerKind::kRandomForest,
                        {{"n_trees", {100}}, {"max_depth", {5, 10, 0}}, {"max_features_fraction", {0.3, 0.6}}});
}

std::vector<LearnerParams> default_grid(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kGbt: return default_gbt_grid();
    case LearnerKind::kElasticNet: return default_lr_grid();
    case LearnerKind::kRandomForest: return default_forest_grid();
  }
  return default_gbt_grid();
}

nlohmann::json GridSearchResult::summary() const {
  nlohmann::json cs = nlohmann::json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    nlohmann::json entry = {{"params", params_to_json(cells[c])}};
    if (std::isnan(cell_scores[c])) {
      entry["score"] = nullptr;
      entry["error"] = cell_errors[c];
    } else {
      entry["score"] = cell_scores[c];
    }
    cs.push_back(std::move(entry));
  }
  return {{"learner", to_string(kind_of(best_params))},
          {"best_index", best_index},
          {"best_params", params_to_json(best_params)},
          {"best_score", cell_scores[best_index]},
          {"cells", cs}};
}

GridSearchResult grid_search(const std::vector<LearnerParams>& grid, const Matrix& x, const LabelVector& y,
                             const FoldPlan& folds, std::uint64_t seed, int jobs) {
  if (grid.empty()) fail(ErrorCode::kConfigError, "parameter grid is empty");
  if (folds.fold_of.size() != x.rows) fail(ErrorCode::kDimensionMismatch, "fold plan does not match the matrix rows");
  if (folds.k < 2) fail(ErrorCode::kConfigError, "grid search needs at least 2 folds");
  const LearnerKind kind = kind_of(grid.front());
  for (const auto& cell : grid) {
    if (kind_of(cell) != kind) fail(ErrorCode::kConfigError, "a grid must use a single learner kind");
  }

  // Groups of cells trained together; prefixes of one boosting run serve every n_estimators.
  std::vector<std::vector<std::size_t>> groups;
  if (kind == LearnerKind::kGbt) {
    std::map<std::tuple<std::size_t, double, double, double>, std::size_t> slot;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const auto& p = std::get<GbtParams>(grid[c]);
      const auto key = std::make_tuple(p.max_depth, p.learning_rate, p.min_child_weight, p.lambda_l2);
      auto [it, inserted] = slot.emplace(key, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(c);
    }
  } else {
    for (std::size_t c = 0; c < grid.size(); ++c) groups.push_back({c});
  }

  const auto k = static_cast<std::size_t>(folds.k);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fold_scores(grid.size() * k, nan);
  std::vector<std::string> fold_errors(grid.size() * k);

  parallel_for(groups.size() * k, jobs, [&](std::size_t unit) {
    const auto& group = groups[unit / k];
    const std::size_t fold = unit % k;
    try {
      const auto train = folds.train_indices(static_cast<int>(fold));
      const auto valid = folds.test_indices(static_cast<int>(fold));
      LabelVector ytr, yva;
      for (auto i : train) ytr.push_back(y[i]);
      for (auto i : valid) yva.push_back(y[i]);
      const Matrix xtr = x.select_rows(train), xva = x.select_rows(valid);
      const std::uint64_t unit_seed = mix_seed(mix_seed(seed, group.front()), fold);
      if (kind == LearnerKind::kGbt) {
        GbtParams p = std::get<GbtParams>(grid[group.front()]);
        for (auto c : group) p.n_estimators = std::max(p.n_estimators, std::get<GbtParams>(grid[c]).n_estimators);
        const TrainedModel m = train_model(p, xtr, ytr, unit_seed);
        for (auto c : group) {
          const auto n_trees = std::get<GbtParams>(grid[c]).n_estimators;
          fold_scores[c * k + fold] = auroc(m.predict_proba_staged(xva, n_trees), yva);
        }
      } else {
        const TrainedModel m = train_model(grid[group.front()], xtr, ytr, unit_seed);
        fold_scores[group.front() * k + fold] = auroc(m.predict_proba(xva), yva);
      }
    } catch (const Error& e) {
      for (auto c : group) fold_errors[c * k + fold] = "fold " + std::to_string(fold) + ": " + e.what();
    }
  });

  GridSearchResult result;
  result.cells = grid;
  result.cell_scores.assign(grid.size(), nan);
  result.cell_errors.assign(grid.size(), "");
  bool any = false;
  double best = -1.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    double sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      if (!fold_errors[c * k + f].empty()) {
        result.cell_errors[c] = fold_errors[c * k + f];
        break;
      }
      sum += fold_scores[c * k + f];
    }
    if (!result.cell_errors[c].empty()) continue;
    result.cell_scores[c] = sum / static_cast<double>(k);
    if (!any || result.cell_scores[c] > best) {
      best = result.cell_scores[c];
      result.best_index = c;
      any = true;
    }
  }
  if (!any) fail(ErrorCode::kDegenerateLabels, "every grid cell failed; first error: " + result.cell_errors.front());
  result.best_params = grid[result.best_index];
  result.model = train_model(result.best_params, x, y, seed);
  return result;
}

}  // namespace tabembed
