#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabembed/learners/model.hpp"
#include "tabembed/tabular.hpp"

namespace tabembed {

// Cartesian grids, enumerated with the first listed parameter varying slowest.
std::vector<LearnerParams> default_gbt_grid();     // n_estimators x max_depth x learning_rate x min_child_weight
std::vector<LearnerParams> default_lr_grid();      // alpha x l1_ratio
std::vector<LearnerParams> default_forest_grid();  // n_trees x max_depth x max_features_fraction
std::vector<LearnerParams> default_grid(LearnerKind kind);

// Grid from a JSON object mapping parameter names to value lists (a scalar means one value).
// Parameters left out keep their defaults.
std::vector<LearnerParams> grid_from_json(LearnerKind kind, const nlohmann::json& spec);

struct GridSearchResult {
  std::vector<LearnerParams> cells;
  std::vector<double> cell_scores;       // mean validation AUROC; NaN marks a failed cell
  std::vector<std::string> cell_errors;  // empty for cells that succeeded
  std::size_t best_index = 0;
  LearnerParams best_params;
  TrainedModel model;  // best cell refit on all rows

  nlohmann::json summary() const;
};

// Scores every cell by mean validation AUROC over the folds of `folds` (which index the rows
// of x), then refits the best cell on all rows. Ties go to the earlier cell. Boosting cells
// that differ only in n_estimators share one training run per fold and are scored on prefixes.
GridSearchResult grid_search(const std::vector<LearnerParams>& grid, const Matrix& x, const LabelVector& y,
                             const FoldPlan& folds, std::uint64_t seed, int jobs = 1);

}  // namespace tabembed
