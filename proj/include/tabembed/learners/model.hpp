#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tabembed/learners/elastic_net.hpp"
#include "tabembed/learners/forest.hpp"
#include "tabembed/learners/gbt.hpp"

namespace tabembed {

enum class LearnerKind { kGbt, kElasticNet, kRandomForest };

std::string_view to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(std::string_view text);

using LearnerParams = std::variant<GbtParams, ElasticNetParams, ForestParams>;

LearnerKind kind_of(const LearnerParams& params);
nlohmann::json params_to_json(const LearnerParams& params);
LearnerParams params_from_json(LearnerKind kind, const nlohmann::json& j);

struct TrainedModel {
  std::variant<GbtModel, LinearModel, ForestModel> model;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
  std::string train_fold;  // free-form provenance, e.g. "task=sepsis fold=2"

  LearnerKind kind() const;
  LearnerParams params() const;

  // Probabilities strictly inside (0, 1).
  std::vector<double> predict_proba(const Matrix& x) const;
  // GBT only: probabilities from the first `n_trees` boosting rounds.
  std::vector<double> predict_proba_staged(const Matrix& x, std::size_t n_trees) const;

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

  // Hash of the canonical JSON form.
  std::uint64_t fingerprint() const;
};

TrainedModel train_model(const LearnerParams& params, const Matrix& x, const LabelVector& y, std::uint64_t seed);

}  // namespace tabembed
