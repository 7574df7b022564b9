#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabembed/embedding_cache.hpp"
#include "tabembed/pipeline/config.hpp"
#include "tabembed/pipeline/report.hpp"

namespace tabembed {

// What one outer fold produced for one method.
struct FoldOutcome {
  std::vector<std::size_t> test_indices;
  std::vector<double> direct_scores;   // probability sources, aligned with test_indices
  std::vector<double> learner_scores;  // when the method has a learner
  nlohmann::json artifacts = nlohmann::json::object();  // fingerprints of everything fitted on training rows
  std::string artifact_hash;
};

class ExperimentRunner {
 public:
  // `cache` may be null (no caching).
  ExperimentRunner(const ExperimentConfig& cfg, EmbeddingCache* cache);

  FoldPlan outer_folds(const RecordSet& data, const std::string& task) const;

  // Trains on the fold's training rows (optionally a stratified subsample) and scores its
  // test rows. Errors carry "[stage=... fold=...]" context.
  FoldOutcome run_fold(const MethodConfig& method, const std::string& task, const RecordSet& data,
                       const FoldPlan& plan, int fold, double train_fraction = 1.0);

  Backend& backend_for(const MethodConfig& method, const std::shared_ptr<const FeatureSchema>& schema);

 private:
  const ExperimentConfig& cfg_;
  EmbeddingCache* cache_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Backend>> backends_;
};

// Reported names for a method: its own name for direct probability scores and
// "<name>+<learner>" for learner-backed rows of probability sources.
std::vector<std::string> reported_names(const MethodConfig& method);

EvalReport run_experiment(const ExperimentConfig& cfg);
EvalReport run_experiment(const ExperimentConfig& cfg, const SyntheticDataset& data, EmbeddingCache* cache);

struct SweepRow {
  std::string task;
  std::string method;
  double fraction = 1.0;
  bool ok = false;
  std::string error;
  MetricCI auroc;

  nlohmann::json to_json() const;
};

// Stratified seeded subsampling of every training fold at each fraction in (0, 1].
// A fraction leaving fewer than 10 training positives fails with kFractionTooSmall.
std::vector<SweepRow> training_size_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions);
std::vector<SweepRow> training_size_sweep(const ExperimentConfig& cfg, const SyntheticDataset& data,
                                          const std::vector<double>& fractions, EmbeddingCache* cache);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Training rows of `fold` subsampled per class; fraction 1 returns them unchanged.
std::vector<std::size_t> subsample_training(const std::vector<std::size_t>& train, const LabelVector& labels,
                                            double fraction, std::uint64_t seed);

// Copy of `data` whose records in the fold's test split carry sentinel feature values and
// flipped labels for `task`.
RecordSet poison_test_fold(const RecordSet& data, const FoldPlan& plan, int fold, const std::string& task);

struct LeakageAudit {
  bool passed = true;
  std::size_t checks = 0;
  std::vector<std::string> findings;

  nlohmann::json to_json() const;
};

// For every task, method and fold: trains on clean data and on data with that fold's test
// split poisoned, and compares the training-artifact fingerprints.
LeakageAudit audit_leakage(const ExperimentConfig& cfg, const RecordSet& data, EmbeddingCache* cache);

}  // namespace tabembed
