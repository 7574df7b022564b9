#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabembed/backend.hpp"
#include "tabembed/features.hpp"
#include "tabembed/learners/grid_search.hpp"
#include "tabembed/learners/model.hpp"
#include "tabembed/pipeline/synthetic.hpp"
#include "tabembed/serializer.hpp"

namespace tabembed {

inline constexpr int kConfigSchemaVersion = 1;

enum class SourceKind { kRaw, kEmbedding, kAbProbability, kSequenceLikelihood };

std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view text);

// How a record is wrapped into a prompt for the language-model sources.
struct PromptSpec {
  int persona = 0;  // 0 = no system instruction, else 1-4
  std::optional<std::string> question;  // default depends on the source
  bool binary = false;                  // ask "Does this patient have <target>?"
  bool prevalence = false;              // quote the training-fold prevalence
  bool answer_options = false;
  ChatTemplate chat_template = ChatTemplate::kPlain;

  nlohmann::json to_json() const;
  static PromptSpec from_json(const nlohmann::json& j);
};

struct FeatureSource {
  SourceKind kind = SourceKind::kRaw;
  BackendDescriptor backend;
  SerializationConfig serialization;
  PoolingStrategy pooling = PoolingStrategy::kMean;
  PromptSpec prompt;
  bool zscore = false;  // standardize embedding columns with training-fold statistics

  nlohmann::json to_json() const;
  static FeatureSource from_json(const nlohmann::json& j);
};

// One compared method: exactly one feature source, optionally followed by a learner.
// Probability sources without a learner are scored directly; with one, both the direct
// scores and "<name>+<learner>" are reported.
struct MethodConfig {
  std::string name;
  FeatureSource source;
  std::optional<LearnerKind> learner;
  std::vector<LearnerParams> grid;  // empty = default grid for the learner

  nlohmann::json to_json() const;
  static MethodConfig from_json(const nlohmann::json& j);
};

struct FoldSpec {
  int k = 5;
  std::uint64_t seed = 0;
  bool stratify = true;
  int inner_k = 3;  // folds for grid search inside each training split
};

struct MetricsSpec {
  std::size_t n_resamples = 1000;
  double level = 0.95;
  std::size_t n_bins = 10;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::shared_ptr<const FeatureSchema> schema;
  std::optional<std::filesystem::path> dataset_csv;
  std::optional<SynthesisSpec> synthesis;
  std::vector<std::string> tasks;
  std::map<std::string, std::string> targets;  // task -> wording in prompts (default: task name)
  FoldSpec folds;
  std::vector<MethodConfig> methods;
  MetricsSpec metrics;
  std::optional<std::string> correlation_reference;  // method name
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> cache_dir;

  void check() const;
  std::string target_text(const std::string& task) const;

  // Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  // Hash of the canonical JSON (jobs, output and cache locations excluded).
  std::string hash() const;

  // TABEMBED_ENDPOINT replaces every HTTP endpoint; TABEMBED_CACHE replaces the cache dir.
  void apply_environment();
  void set_endpoint(const std::string& url);
};

// "diagnosis" / "mimic" name the built-in schemas; anything else is a JSON file path.
std::shared_ptr<const FeatureSchema> resolve_schema(const nlohmann::json& spec, const std::filesystem::path& base_dir);

// The dataset a config names, synthesized or loaded.
SyntheticDataset load_dataset(const ExperimentConfig& cfg);

}  // namespace tabembed
