#pragma once

// Schema, record sets, ingestion, fold planning and raw-feature matrices.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabembed/common.hpp"

namespace tabembed {

enum class FeatureKind { kStaticNumeric, kStaticCategorical, kTimeseriesNumeric };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct PlausibleRange {
  double low = 0.0;
  double high = 0.0;
  bool contains(double v) const { return v >= low && v <= high; }
};

struct FeatureDef {
  std::string name;
  std::string display_name;  // empty means "use name"
  std::string unit;
  FeatureKind kind = FeatureKind::kStaticNumeric;
  std::optional<PlausibleRange> plausible_range;
  // Ordered category labels for categorical features; encoded as their index.
  std::vector<std::string> categories;

  const std::string& label() const { return display_name.empty() ? name : display_name; }
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Throws kInvalidArgument on duplicate/empty names or inverted ranges.
  FeatureSchema(std::string id, std::vector<FeatureDef> features);

  const std::string& id() const { return id_; }
  const std::vector<FeatureDef>& features() const { return features_; }
  const FeatureDef* find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws if absent

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);
  static FeatureSchema load(const std::string& path);

 private:
  std::string id_;
  std::vector<FeatureDef> features_;
};

// The 25-feature ward-deterioration schema (vitals, AVPU and serum labs).
FeatureSchema clinical_diagnosis_schema();
// A small ICU time-series schema matching the 24-hour narrative template.
FeatureSchema icu_timeseries_schema();

struct SeriesPoint {
  double hours = 0.0;
  double value = 0.0;
  bool operator==(const SeriesPoint&) const = default;
};

// A feature absent from every map is missing.
struct Record {
  std::string id;
  std::map<std::string, double> numeric;
  std::map<std::string, std::string> categorical;
  std::map<std::string, std::vector<SeriesPoint>> series;

  bool observed(const FeatureDef& def) const;
  bool operator==(const Record&) const = default;
};

using LabelVector = std::vector<int>;

class RecordSet {
 public:
  RecordSet() = default;
  // Validates ids, label lengths/domains and series ordering.
  RecordSet(std::shared_ptr<const FeatureSchema> schema, std::vector<Record> records,
            std::map<std::string, LabelVector> tasks);

  const FeatureSchema& schema() const { return *schema_; }
  std::shared_ptr<const FeatureSchema> schema_ptr() const { return schema_; }
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const std::map<std::string, LabelVector>& tasks() const { return tasks_; }
  const LabelVector& labels(const std::string& task) const;

  RecordSet subset(const std::vector<std::size_t>& indices) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<Record> records_;
  std::map<std::string, LabelVector> tasks_;
};

// CSV: header row with `id`, schema feature columns and `label:<task>` columns.
// Series cells are `t1:v1;t2:v2` with t in hours.
RecordSet load_csv(const std::string& path, std::shared_ptr<const FeatureSchema> schema);
RecordSet parse_csv(std::string_view text, std::shared_ptr<const FeatureSchema> schema);
std::string to_csv(const RecordSet& records);
void write_csv(const RecordSet& records, const std::string& path);

// Splits one CSV line (RFC 4180 quoting) into cells.
std::vector<std::string> split_csv_line(std::string_view line);

struct FeatureValidation {
  std::string feature;
  std::size_t missing_count = 0;
  double missing_rate = 0.0;
  std::size_t range_violations = 0;
};

struct ValidationReport {
  std::size_t record_count = 0;
  std::vector<FeatureValidation> features;
  std::size_t total_range_violations() const;
  const FeatureValidation& at(std::string_view feature) const;
  nlohmann::json to_json() const;
};

ValidationReport validate(const RecordSet& records);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> ids;  // record order
  std::vector<int> fold_of;      // fold per record index

  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> train_indices(int fold) const;
  std::size_t fold_size(int fold) const;
};

// Deterministic k-fold split. With `stratify_labels`, positives and negatives are
// dealt round-robin separately so per-fold positive counts differ by at most one.
FoldPlan split_kfold(const std::vector<std::string>& ids, int k, std::uint64_t seed,
                     const LabelVector* stratify_labels = nullptr);
FoldPlan split_kfold(const RecordSet& records, int k, std::uint64_t seed,
                     const std::optional<std::string>& stratify_task = std::nullopt);

struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> columns;
  Matrix values;
  std::vector<std::uint8_t> missing_mask;  // rows x cols, 1 = imputed

  bool missing(std::size_t r, std::size_t c) const { return missing_mask[r * values.cols + c] != 0; }
  FeatureMatrix select_rows(const std::vector<std::size_t>& indices) const;
};

struct Imputation {
  enum class Kind { kMeanFromTrain, kConstant };
  Kind kind = Kind::kMeanFromTrain;
  double constant = 0.0;
};

// Column means over the training rows; series features expand into six summaries.
struct RawColumnStats {
  std::vector<std::string> columns;
  std::vector<double> means;
  std::uint64_t fingerprint() const;
};

std::vector<std::string> raw_column_names(const FeatureSchema& schema);
// Throws kEmptyFeatureColumn when a column has no observation among `rows`.
RawColumnStats fit_raw_stats(const RecordSet& records, const std::vector<std::size_t>& rows);
// When imputing from training means and no stats are given, the set itself is the
// training split and its own means are used.
FeatureMatrix prepare_raw_matrix(const RecordSet& records, const Imputation& imputation,
                                 const RawColumnStats* train_stats = nullptr);

}  // namespace tabembed
