#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabembed/metrics.hpp"

namespace tabembed {

// Outcome of one (task, method) pair over pooled out-of-fold test scores.
struct MethodResult {
  std::string task;
  std::string method;
  bool ok = false;
  std::string error_code;  // ErrorCode name when !ok
  std::string error;       // "[stage=... fold=...] message" when !ok

  MetricCI auroc;
  double accuracy = 0.0;  // threshold 0.5
  ConfusionMatrix confusion;
  CalibrationCurve calibration;
  std::vector<std::string> ids;  // record order
  std::vector<double> scores;    // out-of-fold probabilities aligned with ids
  std::vector<nlohmann::json> folds;  // per fold: artifact hash, chosen params

  nlohmann::json to_json() const;
  static MethodResult from_json(const nlohmann::json& j);
};

struct CorrelationEntry {
  std::string task;
  std::string method;
  std::string reference;
  CorrelationResult spearman;
  CorrelationResult pearson;

  nlohmann::json to_json() const;
  static CorrelationEntry from_json(const nlohmann::json& j);
};

struct EvalReport {
  std::string config_hash;
  std::vector<std::string> tasks;
  std::vector<std::string> methods;  // reported method names in config order
  std::vector<MethodResult> results;
  std::vector<CorrelationEntry> correlations;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  nlohmann::json runtime = nlohmann::json::object();  // wall-clock figures, excluded from determinism checks

  const MethodResult* find(const std::string& task, const std::string& method) const;

  nlohmann::json to_json(bool include_runtime = true) const;
  static EvalReport from_json(const nlohmann::json& j);
  static EvalReport load(const std::filesystem::path& path);
};

// Rows: task,method,metric,value,lo,hi (auroc with its interval; accuracy without).
std::string report_csv(const EvalReport& report);
// Results table: "Model/Source" then one "<task> AUROC (95% CI)" column per task, in percent.
std::string report_markdown(const EvalReport& report);

enum class ReportFormat { kJson, kCsv, kMarkdown };

// Writes report.json / report.csv / report.md into `dir`, plus one calibration CSV per
// successful (task, method). Returns the written paths.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir,
                                               const std::vector<ReportFormat>& formats = {
                                                   ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown});

}  // namespace tabembed
