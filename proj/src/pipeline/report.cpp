#include "tabembed/pipeline/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tabembed {

namespace {

CorrelationResult correlation_from_json(const nlohmann::json& j) {
  CorrelationResult r;
  r.method = j.at("method").get<std::string>() == "pearson" ? CorrelationMethod::kPearson : CorrelationMethod::kSpearman;
  r.coefficient = j.at("coefficient").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.exact = j.value("exact", false);
  return r;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string file_stem(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

}  // namespace

nlohmann::json MethodResult::to_json() const {
  nlohmann::json j = {{"task", task}, {"method", method}, {"ok", ok}};
  if (!ok) {
    j["error_code"] = error_code;
    j["error"] = error;
    return j;
  }
  j["auroc"] = auroc.to_json();
  j["accuracy"] = accuracy;
  j["confusion"] = confusion.to_json();
  j["calibration"] = calibration.to_json();
  j["ids"] = ids;
  j["scores"] = scores;
  j["folds"] = folds;
  return j;
}

MethodResult MethodResult::from_json(const nlohmann::json& j) {
  MethodResult r;
  r.task = j.at("task").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.ok = j.at("ok").get<bool>();
  if (!r.ok) {
    r.error_code = j.value("error_code", "");
    r.error = j.value("error", "");
    return r;
  }
  r.auroc = MetricCI::from_json(j.at("auroc"));
  r.accuracy = j.at("accuracy").get<double>();
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                 c.at("fn").get<std::size_t>()};
  r.calibration = CalibrationCurve::from_json(j.at("calibration"));
  r.ids = j.at("ids").get<std::vector<std::string>>();
  r.scores = j.at("scores").get<std::vector<double>>();
  r.folds = j.at("folds").get<std::vector<nlohmann::json>>();
  return r;
}

nlohmann::json CorrelationEntry::to_json() const {
  return {{"task", task},
          {"method", method},
          {"reference", reference},
          {"spearman", spearman.to_json()},
          {"pearson", pearson.to_json()}};
}

CorrelationEntry CorrelationEntry::from_json(const nlohmann::json& j) {
  return {j.at("task").get<std::string>(), j.at("method").get<std::string>(), j.at("reference").get<std::string>(),
          correlation_from_json(j.at("spearman")), correlation_from_json(j.at("pearson"))};
}

const MethodResult* EvalReport::find(const std::string& task, const std::string& method) const {
  for (const auto& r : results) {
    if (r.task == task && r.method == method) return &r;
  }
  return nullptr;
}

nlohmann::json EvalReport::to_json(bool include_runtime) const {
  nlohmann::json rs = nlohmann::json::array(), cs = nlohmann::json::array();
  for (const auto& r : results) rs.push_back(r.to_json());
  for (const auto& c : correlations) cs.push_back(c.to_json());
  nlohmann::json j = {{"config_hash", config_hash}, {"tasks", tasks},       {"methods", methods},
                      {"results", rs},              {"correlations", cs}, {"seeds", seeds},
                      {"metadata", metadata}};
  if (include_runtime) j["runtime"] = runtime;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.tasks = j.at("tasks").get<std::vector<std::string>>();
    r.methods = j.at("methods").get<std::vector<std::string>>();
    for (const auto& x : j.at("results")) r.results.push_back(MethodResult::from_json(x));
    for (const auto& x : j.at("correlations")) r.correlations.push_back(CorrelationEntry::from_json(x));
    r.seeds = j.value("seeds", nlohmann::json::object());
    r.metadata = j.value("metadata", nlohmann::json::object());
    r.runtime = j.value("runtime", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseFailure, std::string("malformed report: ") + e.what());
  }
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseFailure, "report " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::string report_csv(const EvalReport& report) {
  std::string out = "task,method,metric,value,lo,hi\n";
  for (const auto& r : report.results) {
    const std::string prefix = csv_cell(r.task) + "," + csv_cell(r.method) + ",";
    if (!r.ok) {
      out += prefix + "auroc,,,\n";
      continue;
    }
    out += prefix + "auroc," + number(r.auroc.point) + "," + number(r.auroc.lo) + "," + number(r.auroc.hi) + "\n";
    out += prefix + "accuracy," + number(r.accuracy) + ",,\n";
  }
  return out;
}

std::string report_markdown(const EvalReport& report) {
  std::string out = "| Model/Source |";
  std::string rule = "| --- |";
  for (const auto& t : report.tasks) {
    out += " " + t + " AUROC (95% CI) |";
    rule += " --- |";
  }
  out += "\n" + rule + "\n";
  for (const auto& m : report.methods) {
    out += "| " + m + " |";
    for (const auto& t : report.tasks) {
      const MethodResult* r = report.find(t, m);
      if (!r) out += " n/a |";
      else if (!r->ok) out += " failed |";
      else out += " " + percent(r->auroc.point) + " (" + percent(r->auroc.lo) + ", " + percent(r->auroc.hi) + ") |";
    }
    out += "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir,
                                               const std::vector<ReportFormat>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + p.string());
    out << text;
    if (!out) fail(ErrorCode::kIoError, "write to " + p.string() + " failed");
    written.push_back(p);
  };
  for (auto f : formats) {
    switch (f) {
      case ReportFormat::kJson: write(dir / "report.json", report.to_json().dump(2) + "\n"); break;
      case ReportFormat::kCsv: write(dir / "report.csv", report_csv(report)); break;
      case ReportFormat::kMarkdown: write(dir / "report.md", report_markdown(report)); break;
    }
  }
  for (const auto& r : report.results) {
    if (!r.ok) continue;
    const auto p = dir / ("calibration_" + file_stem(r.task) + "_" + file_stem(r.method) + ".csv");
    r.calibration.write_csv(p);
    written.push_back(p);
  }
  return written;
}

}  // namespace tabembed
