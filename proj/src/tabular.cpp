#include "tabembed/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace tabembed {

namespace {

constexpr std::string_view kLabelPrefix = "label:";

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kStaticNumeric: return "static-numeric";
    case FeatureKind::kStaticCategorical: return "static-categorical";
    case FeatureKind::kTimeseriesNumeric: return "timeseries-numeric";
  }
  return "static-numeric";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "static-numeric") return FeatureKind::kStaticNumeric;
  if (text == "static-categorical") return FeatureKind::kStaticCategorical;
  if (text == "timeseries-numeric") return FeatureKind::kTimeseriesNumeric;
  fail(ErrorCode::kConfigError, "unknown feature kind '" + std::string(text) + "'");
}

FeatureSchema::FeatureSchema(std::string id, std::vector<FeatureDef> features)
    : id_(std::move(id)), features_(std::move(features)) {
  std::set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) fail(ErrorCode::kInvalidArgument, "feature name must be nonempty");
    if (f.name == "id" || f.name.starts_with(kLabelPrefix)) {
      fail(ErrorCode::kInvalidArgument, "reserved feature name '" + f.name + "'");
    }
    if (!seen.insert(f.name).second) fail(ErrorCode::kInvalidArgument, "duplicate feature name '" + f.name + "'");
    if (f.plausible_range && !(f.plausible_range->low < f.plausible_range->high)) {
      fail(ErrorCode::kInvalidArgument, "plausible range of '" + f.name + "' must have low < high");
    }
  }
}

const FeatureDef* FeatureSchema::find(std::string_view name) const {
  for (const auto& f : features_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  fail(ErrorCode::kInvalidArgument, "feature '" + std::string(name) + "' not in schema");
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : features_) {
    nlohmann::json j{{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"unit", f.unit}};
    if (!f.display_name.empty()) j["display_name"] = f.display_name;
    if (f.plausible_range) j["plausible_range"] = {f.plausible_range->low, f.plausible_range->high};
    if (!f.categories.empty()) j["categories"] = f.categories;
    features.push_back(std::move(j));
  }
  return {{"id", id_}, {"features", features}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  try {
    std::vector<FeatureDef> defs;
    for (const auto& item : j.at("features")) {
      FeatureDef f;
      f.name = item.at("name").get<std::string>();
      f.display_name = item.value("display_name", std::string());
      f.unit = item.value("unit", std::string());
      f.kind = feature_kind_from_string(item.value("kind", std::string("static-numeric")));
      if (item.contains("plausible_range") && !item["plausible_range"].is_null()) {
        const auto& r = item["plausible_range"];
        f.plausible_range = PlausibleRange{r.at(0).get<double>(), r.at(1).get<double>()};
      }
      if (item.contains("categories")) f.categories = item["categories"].get<std::vector<std::string>>();
      defs.push_back(std::move(f));
    }
    return FeatureSchema(j.value("id", std::string("custom")), std::move(defs));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed schema: ") + e.what());
  }
}

FeatureSchema FeatureSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open schema file " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kConfigError, "schema " + path + ": " + e.what());
  }
}

namespace {

FeatureDef numeric(std::string name, std::string display, std::string unit, double lo, double hi) {
  return FeatureDef{std::move(name), std::move(display), std::move(unit), FeatureKind::kStaticNumeric,
                    PlausibleRange{lo, hi}, {}};
}

FeatureDef series(std::string name, std::string display, std::string unit, double lo, double hi) {
  return FeatureDef{std::move(name), std::move(display), std::move(unit), FeatureKind::kTimeseriesNumeric,
                    PlausibleRange{lo, hi}, {}};
}

}  // namespace

FeatureSchema clinical_diagnosis_schema() {
  std::vector<FeatureDef> f;
  f.push_back(numeric("age", "age", "years", 18, 100));
  f.push_back(numeric("sbp", "systolic blood pressure", "mmHg", 60, 220));
  f.push_back(numeric("dbp", "diastolic blood pressure", "mmHg", 30, 130));
  f.push_back(numeric("spo2", "oxygen saturation", "%", 70, 100));
  f.push_back(numeric("temperature", "body temperature", "celsius degree", 34, 42));
  f.push_back(numeric("ppi", "pulse pressure index", "", 0.1, 0.8));
  f.push_back(FeatureDef{"avpu", "AVPU", "", FeatureKind::kStaticCategorical, std::nullopt,
                         {"Alert", "Voice", "Pain", "Unresponsive"}});
  f.push_back(numeric("albumin", "albumin", "g/dL", 1.5, 5.5));
  f.push_back(numeric("alk_phos", "alkaline phosphatase", "U/L", 30, 500));
  f.push_back(numeric("anion_gap", "anion gap", "mEq/L", 3, 30));
  f.push_back(numeric("bilirubin", "total bilirubin", "mg/dL", 0.1, 15));
  f.push_back(numeric("bun", "blood urea nitrogen", "mg/dL", 5, 120));
  f.push_back(numeric("bcr", "BUN to creatinine ratio", "", 5, 40));
  f.push_back(numeric("calcium", "calcium", "mg/dL", 6, 12));
  f.push_back(numeric("chloride", "chloride", "mEq/L", 85, 120));
  f.push_back(numeric("co2", "carbon dioxide", "mEq/L", 10, 40));
  f.push_back(numeric("creatinine", "creatinine", "mg/dL", 0.3, 10));
  f.push_back(numeric("glucose", "glucose", "mg/dL", 40, 500));
  f.push_back(numeric("hemoglobin", "hemoglobin", "g/dL", 5, 18));
  f.push_back(numeric("platelets", "platelet count", "K/uL", 20, 600));
  f.push_back(numeric("potassium", "potassium", "mEq/L", 2.5, 7));
  f.push_back(numeric("sgot", "SGOT", "U/L", 5, 500));
  f.push_back(numeric("sodium", "sodium", "mEq/L", 120, 160));
  f.push_back(numeric("total_protein", "total protein", "g/dL", 4, 9));
  f.push_back(numeric("wbc", "white blood cell", "K/uL", 1, 40));
  return FeatureSchema("diagnosis", std::move(f));
}

FeatureSchema icu_timeseries_schema() {
  std::vector<FeatureDef> f;
  f.push_back(series("alt", "alanine aminotransferas", "IU/L", 5, 500));
  f.push_back(series("albumin", "albumin", "g/dL", 1.5, 5.5));
  f.push_back(series("anion_gap", "anion gap", "mEq/L", 3, 30));
  f.push_back(series("bicarbonate", "bicarbonate", "mEq/L", 10, 40));
  f.push_back(series("bun", "blood urea nitrogen", "mg/dL", 5, 120));
  f.push_back(series("creatinine", "creatinine", "mg/dL", 0.3, 10));
  f.push_back(series("glucose", "glucose", "mg/dL", 40, 500));
  f.push_back(series("heart_rate", "heart rate", "bpm", 30, 200));
  f.push_back(series("sodium", "sodium", "mEq/L", 120, 160));
  f.push_back(series("wbc", "white blood cell count", "K/uL", 1, 40));
  return FeatureSchema("mimic", std::move(f));
}

bool Record::observed(const FeatureDef& def) const {
  switch (def.kind) {
    case FeatureKind::kStaticNumeric: return numeric.contains(def.name);
    case FeatureKind::kStaticCategorical: return categorical.contains(def.name);
    case FeatureKind::kTimeseriesNumeric: {
      auto it = series.find(def.name);
      return it != series.end() && !it->second.empty();
    }
  }
  return false;
}

RecordSet::RecordSet(std::shared_ptr<const FeatureSchema> schema, std::vector<Record> records,
                     std::map<std::string, LabelVector> tasks)
    : schema_(std::move(schema)), records_(std::move(records)), tasks_(std::move(tasks)) {
  if (!schema_) fail(ErrorCode::kInvalidArgument, "record set requires a schema");
  std::set<std::string_view> ids;
  for (const auto& r : records_) {
    if (!ids.insert(r.id).second) fail(ErrorCode::kDuplicateId, "duplicate record id '" + r.id + "'");
    for (const auto& [name, points] : r.series) {
      for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i - 1].hours < points[i].hours)) {
          fail(ErrorCode::kMalformedSeries, "series '" + name + "' of record '" + r.id + "' not strictly ascending");
        }
      }
    }
  }
  for (const auto& [task, labels] : tasks_) {
    if (labels.size() != records_.size()) {
      fail(ErrorCode::kLengthMismatch, "label vector of task '" + task + "' has wrong length");
    }
    for (int y : labels) {
      if (y != 0 && y != 1) fail(ErrorCode::kMalformedLabel, "labels of task '" + task + "' must be 0/1");
    }
  }
}

const LabelVector& RecordSet::labels(const std::string& task) const {
  auto it = tasks_.find(task);
  if (it == tasks_.end()) fail(ErrorCode::kConfigError, "unknown task '" + task + "'");
  return it->second;
}

RecordSet RecordSet::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Record> recs;
  recs.reserve(indices.size());
  for (auto i : indices) recs.push_back(records_.at(i));
  std::map<std::string, LabelVector> tasks;
  for (const auto& [task, labels] : tasks_) {
    LabelVector sub;
    sub.reserve(indices.size());
    for (auto i : indices) sub.push_back(labels[i]);
    tasks.emplace(task, std::move(sub));
  }
  return RecordSet(schema_, std::move(recs), std::move(tasks));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

RecordSet parse_csv(std::string_view text, std::shared_ptr<const FeatureSchema> schema) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) fail(ErrorCode::kParseFailure, "CSV has no header row");
  if (lines.front().starts_with("\xEF\xBB\xBF")) lines.front().remove_prefix(3);

  const auto header = split_csv_line(lines.front());
  enum class ColKind { kId, kFeature, kLabel };
  struct Column {
    ColKind kind;
    const FeatureDef* feature = nullptr;
    std::string task;
  };
  std::vector<Column> columns;
  bool has_id = false;
  std::map<std::string, LabelVector> tasks;
  std::vector<std::string> task_order;
  for (const auto& name : header) {
    if (name == "id") {
      has_id = true;
      columns.push_back({ColKind::kId, nullptr, {}});
    } else if (name.starts_with(kLabelPrefix)) {
      std::string task = name.substr(kLabelPrefix.size());
      if (task.empty()) fail(ErrorCode::kUnknownColumn, "empty task name in label column");
      columns.push_back({ColKind::kLabel, nullptr, task});
      tasks[task];
    } else if (const FeatureDef* def = schema->find(name)) {
      columns.push_back({ColKind::kFeature, def, {}});
    } else {
      fail(ErrorCode::kUnknownColumn, "column '" + name + "' is neither a schema feature nor a label");
    }
  }
  if (!has_id) fail(ErrorCode::kUnknownColumn, "CSV header lacks mandatory 'id' column");

  std::vector<Record> records;
  records.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != columns.size()) {
      fail(ErrorCode::kParseFailure, "row " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                                         " cells, header has " + std::to_string(columns.size()));
    }
    Record rec;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& cell = cells[c];
      const Column& col = columns[c];
      if (col.kind == ColKind::kId) {
        rec.id = cell;
        continue;
      }
      if (col.kind == ColKind::kLabel) {
        if (cell.empty()) fail(ErrorCode::kMissingLabel, "row " + std::to_string(li + 1) + " lacks label for " + col.task);
        auto v = parse_double(cell);
        if (!v || (*v != 0.0 && *v != 1.0)) {
          fail(ErrorCode::kMalformedLabel, "label '" + cell + "' for " + col.task + " is not 0/1");
        }
        tasks[col.task].push_back(static_cast<int>(*v));
        continue;
      }
      if (cell.empty()) continue;
      const FeatureDef& def = *col.feature;
      switch (def.kind) {
        case FeatureKind::kStaticNumeric: {
          auto v = parse_double(cell);
          if (!v) fail(ErrorCode::kMalformedNumber, "cell '" + cell + "' of " + def.name + " is not numeric");
          rec.numeric[def.name] = *v;
          break;
        }
        case FeatureKind::kStaticCategorical: {
          if (!def.categories.empty() &&
              std::find(def.categories.begin(), def.categories.end(), cell) == def.categories.end()) {
            fail(ErrorCode::kUnknownCategory, "category '" + cell + "' not declared for " + def.name);
          }
          rec.categorical[def.name] = cell;
          break;
        }
        case FeatureKind::kTimeseriesNumeric: {
          std::vector<SeriesPoint> points;
          std::string_view rest = cell;
          while (!rest.empty()) {
            auto semi = rest.find(';');
            std::string_view pair = rest.substr(0, semi);
            rest = semi == std::string_view::npos ? std::string_view() : rest.substr(semi + 1);
            if (pair.empty()) continue;
            auto colon = pair.find(':');
            if (colon == std::string_view::npos) {
              fail(ErrorCode::kMalformedSeries, "series pair '" + std::string(pair) + "' lacks ':'");
            }
            auto t = parse_double(pair.substr(0, colon));
            auto v = parse_double(pair.substr(colon + 1));
            if (!t || !v) fail(ErrorCode::kMalformedNumber, "series pair '" + std::string(pair) + "' is not numeric");
            points.push_back({*t, *v});
          }
          std::stable_sort(points.begin(), points.end(),
                           [](const SeriesPoint& a, const SeriesPoint& b) { return a.hours < b.hours; });
          if (!points.empty()) rec.series[def.name] = std::move(points);
          break;
        }
      }
    }
    if (rec.id.empty()) fail(ErrorCode::kParseFailure, "row " + std::to_string(li + 1) + " has an empty id");
    records.push_back(std::move(rec));
  }
  return RecordSet(std::move(schema), std::move(records), std::move(tasks));
}

RecordSet load_csv(const std::string& path, std::shared_ptr<const FeatureSchema> schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), std::move(schema));
}

std::string to_csv(const RecordSet& records) {
  std::ostringstream out;
  out << "id";
  for (const auto& f : records.schema().features()) out << ',' << csv_escape(f.name);
  for (const auto& [task, labels] : records.tasks()) out << ',' << kLabelPrefix << task;
  out << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records.records()[i];
    out << csv_escape(r.id);
    for (const auto& f : records.schema().features()) {
      out << ',';
      if (!r.observed(f)) continue;
      switch (f.kind) {
        case FeatureKind::kStaticNumeric: out << format_shortest(r.numeric.at(f.name)); break;
        case FeatureKind::kStaticCategorical: out << csv_escape(r.categorical.at(f.name)); break;
        case FeatureKind::kTimeseriesNumeric: {
          bool first = true;
          for (const auto& p : r.series.at(f.name)) {
            if (!first) out << ';';
            first = false;
            out << format_shortest(p.hours) << ':' << format_shortest(p.value);
          }
          break;
        }
      }
    }
    for (const auto& [task, labels] : records.tasks()) out << ',' << labels[i];
    out << '\n';
  }
  return out.str();
}

void write_csv(const RecordSet& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  out << to_csv(records);
}

std::size_t ValidationReport::total_range_violations() const {
  std::size_t total = 0;
  for (const auto& f : features) total += f.range_violations;
  return total;
}

const FeatureValidation& ValidationReport::at(std::string_view feature) const {
  for (const auto& f : features) {
    if (f.feature == feature) return f;
  }
  fail(ErrorCode::kInvalidArgument, "no validation entry for '" + std::string(feature) + "'");
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& f : features) {
    items.push_back({{"feature", f.feature},
                     {"missing_count", f.missing_count},
                     {"missing_rate", f.missing_rate},
                     {"range_violations", f.range_violations}});
  }
  return {{"record_count", record_count}, {"features", items}};
}

ValidationReport validate(const RecordSet& records) {
  ValidationReport report;
  report.record_count = records.size();
  for (const auto& def : records.schema().features()) {
    FeatureValidation fv;
    fv.feature = def.name;
    for (const auto& r : records.records()) {
      if (!r.observed(def)) {
        ++fv.missing_count;
        continue;
      }
      if (!def.plausible_range) continue;
      if (def.kind == FeatureKind::kStaticNumeric) {
        if (!def.plausible_range->contains(r.numeric.at(def.name))) ++fv.range_violations;
      } else if (def.kind == FeatureKind::kTimeseriesNumeric) {
        for (const auto& p : r.series.at(def.name)) {
          if (!def.plausible_range->contains(p.value)) ++fv.range_violations;
        }
      }
    }
    fv.missing_rate = records.size() == 0 ? 0.0 : static_cast<double>(fv.missing_count) / records.size();
    report.features.push_back(fv);
  }
  return report;
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::size_t FoldPlan::fold_size(int fold) const {
  return static_cast<std::size_t>(std::count(fold_of.begin(), fold_of.end(), fold));
}

FoldPlan split_kfold(const std::vector<std::string>& ids, int k, std::uint64_t seed, const LabelVector* stratify_labels) {
  if (k < 2) fail(ErrorCode::kInvalidArgument, "k must be at least 2");
  if (static_cast<std::size_t>(k) > ids.size()) {
    fail(ErrorCode::kTooFewRecords, std::to_string(ids.size()) + " records cannot fill " + std::to_string(k) + " folds");
  }
  if (stratify_labels && stratify_labels->size() != ids.size()) {
    fail(ErrorCode::kLengthMismatch, "stratification labels do not match record count");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.ids = ids;
  plan.fold_of.assign(ids.size(), -1);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> groups;
  if (stratify_labels) {
    groups.resize(2);
    for (std::size_t i = 0; i < ids.size(); ++i) groups[(*stratify_labels)[i] == 1 ? 0 : 1].push_back(i);
  } else {
    groups.resize(1);
    groups[0].resize(ids.size());
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }
  std::size_t dealt = 0;
  for (auto& group : groups) {
    std::shuffle(group.begin(), group.end(), rng);
    for (auto idx : group) plan.fold_of[idx] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
  }
  return plan;
}

FoldPlan split_kfold(const RecordSet& records, int k, std::uint64_t seed, const std::optional<std::string>& stratify_task) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records.records()) ids.push_back(r.id);
  if (stratify_task) return split_kfold(ids, k, seed, &records.labels(*stratify_task));
  return split_kfold(ids, k, seed, nullptr);
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.columns = columns;
  out.values = values.select_rows(indices);
  out.missing_mask.resize(indices.size() * values.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.row_ids.push_back(row_ids.at(indices[r]));
    std::copy_n(missing_mask.begin() + static_cast<std::ptrdiff_t>(indices[r] * values.cols), values.cols,
                out.missing_mask.begin() + static_cast<std::ptrdiff_t>(r * values.cols));
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 6> kSeriesSummaries = {"first", "last", "min", "max", "mean", "count"};

// Writes the schema's raw columns for one record; NaN marks a missing cell.
void raw_row(const FeatureSchema& schema, const Record& r, std::vector<double>& out) {
  out.clear();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& def : schema.features()) {
    switch (def.kind) {
      case FeatureKind::kStaticNumeric: {
        auto it = r.numeric.find(def.name);
        out.push_back(it == r.numeric.end() ? nan : it->second);
        break;
      }
      case FeatureKind::kStaticCategorical: {
        auto it = r.categorical.find(def.name);
        if (it == r.categorical.end()) {
          out.push_back(nan);
        } else {
          auto pos = std::find(def.categories.begin(), def.categories.end(), it->second);
          if (pos == def.categories.end()) {
            fail(ErrorCode::kUnknownCategory, "category '" + it->second + "' not declared for " + def.name);
          }
          out.push_back(static_cast<double>(pos - def.categories.begin()));
        }
        break;
      }
      case FeatureKind::kTimeseriesNumeric: {
        auto it = r.series.find(def.name);
        if (it == r.series.end() || it->second.empty()) {
          for (int s = 0; s < 5; ++s) out.push_back(nan);
          out.push_back(0.0);
        } else {
          const auto& pts = it->second;
          double lo = pts.front().value, hi = lo, sum = 0.0;
          for (const auto& p : pts) {
            lo = std::min(lo, p.value);
            hi = std::max(hi, p.value);
            sum += p.value;
          }
          out.push_back(pts.front().value);
          out.push_back(pts.back().value);
          out.push_back(lo);
          out.push_back(hi);
          out.push_back(sum / static_cast<double>(pts.size()));
          out.push_back(static_cast<double>(pts.size()));
        }
        break;
      }
    }
  }
}

}  // namespace

std::vector<std::string> raw_column_names(const FeatureSchema& schema) {
  std::vector<std::string> cols;
  for (const auto& def : schema.features()) {
    if (def.kind == FeatureKind::kTimeseriesNumeric) {
      for (auto s : kSeriesSummaries) cols.push_back(def.name + ":" + std::string(s));
    } else {
      cols.push_back(def.name);
    }
  }
  return cols;
}

std::uint64_t RawColumnStats::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& c : columns) h = fnv1a64(c, h);
  return fnv1a64_bytes(means.data(), means.size() * sizeof(double), h);
}

RawColumnStats fit_raw_stats(const RecordSet& records, const std::vector<std::size_t>& rows) {
  RawColumnStats stats;
  stats.columns = raw_column_names(records.schema());
  const std::size_t ncol = stats.columns.size();
  std::vector<double> sum(ncol, 0.0);
  std::vector<std::size_t> count(ncol, 0);
  std::vector<double> buf;
  for (auto i : rows) {
    raw_row(records.schema(), records.records().at(i), buf);
    for (std::size_t c = 0; c < ncol; ++c) {
      if (!std::isnan(buf[c])) {
        sum[c] += buf[c];
        ++count[c];
      }
    }
  }
  stats.means.resize(ncol);
  for (std::size_t c = 0; c < ncol; ++c) {
    if (count[c] == 0) {
      fail(ErrorCode::kEmptyFeatureColumn, "column '" + stats.columns[c] + "' is missing in every training record");
    }
    stats.means[c] = sum[c] / static_cast<double>(count[c]);
  }
  return stats;
}

FeatureMatrix prepare_raw_matrix(const RecordSet& records, const Imputation& imputation,
                                 const RawColumnStats* train_stats) {
  FeatureMatrix m;
  m.columns = raw_column_names(records.schema());
  const std::size_t ncol = m.columns.size();
  RawColumnStats own;
  if (imputation.kind == Imputation::Kind::kMeanFromTrain && train_stats == nullptr) {
    std::vector<std::size_t> all(records.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    own = fit_raw_stats(records, all);
    train_stats = &own;
  }
  if (train_stats && train_stats->columns != m.columns) {
    fail(ErrorCode::kDimensionMismatch, "training statistics were fitted on a different schema");
  }
  m.values = Matrix(records.size(), ncol);
  m.missing_mask.assign(records.size() * ncol, 0);
  std::vector<double> buf;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records.records()[r];
    m.row_ids.push_back(rec.id);
    raw_row(records.schema(), rec, buf);
    for (std::size_t c = 0; c < ncol; ++c) {
      if (std::isnan(buf[c])) {
        m.missing_mask[r * ncol + c] = 1;
        m.values(r, c) = imputation.kind == Imputation::Kind::kConstant ? imputation.constant : train_stats->means[c];
      } else {
        m.values(r, c) = buf[c];
      }
    }
  }
  return m;
}

}  // namespace tabembed
