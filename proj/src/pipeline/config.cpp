#include "tabembed/pipeline/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

namespace tabembed {

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::kRaw: return "raw";
    case SourceKind::kEmbedding: return "embedding";
    case SourceKind::kAbProbability: return "ab-probability";
    case SourceKind::kSequenceLikelihood: return "sequence-likelihood";
  }
  return "raw";
}

SourceKind source_kind_from_string(std::string_view text) {
  if (text == "raw") return SourceKind::kRaw;
  if (text == "embedding") return SourceKind::kEmbedding;
  if (text == "ab-probability") return SourceKind::kAbProbability;
  if (text == "sequence-likelihood") return SourceKind::kSequenceLikelihood;
  fail(ErrorCode::kConfigError, "unknown feature source '" + std::string(text) + "'");
}

namespace {

std::string_view chat_template_name(ChatTemplate t) { return t == ChatTemplate::kInstWrapped ? "inst" : "plain"; }

ChatTemplate chat_template_from(std::string_view s) {
  if (s == "plain") return ChatTemplate::kPlain;
  if (s == "inst") return ChatTemplate::kInstWrapped;
  fail(ErrorCode::kConfigError, "unknown chat template '" + std::string(s) + "'");
}

std::filesystem::path resolve_path(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

nlohmann::json PromptSpec::to_json() const {
  nlohmann::json j = {{"persona", persona},
                      {"binary", binary},
                      {"prevalence", prevalence},
                      {"answer_options", answer_options},
                      {"chat_template", chat_template_name(chat_template)}};
  if (question) j["question"] = *question;
  return j;
}

PromptSpec PromptSpec::from_json(const nlohmann::json& j) {
  PromptSpec p;
  p.persona = j.value("persona", 0);
  if (p.persona < 0 || p.persona > 4) fail(ErrorCode::kConfigError, "persona must be 0-4");
  if (j.contains("question")) p.question = j.at("question").get<std::string>();
  p.binary = j.value("binary", false);
  p.prevalence = j.value("prevalence", false);
  p.answer_options = j.value("answer_options", false);
  p.chat_template = chat_template_from(j.value("chat_template", std::string("plain")));
  return p;
}

nlohmann::json FeatureSource::to_json() const {
  nlohmann::json j = {{"kind", to_string(kind)}};
  if (kind == SourceKind::kRaw) return j;
  j["backend"] = backend.to_json();
  j["serialization"] = {{"format", to_string(serialization.format)},
                        {"template", serialization.template_id},
                        {"decimals", serialization.decimal_places}};
  j["prompt"] = prompt.to_json();
  if (kind == SourceKind::kEmbedding) {
    j["pooling"] = to_string(pooling);
    j["zscore"] = zscore;
  }
  return j;
}

FeatureSource FeatureSource::from_json(const nlohmann::json& j) {
  FeatureSource s;
  s.kind = source_kind_from_string(j.at("kind").get<std::string>());
  if (s.kind == SourceKind::kRaw) return s;
  s.backend = BackendDescriptor::from_json(j.value("backend", nlohmann::json::object()));
  if (j.contains("serialization")) {
    const auto& sj = j.at("serialization");
    s.serialization.format = serialization_format_from_string(sj.value("format", std::string("narrative")));
    s.serialization.template_id = sj.value("template", s.serialization.template_id);
    s.serialization.decimal_places = sj.value("decimals", s.serialization.decimal_places);
  }
  if (j.contains("prompt")) s.prompt = PromptSpec::from_json(j.at("prompt"));
  if (s.kind != SourceKind::kEmbedding) s.prompt.binary = true;  // probability sources answer a binary question
  s.pooling = pooling_from_string(j.value("pooling", std::string("mean")));
  s.zscore = j.value("zscore", false);
  return s;
}

nlohmann::json MethodConfig::to_json() const {
  nlohmann::json j = {{"name", name}, {"source", source.to_json()}};
  if (learner) {
    j["learner"] = to_string(*learner);
    nlohmann::json g = nlohmann::json::array();
    for (const auto& cell : grid) g.push_back(params_to_json(cell));
    j["grid_cells"] = g;
  }
  return j;
}

MethodConfig MethodConfig::from_json(const nlohmann::json& j) {
  MethodConfig m;
  m.name = j.at("name").get<std::string>();
  if (m.name.empty() || m.name.find('+') != std::string::npos) {
    fail(ErrorCode::kConfigError, "method names must be nonempty and free of '+'");
  }
  if (!j.contains("source")) fail(ErrorCode::kConfigError, "method '" + m.name + "' has no feature source");
  if (j.at("source").is_array()) fail(ErrorCode::kConfigError, "method '" + m.name + "' must name exactly one source");
  m.source = FeatureSource::from_json(j.at("source"));
  if (j.contains("learner")) {
    m.learner = learner_kind_from_string(j.at("learner").get<std::string>());
    if (j.contains("grid_cells")) {
      for (const auto& cell : j.at("grid_cells")) m.grid.push_back(params_from_json(*m.learner, cell));
    } else {
      m.grid = j.contains("grid") ? grid_from_json(*m.learner, j.at("grid")) : default_grid(*m.learner);
    }
  } else if (m.source.kind == SourceKind::kRaw || m.source.kind == SourceKind::kEmbedding) {
    fail(ErrorCode::kConfigError, "method '" + m.name + "' needs a learner for its feature source");
  } else if (j.contains("grid")) {
    fail(ErrorCode::kConfigError, "method '" + m.name + "' has a grid but no learner");
  }
  return m;
}

std::shared_ptr<const FeatureSchema> resolve_schema(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  if (spec.is_object()) return std::make_shared<const FeatureSchema>(FeatureSchema::from_json(spec));
  if (!spec.is_string()) fail(ErrorCode::kConfigError, "schema must be a name, a path or an inline object");
  const auto name = spec.get<std::string>();
  if (name == "diagnosis") return std::make_shared<const FeatureSchema>(clinical_diagnosis_schema());
  if (name == "mimic") return std::make_shared<const FeatureSchema>(icu_timeseries_schema());
  return std::make_shared<const FeatureSchema>(FeatureSchema::load(resolve_path(name, base_dir).string()));
}

void ExperimentConfig::check() const {
  if (schema_version != kConfigSchemaVersion) {
    fail(ErrorCode::kConfigError, "unsupported config schema_version " + std::to_string(schema_version));
  }
  if (!schema) fail(ErrorCode::kConfigError, "config has no schema");
  if (dataset_csv.has_value() == synthesis.has_value()) {
    fail(ErrorCode::kConfigError, "dataset must name exactly one of a CSV file or a synthesis spec");
  }
  if (tasks.empty()) fail(ErrorCode::kConfigError, "config lists no tasks");
  if (synthesis) {
    for (const auto& t : tasks) {
      const bool known = std::any_of(synthesis->tasks.begin(), synthesis->tasks.end(),
                                     [&](const SynthesisTask& s) { return s.name == t; });
      if (!known) fail(ErrorCode::kConfigError, "task '" + t + "' is not produced by the synthesis spec");
    }
  }
  if (methods.empty()) fail(ErrorCode::kConfigError, "config lists no methods");
  std::set<std::string> names;
  for (const auto& m : methods) {
    if (!names.insert(m.name).second) fail(ErrorCode::kConfigError, "duplicate method name '" + m.name + "'");
    if (m.source.kind != SourceKind::kRaw) m.source.backend.check();
  }
  if (correlation_reference && !names.count(*correlation_reference)) {
    bool derived = false;
    for (const auto& m : methods) {
      if (m.learner && m.name + "+" + std::string(to_string(*m.learner)) == *correlation_reference) derived = true;
    }
    if (!derived) fail(ErrorCode::kConfigError, "correlation reference '" + *correlation_reference + "' is not a method");
  }
  if (folds.k < 2) fail(ErrorCode::kConfigError, "folds.k must be at least 2");
  if (folds.inner_k < 2) fail(ErrorCode::kConfigError, "folds.inner_k must be at least 2");
  if (metrics.n_resamples < 100) fail(ErrorCode::kConfigError, "metrics.n_resamples must be at least 100");
  if (!(metrics.level > 0.0 && metrics.level < 1.0)) fail(ErrorCode::kConfigError, "metrics.level must lie in (0, 1)");
  if (metrics.n_bins < 1) fail(ErrorCode::kConfigError, "metrics.n_bins must be at least 1");
  if (jobs < 1) fail(ErrorCode::kConfigError, "jobs must be at least 1");
}

std::string ExperimentConfig::target_text(const std::string& task) const {
  auto it = targets.find(task);
  return it == targets.end() ? task : it->second;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    c.schema = resolve_schema(j.at("schema"), base_dir);
    const auto& ds = j.at("dataset");
    if (ds.contains("csv")) c.dataset_csv = resolve_path(ds.at("csv").get<std::string>(), base_dir);
    if (ds.contains("synthesize")) c.synthesis = SynthesisSpec::from_json(ds.at("synthesize"), c.schema);
    c.tasks = j.at("tasks").get<std::vector<std::string>>();
    c.targets = j.value("targets", std::map<std::string, std::string>{});
    if (j.contains("folds")) {
      const auto& f = j.at("folds");
      c.folds.k = f.value("k", c.folds.k);
      c.folds.seed = f.value("seed", c.folds.seed);
      c.folds.stratify = f.value("stratify", c.folds.stratify);
      c.folds.inner_k = f.value("inner_k", c.folds.inner_k);
    }
    for (const auto& m : j.at("methods")) c.methods.push_back(MethodConfig::from_json(m));
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      c.metrics.n_resamples = m.value("n_resamples", c.metrics.n_resamples);
      c.metrics.level = m.value("level", c.metrics.level);
      c.metrics.n_bins = m.value("n_bins", c.metrics.n_bins);
      c.metrics.seed = m.value("seed", c.metrics.seed);
    }
    if (j.contains("correlations")) c.correlation_reference = j.at("correlations").at("reference").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    c.output_dir = resolve_path(j.value("output_dir", std::string("out")), base_dir);
    if (j.contains("cache")) c.cache_dir = resolve_path(j.at("cache").get<std::string>(), base_dir);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("bad experiment config: ") + e.what());
  }
  c.check();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigError, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : methods) ms.push_back(m.to_json());
  nlohmann::json j = {
      {"schema_version", schema_version},
      {"schema", schema->to_json()},
      {"tasks", tasks},
      {"targets", targets},
      {"folds", {{"k", folds.k}, {"seed", folds.seed}, {"stratify", folds.stratify}, {"inner_k", folds.inner_k}}},
      {"methods", ms},
      {"metrics",
       {{"n_resamples", metrics.n_resamples}, {"level", metrics.level}, {"n_bins", metrics.n_bins}, {"seed", metrics.seed}}},
      {"seed", seed},
      {"jobs", jobs},
      {"output_dir", output_dir.string()}};
  if (dataset_csv) j["dataset"] = {{"csv", dataset_csv->string()}};
  if (synthesis) j["dataset"] = {{"synthesize", synthesis->to_json()}};
  if (correlation_reference) j["correlations"] = {{"reference", *correlation_reference}};
  if (cache_dir) j["cache"] = cache_dir->string();
  return j;
}

std::string ExperimentConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("jobs");
  j.erase("output_dir");
  j.erase("cache");
  return hex64(fnv1a64(j.dump()));
}

void ExperimentConfig::set_endpoint(const std::string& url) {
  for (auto& m : methods) {
    if (m.source.kind != SourceKind::kRaw && m.source.backend.kind == BackendKind::kHttp) m.source.backend.endpoint = url;
  }
}

void ExperimentConfig::apply_environment() {
  if (const char* e = std::getenv("TABEMBED_ENDPOINT"); e && *e) set_endpoint(e);
  if (const char* c = std::getenv("TABEMBED_CACHE"); c && *c) cache_dir = std::filesystem::path(c);
}

SyntheticDataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.synthesis) return generate_synthetic(*cfg.synthesis);
  SyntheticDataset d;
  d.records = load_csv(cfg.dataset_csv->string(), cfg.schema);
  for (const auto& t : cfg.tasks) {
    if (!d.records.tasks().count(t)) fail(ErrorCode::kConfigError, "dataset has no label column for task '" + t + "'");
  }
  return d;
}

}  // namespace tabembed
