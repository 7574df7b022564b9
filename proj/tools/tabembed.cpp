// Command-line front end: ingest, synthesize, embed, run, sweep, report.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tabembed/features.hpp"
#include "tabembed/pipeline/config.hpp"
#include "tabembed/pipeline/experiment.hpp"
#include "tabembed/pipeline/report.hpp"

namespace tb = tabembed;

namespace {

enum Exit { kOk = 0, kConfigExit = 1, kBackendExit = 2, kDegenerateExit = 3 };

int exit_code_for(tb::ErrorCode code) {
  using E = tb::ErrorCode;
  switch (code) {
    case E::kBackendUnreachable:
    case E::kBackendProtocolError:
    case E::kNonFiniteValues:
    case E::kCandidateMissing:
    case E::kCacheCorrupt:
    case E::kPartialBatch:
      return kBackendExit;
    case E::kDegenerateLabels:
    case E::kSingleClass:
    case E::kTooFewRecords:
    case E::kTooFewValidResamples:
    case E::kFractionTooSmall:
    case E::kInfeasiblePrevalence:
    case E::kEmptyMatrix:
    case E::kEmptyFeatureColumn:
    case E::kConstantInput:
      return kDegenerateExit;
    default:
      return kConfigExit;
  }
}

int exit_code_for(const std::string& name) {
  for (int c = 0; c <= static_cast<int>(tb::ErrorCode::kFractionTooSmall); ++c) {
    const auto code = static_cast<tb::ErrorCode>(c);
    if (tb::to_string(code) == name) return exit_code_for(code);
  }
  return kConfigExit;
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string endpoint;
  std::string cache;
  std::string out;
};

tb::ExperimentConfig load_config(const Globals& g) {
  if (g.config.empty()) tb::fail(tb::ErrorCode::kConfigError, "--config is required");
  tb::ExperimentConfig cfg = tb::ExperimentConfig::load(g.config);
  cfg.apply_environment();
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (!g.endpoint.empty()) cfg.set_endpoint(g.endpoint);
  if (!g.cache.empty()) cfg.cache_dir = g.cache;
  if (!g.out.empty()) cfg.output_dir = g.out;
  cfg.check();
  return cfg;
}

std::unique_ptr<tb::EmbeddingCache> open_cache(const tb::ExperimentConfig& cfg) {
  return cfg.cache_dir ? std::make_unique<tb::EmbeddingCache>(*cfg.cache_dir) : std::make_unique<tb::EmbeddingCache>();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream out(p);
  if (!out) tb::fail(tb::ErrorCode::kIoError, "cannot write " + p.string());
  out << text;
}

int cmd_ingest(const Globals& g, const std::string& schema_spec, const std::string& csv) {
  const std::filesystem::path base = std::filesystem::current_path();
  nlohmann::json spec = schema_spec;
  const auto schema = tb::resolve_schema(spec, base);
  const tb::RecordSet records = tb::load_csv(csv, schema);
  const tb::ValidationReport v = tb::validate(records);
  nlohmann::json j = v.to_json();
  j["tasks"] = nlohmann::json::object();
  for (const auto& [task, y] : records.tasks()) {
    j["tasks"][task] = {{"n", y.size()}, {"positives", std::count(y.begin(), y.end(), 1)}};
  }
  const std::string text = j.dump(2) + "\n";
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_text(std::filesystem::path(g.out) / "validation.json", text);
    std::cout << "validated " << records.size() << " records; " << v.total_range_violations()
              << " range violations; wrote " << (std::filesystem::path(g.out) / "validation.json").string() << "\n";
  }
  return kOk;
}

int cmd_synthesize(const Globals& g) {
  const auto cfg = load_config(g);
  if (!cfg.synthesis) tb::fail(tb::ErrorCode::kConfigError, "config has no synthesis spec");
  const auto data = tb::generate_synthetic(*cfg.synthesis);
  const auto dir = cfg.output_dir;
  write_text(dir / "dataset.csv", tb::to_csv(data.records));
  nlohmann::json meta = {{"intercept", data.intercept}, {"bayes_auroc", nlohmann::json::object()}};
  for (const auto& [task, q] : data.true_probability) meta["bayes_auroc"][task] = tb::bayes_auroc(q);
  write_text(dir / "synthesis.json", meta.dump(2) + "\n");
  std::cout << "wrote " << data.records.size() << " records to " << (dir / "dataset.csv").string() << "\n";
  return kOk;
}

int cmd_embed(const Globals& g, const std::string& method_name) {
  const auto cfg = load_config(g);
  const tb::MethodConfig* method = nullptr;
  for (const auto& m : cfg.methods) {
    if (m.source.kind == tb::SourceKind::kEmbedding && (method_name.empty() || m.name == method_name)) {
      method = &m;
      break;
    }
  }
  if (!method) tb::fail(tb::ErrorCode::kConfigError, "no embedding method '" + method_name + "' in config");
  if (method->source.prompt.prevalence) {
    tb::warn("embed ignores the prevalence prompt option; it needs a training fold");
  }
  const auto data = tb::load_dataset(cfg);
  auto cache = open_cache(cfg);
  auto backend = tb::make_backend(method->source.backend, data.records.schema_ptr(), method->source.serialization);
  tb::PromptConfig pcfg;
  const auto& ps = method->source.prompt;
  if (ps.persona > 0) pcfg.system_instruction = tb::system_prompt(ps.persona);
  if (ps.binary) {
    pcfg.question_type = tb::QuestionType::kBinary;
    pcfg.target = cfg.target_text(cfg.tasks.front());
    pcfg.answer_options = ps.answer_options;
  } else if (ps.question) {
    pcfg.question = *ps.question;
  }
  pcfg.chat_template = ps.chat_template;
  const tb::EmbeddingJob job{method->source.serialization, pcfg, method->source.pooling, cfg.jobs};
  const tb::FeatureMatrix fm = tb::build_feature_matrix(data.records, job, *backend, cache.get());
  std::filesystem::create_directories(cfg.output_dir);
  tb::write_feature_binary(fm, cfg.output_dir / "embeddings.bin");
  tb::write_feature_csv(fm, cfg.output_dir / "embeddings.csv");
  std::cout << "embedded " << fm.values.rows << " records (dim " << fm.values.cols << "); backend calls "
            << backend->embed_calls() << ", cache entries " << cache->size() << "\n";
  return kOk;
}

int cmd_run(const Globals& g, bool audit) {
  const auto cfg = load_config(g);
  const auto data = tb::load_dataset(cfg);
  auto cache = open_cache(cfg);
  const tb::EvalReport report = tb::run_experiment(cfg, data, cache.get());
  for (const auto& p : tb::emit_report(report, cfg.output_dir)) std::cout << "wrote " << p.string() << "\n";
  std::cout << tb::report_markdown(report);
  if (audit) {
    const auto a = tb::audit_leakage(cfg, data.records, cache.get());
    write_text(cfg.output_dir / "leakage_audit.json", a.to_json().dump(2) + "\n");
    std::cout << "leakage audit: " << (a.passed ? "passed" : "FAILED") << " (" << a.checks << " checks)\n";
    for (const auto& f : a.findings) std::cerr << "  " << f << "\n";
  }
  int worst = kOk;
  bool any_ok = false;
  for (const auto& r : report.results) {
    if (r.ok) {
      any_ok = true;
    } else {
      std::cerr << "failed: " << r.task << " / " << r.method << ": " << r.error_code << ": " << r.error << "\n";
      if (worst == kOk) worst = exit_code_for(r.error_code);
    }
  }
  return any_ok ? kOk : worst;
}

int cmd_sweep(const Globals& g, const std::vector<double>& fractions) {
  const auto cfg = load_config(g);
  const auto data = tb::load_dataset(cfg);
  auto cache = open_cache(cfg);
  const auto rows = tb::training_size_sweep(cfg, data, fractions, cache.get());
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) j.push_back(r.to_json());
  write_text(cfg.output_dir / "sweep.json", j.dump(2) + "\n");
  write_text(cfg.output_dir / "sweep.csv", tb::sweep_csv(rows));
  std::cout << tb::sweep_csv(rows);
  return std::any_of(rows.begin(), rows.end(), [](const tb::SweepRow& r) { return r.ok; }) ? kOk : kDegenerateExit;
}

int cmd_report(const Globals& g, const std::string& input, const std::vector<std::string>& formats) {
  const tb::EvalReport report = tb::EvalReport::load(input);
  std::vector<tb::ReportFormat> fs;
  for (const auto& f : formats) {
    if (f == "json") fs.push_back(tb::ReportFormat::kJson);
    else if (f == "csv") fs.push_back(tb::ReportFormat::kCsv);
    else if (f == "markdown" || f == "md") fs.push_back(tb::ReportFormat::kMarkdown);
    else tb::fail(tb::ErrorCode::kConfigError, "unknown report format '" + f + "'");
  }
  const std::filesystem::path dir = g.out.empty() ? std::filesystem::path(input).parent_path() : std::filesystem::path(g.out);
  for (const auto& p : tb::emit_report(report, dir, fs)) std::cout << "wrote " << p.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular records to language-model features: serialization, embeddings, scoring and evaluation"};
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", g.config, "Experiment config (JSON)");
    sub->add_option("--seed", g.seed, "Override the master seed");
    sub->add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--backend-endpoint", g.endpoint, "Inference server URL for http backends");
    sub->add_option("--cache", g.cache, "Embedding cache directory");
    sub->add_option("--out", g.out, "Output directory");
  };

  std::string schema = "diagnosis", csv;
  auto* ingest = app.add_subcommand("ingest", "Load and validate a CSV against a schema");
  add_globals(ingest);
  ingest->add_option("--schema", schema, "Built-in schema name or schema JSON path");
  ingest->add_option("--csv", csv, "Input CSV")->required();

  auto* synth = app.add_subcommand("synthesize", "Generate the synthetic dataset a config describes");
  add_globals(synth);

  std::string method;
  auto* embed = app.add_subcommand("embed", "Compute pooled embeddings for every record");
  add_globals(embed);
  embed->add_option("--method", method, "Embedding method name (default: first embedding method)");

  bool audit = false;
  auto* run = app.add_subcommand("run", "Cross-validated experiment and report");
  add_globals(run);
  run->add_flag("--audit", audit, "Also run the test-fold poisoning leakage audit");

  std::vector<double> fractions{0.1, 0.25, 0.5, 1.0};
  auto* sweep = app.add_subcommand("sweep", "Training-size sweep");
  add_globals(sweep);
  sweep->add_option("--fractions", fractions, "Training fractions in (0, 1]")->delimiter(',');

  std::string input;
  std::vector<std::string> formats{"json", "csv", "markdown"};
  auto* report = app.add_subcommand("report", "Re-emit a saved report.json in other formats");
  add_globals(report);
  report->add_option("--input", input, "report.json to load")->required();
  report->add_option("--formats", formats, "json, csv, markdown")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigExit;
  }

  try {
    if (*ingest) return cmd_ingest(g, schema, csv);
    if (*synth) return cmd_synthesize(g);
    if (*embed) return cmd_embed(g, method);
    if (*run) return cmd_run(g, audit);
    if (*sweep) return cmd_sweep(g, fractions);
    if (*report) return cmd_report(g, input, formats);
  } catch (const tb::Error& e) {
    std::cerr << "error [" << tb::to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigExit;
  }
  return kOk;
}
