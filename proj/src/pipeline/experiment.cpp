#include "tabembed/pipeline/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "tabembed/learners/grid_search.hpp"
#include "tabembed/scoring.hpp"

namespace tabembed {

namespace {

constexpr double kSentinel = 987654.0;

// e.what() without the leading "<code>: ".
std::string message_of(const Error& e) {
  std::string what = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
  return what;
}

template <class Fn>
auto in_stage(const char* stage, int fold, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string what = message_of(e);
    if (what.rfind("[stage=", 0) == 0) throw;
    throw Error(e.code(), "[stage=" + std::string(stage) + " fold=" + std::to_string(fold) + "] " + what);
  }
}

std::string hash_doubles(const std::vector<double>& v) { return hex64(fnv1a64_bytes(v.data(), v.size() * sizeof(double))); }

std::uint64_t fraction_bits(double f) {
  std::uint64_t b;
  std::memcpy(&b, &f, sizeof b);
  return b;
}

PromptConfig make_prompt(const FeatureSource& src, const std::string& target, std::optional<double> prevalence_pct) {
  PromptConfig p;
  const PromptSpec& s = src.prompt;
  if (s.persona > 0) p.system_instruction = system_prompt(s.persona);
  if (s.binary) {
    p.question_type = QuestionType::kBinary;
    p.target = target;
    p.answer_options = s.answer_options;
    if (s.prevalence) p.prevalence_percent = prevalence_pct;
  } else if (s.question) {
    p.question = *s.question;
  }
  p.chat_template = s.chat_template;
  return p;
}

std::vector<double> score_records(const RecordSet& data, const std::vector<std::size_t>& rows,
                                  const FeatureSource& src, const PromptConfig& pcfg, Backend& backend, int jobs) {
  std::vector<double> out(rows.size());
  parallel_for(rows.size(), jobs, [&](std::size_t k) {
    const PromptBundle bundle = render_prompt(data, rows[k], src.serialization, pcfg);
    out[k] = src.kind == SourceKind::kAbProbability ? ab_probability(bundle, backend).p_yes
                                                    : sequence_probability(bundle, backend).p_yes;
  });
  return out;
}

MethodResult summarize(const std::string& task, const std::string& name, const RecordSet& data,
                       const LabelVector& labels, const std::vector<double>& scores,
                       std::vector<nlohmann::json> folds, const MetricsSpec& m, int jobs) {
  MethodResult r;
  r.task = task;
  r.method = name;
  for (const auto& rec : data.records()) r.ids.push_back(rec.id);
  r.scores = scores;
  r.folds = std::move(folds);
  r.auroc = bootstrap_ci(auroc, scores, labels, m.n_resamples, m.level, m.seed, jobs);
  LabelVector pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = decode_yes_no(scores[i]) == YesNo::kYes ? 1 : 0;
  r.confusion = confusion_matrix(pred, labels);
  r.accuracy = r.confusion.accuracy();
  r.calibration = calibration_curve(scores, labels, m.n_bins);
  r.ok = true;
  return r;
}

MethodResult failed(const std::string& task, const std::string& name, const Error& e) {
  MethodResult r;
  r.task = task;
  r.method = name;
  r.error_code = std::string(to_string(e.code()));
  r.error = message_of(e);
  return r;
}

struct PooledRun {
  std::vector<std::string> names;
  std::vector<std::vector<double>> scores;  // per name, record order
  std::vector<std::vector<nlohmann::json>> folds;
};

PooledRun pool_folds(ExperimentRunner& runner, const MethodConfig& m, const std::string& task, const RecordSet& data,
                     const FoldPlan& plan, double fraction) {
  PooledRun run;
  run.names = reported_names(m);
  const bool direct = m.source.kind == SourceKind::kAbProbability || m.source.kind == SourceKind::kSequenceLikelihood;
  run.scores.assign(run.names.size(), std::vector<double>(data.size(), std::numeric_limits<double>::quiet_NaN()));
  run.folds.resize(run.names.size());
  for (int f = 0; f < plan.k; ++f) {
    FoldOutcome o = runner.run_fold(m, task, data, plan, f, fraction);
    std::size_t slot = 0;
    if (direct) {
      for (std::size_t k = 0; k < o.test_indices.size(); ++k) run.scores[0][o.test_indices[k]] = o.direct_scores[k];
      run.folds[0].push_back({{"fold", f}, {"artifact_hash", o.artifact_hash}});
      ++slot;
    }
    if (m.learner) {
      for (std::size_t k = 0; k < o.test_indices.size(); ++k) run.scores[slot][o.test_indices[k]] = o.learner_scores[k];
      run.folds[slot].push_back(
          {{"fold", f}, {"artifact_hash", o.artifact_hash}, {"best_params", o.artifacts.value("best_params", nlohmann::json())}});
    }
  }
  return run;
}

}  // namespace

std::vector<std::string> reported_names(const MethodConfig& m) {
  if (m.source.kind == SourceKind::kRaw || m.source.kind == SourceKind::kEmbedding) return {m.name};
  std::vector<std::string> out{m.name};
  if (m.learner) out.push_back(m.name + "+" + std::string(to_string(*m.learner)));
  return out;
}

ExperimentRunner::ExperimentRunner(const ExperimentConfig& cfg, EmbeddingCache* cache) : cfg_(cfg), cache_(cache) {}

FoldPlan ExperimentRunner::outer_folds(const RecordSet& data, const std::string& task) const {
  return split_kfold(data, cfg_.folds.k, cfg_.folds.seed,
                     cfg_.folds.stratify ? std::optional<std::string>(task) : std::nullopt);
}

Backend& ExperimentRunner::backend_for(const MethodConfig& method, const std::shared_ptr<const FeatureSchema>& schema) {
  std::lock_guard lock(mutex_);
  auto& slot = backends_[method.name];
  if (!slot) slot = make_backend(method.source.backend, schema, method.source.serialization);
  return *slot;
}

std::vector<std::size_t> subsample_training(const std::vector<std::size_t>& train, const LabelVector& labels,
                                            double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorCode::kConfigError, "training fractions must lie in (0, 1]");
  if (fraction == 1.0) return train;
  std::vector<std::size_t> pos, neg;
  for (auto i : train) (labels.at(i) ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  auto keep = [&](std::size_t count) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(count))));
  };
  pos.resize(std::min(pos.size(), keep(pos.size())));
  neg.resize(std::min(neg.size(), keep(neg.size())));
  if (pos.size() < 10) {
    fail(ErrorCode::kFractionTooSmall, "fraction " + std::to_string(fraction) + " leaves " + std::to_string(pos.size()) +
                                           " training positives (need at least 10)");
  }
  std::vector<std::size_t> out = pos;
  out.insert(out.end(), neg.begin(), neg.end());
  std::sort(out.begin(), out.end());
  return out;
}

FoldOutcome ExperimentRunner::run_fold(const MethodConfig& method, const std::string& task, const RecordSet& data,
                                       const FoldPlan& plan, int fold, double train_fraction) {
  const LabelVector& labels = data.labels(task);
  std::vector<std::size_t> train = plan.train_indices(fold);
  FoldOutcome out;
  out.test_indices = plan.test_indices(fold);
  const auto& test = out.test_indices;
  if (train_fraction != 1.0) {
    train = in_stage("subsample", fold, [&] {
      return subsample_training(train, labels, train_fraction,
                                mix_seed(mix_seed(cfg_.seed, fraction_bits(train_fraction)), static_cast<std::uint64_t>(fold)));
    });
  }
  LabelVector ytr;
  for (auto i : train) ytr.push_back(labels[i]);
  {
    std::string ids;
    for (auto i : train) ids += data.records()[i].id + "\n";
    out.artifacts["train_rows"] = hex64(fnv1a64(ids));
  }
  const double prevalence_pct = 100.0 * std::accumulate(ytr.begin(), ytr.end(), 0.0) / static_cast<double>(ytr.size());
  const FeatureSource& src = method.source;

  Matrix xtr, xte;
  switch (src.kind) {
    case SourceKind::kRaw: {
      in_stage("impute", fold, [&] {
        const RawColumnStats stats = fit_raw_stats(data, train);
        const FeatureMatrix full = prepare_raw_matrix(data, Imputation{}, &stats);
        xtr = full.values.select_rows(train);
        xte = full.values.select_rows(test);
        out.artifacts["raw_stats"] = hex64(stats.fingerprint());
      });
      break;
    }
    case SourceKind::kEmbedding: {
      in_stage("embedding", fold, [&] {
        const PromptConfig pcfg = make_prompt(src, cfg_.target_text(task), prevalence_pct);
        std::vector<std::size_t> rows = train;
        rows.insert(rows.end(), test.begin(), test.end());
        EmbeddingJob job{src.serialization, pcfg, src.pooling, cfg_.jobs};
        const FeatureMatrix fm =
            build_feature_matrix(data.subset(rows), job, backend_for(method, data.schema_ptr()), cache_);
        std::vector<std::size_t> tr_pos(train.size()), te_pos(test.size());
        std::iota(tr_pos.begin(), tr_pos.end(), std::size_t{0});
        std::iota(te_pos.begin(), te_pos.end(), train.size());
        xtr = fm.values.select_rows(tr_pos);
        xte = fm.values.select_rows(te_pos);
        out.artifacts["prompt_prevalence"] = src.prompt.prevalence ? nlohmann::json(prevalence_pct) : nlohmann::json();
        out.artifacts["train_features"] = hash_doubles(xtr.values);
      });
      if (src.zscore) {
        in_stage("standardize", fold, [&] {
          const Standardizer st = Standardizer::fit(xtr);
          xtr = st.apply(xtr);
          xte = st.apply(xte);
          out.artifacts["standardizer"] = hex64(st.fingerprint());
        });
      }
      break;
    }
    case SourceKind::kAbProbability:
    case SourceKind::kSequenceLikelihood: {
      in_stage("scoring", fold, [&] {
        const PromptConfig pcfg = make_prompt(src, cfg_.target_text(task), prevalence_pct);
        Backend& backend = backend_for(method, data.schema_ptr());
        out.direct_scores = score_records(data, test, src, pcfg, backend, cfg_.jobs);
        out.artifacts["prompt_prevalence"] = src.prompt.prevalence ? nlohmann::json(prevalence_pct) : nlohmann::json();
        if (method.learner) {
          const auto train_scores = score_records(data, train, src, pcfg, backend, cfg_.jobs);
          out.artifacts["train_features"] = hash_doubles(train_scores);
          xtr = Matrix(train.size(), 1);
          xtr.values = train_scores;
          xte = Matrix(test.size(), 1);
          xte.values = out.direct_scores;
        }
      });
      break;
    }
  }

  if (method.learner) {
    in_stage("grid-search", fold, [&] {
      std::vector<std::string> train_ids;
      for (auto i : train) train_ids.push_back(data.records()[i].id);
      const FoldPlan inner = split_kfold(train_ids, cfg_.folds.inner_k, mix_seed(cfg_.folds.seed, static_cast<std::uint64_t>(fold)),
                                         cfg_.folds.stratify ? &ytr : nullptr);
      const auto grid = method.grid.empty() ? default_grid(*method.learner) : method.grid;
      GridSearchResult gs = grid_search(grid, xtr, ytr, inner, mix_seed(cfg_.seed, static_cast<std::uint64_t>(fold)), cfg_.jobs);
      gs.model.train_fold = "task=" + task + " fold=" + std::to_string(fold);
      out.artifacts["best_params"] = params_to_json(gs.best_params);
      out.artifacts["grid"] = hex64(fnv1a64(gs.summary().dump()));
      out.artifacts["model"] = hex64(gs.model.fingerprint());
      out.learner_scores = in_stage("predict", fold, [&] { return gs.model.predict_proba(xte); });
    });
  }
  out.artifact_hash = hex64(fnv1a64(out.artifacts.dump()));
  return out;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  auto cache = cfg.cache_dir ? std::make_unique<EmbeddingCache>(*cfg.cache_dir) : std::make_unique<EmbeddingCache>();
  return run_experiment(cfg, load_dataset(cfg), cache.get());
}

EvalReport run_experiment(const ExperimentConfig& cfg, const SyntheticDataset& dataset, EmbeddingCache* cache) {
  cfg.check();
  const auto start = std::chrono::steady_clock::now();
  const RecordSet& data = dataset.records;
  ExperimentRunner runner(cfg, cache);

  EvalReport report;
  report.config_hash = cfg.hash();
  report.tasks = cfg.tasks;
  for (const auto& m : cfg.methods) {
    for (auto& n : reported_names(m)) report.methods.push_back(std::move(n));
  }
  report.seeds = {{"seed", cfg.seed}, {"fold_seed", cfg.folds.seed}, {"metrics_seed", cfg.metrics.seed}};
  if (cfg.synthesis) report.seeds["synthesis_seed"] = cfg.synthesis->seed;
  report.metadata = {{"auroc", "mann-whitney, ties count one half"},
                     {"interval", "percentile bootstrap"},
                     {"n_resamples", cfg.metrics.n_resamples},
                     {"level", cfg.metrics.level},
                     {"calibration_bins", cfg.metrics.n_bins},
                     {"decision_threshold", 0.5},
                     {"folds", cfg.folds.k},
                     {"inner_folds", cfg.folds.inner_k},
                     {"n_records", data.size()}};
  if (!dataset.true_probability.empty()) {
    nlohmann::json bayes = nlohmann::json::object();
    for (const auto& t : cfg.tasks) bayes[t] = bayes_auroc(dataset.true_probability.at(t));
    report.metadata["bayes_auroc"] = bayes;
  }

  for (const auto& task : cfg.tasks) {
    const LabelVector& labels = data.labels(task);
    std::optional<FoldPlan> plan;
    std::optional<Error> plan_error;
    try {
      plan = in_stage("folds", -1, [&] { return runner.outer_folds(data, task); });
    } catch (const Error& e) {
      plan_error = e;
    }
    for (const auto& m : cfg.methods) {
      if (plan_error) {
        for (const auto& n : reported_names(m)) report.results.push_back(failed(task, n, *plan_error));
        continue;
      }
      try {
        PooledRun run = pool_folds(runner, m, task, data, *plan, 1.0);
        for (std::size_t s = 0; s < run.names.size(); ++s) {
          try {
            report.results.push_back(in_stage("metrics", -1, [&] {
              return summarize(task, run.names[s], data, labels, run.scores[s], run.folds[s], cfg.metrics, cfg.jobs);
            }));
          } catch (const Error& e) {
            report.results.push_back(failed(task, run.names[s], e));
          }
        }
      } catch (const Error& e) {
        for (const auto& n : reported_names(m)) report.results.push_back(failed(task, n, e));
      }
    }
  }

  if (cfg.correlation_reference) {
    for (const auto& task : cfg.tasks) {
      const MethodResult* ref = report.find(task, *cfg.correlation_reference);
      if (!ref || !ref->ok) continue;
      for (const auto& name : report.methods) {
        const MethodResult* r = report.find(task, name);
        if (!r || !r->ok || name == *cfg.correlation_reference) continue;
        try {
          report.correlations.push_back(
              {task, name, *cfg.correlation_reference, spearman(r->scores, ref->scores), pearson(r->scores, ref->scores)});
        } catch (const Error& e) {
          warn("correlation of " + name + " with " + *cfg.correlation_reference + " on " + task + " skipped: " + e.what());
        }
      }
    }
  }
  report.runtime = {
      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}, {"jobs", cfg.jobs}};
  return report;
}

nlohmann::json SweepRow::to_json() const {
  nlohmann::json j = {{"task", task}, {"method", method}, {"fraction", fraction}, {"ok", ok}};
  if (ok) j["auroc"] = auroc.to_json();
  else j["error"] = error;
  return j;
}

std::vector<SweepRow> training_size_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions) {
  auto cache = cfg.cache_dir ? std::make_unique<EmbeddingCache>(*cfg.cache_dir) : std::make_unique<EmbeddingCache>();
  return training_size_sweep(cfg, load_dataset(cfg), fractions, cache.get());
}

std::vector<SweepRow> training_size_sweep(const ExperimentConfig& cfg, const SyntheticDataset& dataset,
                                          const std::vector<double>& fractions, EmbeddingCache* cache) {
  cfg.check();
  if (fractions.empty()) fail(ErrorCode::kConfigError, "sweep needs at least one fraction");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) fail(ErrorCode::kConfigError, "training fractions must lie in (0, 1]");
  }
  const RecordSet& data = dataset.records;
  ExperimentRunner runner(cfg, cache);
  std::vector<SweepRow> rows;
  for (const auto& task : cfg.tasks) {
    const FoldPlan plan = runner.outer_folds(data, task);
    const LabelVector& labels = data.labels(task);
    for (const auto& m : cfg.methods) {
      for (double f : fractions) {
        const auto names = reported_names(m);
        try {
          const PooledRun run = pool_folds(runner, m, task, data, plan, f);
          for (std::size_t s = 0; s < names.size(); ++s) {
            SweepRow row{task, names[s], f, true, "", {}};
            row.auroc = bootstrap_ci(auroc, run.scores[s], labels, cfg.metrics.n_resamples, cfg.metrics.level,
                                     cfg.metrics.seed, cfg.jobs);
            rows.push_back(std::move(row));
          }
        } catch (const Error& e) {
          for (const auto& n : names) rows.push_back({task, n, f, false, e.what(), {}});
        }
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "task,method,fraction,auroc,lo,hi\n";
  char buf[128];
  for (const auto& r : rows) {
    out += r.task + "," + r.method + ",";
    if (r.ok) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", r.fraction, r.auroc.point, r.auroc.lo, r.auroc.hi);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,,,", r.fraction);
    }
    out += buf;
    out += "\n";
  }
  return out;
}

RecordSet poison_test_fold(const RecordSet& data, const FoldPlan& plan, int fold, const std::string& task) {
  std::vector<Record> records = data.records();
  std::map<std::string, LabelVector> tasks = data.tasks();
  LabelVector& y = tasks.at(task);
  for (auto i : plan.test_indices(fold)) {
    Record& r = records[i];
    for (const auto& def : data.schema().features()) {
      switch (def.kind) {
        case FeatureKind::kStaticNumeric: r.numeric[def.name] = kSentinel; break;
        case FeatureKind::kTimeseriesNumeric: {
          auto& pts = r.series[def.name];
          if (pts.empty()) pts.push_back({0.0, kSentinel});
          for (auto& p : pts) p.value = kSentinel;
          break;
        }
        case FeatureKind::kStaticCategorical: {
          if (def.categories.size() < 2) break;
          auto it = r.categorical.find(def.name);
          std::size_t idx = 0;
          if (it != r.categorical.end()) {
            idx = static_cast<std::size_t>(std::find(def.categories.begin(), def.categories.end(), it->second) -
                                           def.categories.begin());
          }
          r.categorical[def.name] = def.categories[(idx + 1) % def.categories.size()];
          break;
        }
      }
    }
    y[i] = 1 - y[i];
  }
  return RecordSet(data.schema_ptr(), std::move(records), std::move(tasks));
}

nlohmann::json LeakageAudit::to_json() const { return {{"passed", passed}, {"checks", checks}, {"findings", findings}}; }

LeakageAudit audit_leakage(const ExperimentConfig& cfg, const RecordSet& data, EmbeddingCache* cache) {
  cfg.check();
  ExperimentRunner runner(cfg, cache);
  LeakageAudit audit;
  for (const auto& task : cfg.tasks) {
    const FoldPlan plan = runner.outer_folds(data, task);
    for (const auto& m : cfg.methods) {
      for (int f = 0; f < plan.k; ++f) {
        const std::string where = "task=" + task + " method=" + m.name + " fold=" + std::to_string(f);
        try {
          const FoldOutcome clean = runner.run_fold(m, task, data, plan, f);
          const RecordSet poisoned = poison_test_fold(data, plan, f, task);
          const FoldOutcome dirty = runner.run_fold(m, task, poisoned, plan, f);
          ++audit.checks;
          for (const auto& [key, value] : clean.artifacts.items()) {
            if (!dirty.artifacts.contains(key) || dirty.artifacts.at(key) != value) {
              audit.passed = false;
              audit.findings.push_back(where + ": training artifact '" + key + "' changed when test rows were poisoned");
            }
          }
        } catch (const Error& e) {
          audit.passed = false;
          audit.findings.push_back(where + ": " + e.what());
        }
      }
    }
  }
  return audit;
}

}  // namespace tabembed
