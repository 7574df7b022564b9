#include "tabembed/pipeline/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>


namespace tabembed {

void SynthesisSpec::check() const {
  if (!schema) fail(ErrorCode::kConfigError, "synthesis needs a schema");
  if (n_records < 2) fail(ErrorCode::kConfigError, "synthesis needs at least 2 records");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) fail(ErrorCode::kConfigError, "missing_rate must lie in [0, 1)");
  for (const auto& t : tasks) {
    if (t.name.empty()) fail(ErrorCode::kConfigError, "synthesis task needs a name");
    if (!(t.prevalence > 0.0 && t.prevalence < 1.0)) {
      fail(ErrorCode::kInfeasiblePrevalence, "prevalence target for '" + t.name + "' must lie in (0, 1)");
    }
    if (!(t.noise_sd >= 0.0)) fail(ErrorCode::kConfigError, "noise_sd must be non-negative");
    for (const auto& [name, w] : t.weights) {
      const FeatureDef* def = schema->find(name);
      if (!def) fail(ErrorCode::kConfigError, "synthesis weight names unknown feature '" + name + "'");
      if (!std::isfinite(w)) fail(ErrorCode::kConfigError, "synthesis weight for '" + name + "' is not finite");
      if (def->kind != FeatureKind::kStaticCategorical && !def->plausible_range) {
        fail(ErrorCode::kConfigError, "feature '" + name + "' needs a plausible range to be synthesized");
      }
    }
  }
}

nlohmann::json SynthesisSpec::to_json() const {
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : tasks) {
    ts.push_back({{"name", t.name}, {"weights", t.weights}, {"noise_sd", t.noise_sd}, {"prevalence", t.prevalence}});
  }
  return {{"n_records", n_records}, {"missing_rate", missing_rate}, {"seed", seed}, {"tasks", ts}};
}

SynthesisSpec SynthesisSpec::from_json(const nlohmann::json& j, std::shared_ptr<const FeatureSchema> schema) {
  SynthesisSpec s;
  s.schema = std::move(schema);
  try {
    s.n_records = j.value("n_records", s.n_records);
    s.missing_rate = j.value("missing_rate", s.missing_rate);
    s.seed = j.value("seed", s.seed);
    for (const auto& t : j.at("tasks")) {
      SynthesisTask task;
      task.name = t.at("name").get<std::string>();
      task.weights = t.value("weights", std::map<std::string, double>{});
      task.noise_sd = t.value("noise_sd", 0.0);
      task.prevalence = t.at("prevalence").get<double>();
      s.tasks.push_back(std::move(task));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("bad synthesis spec: ") + e.what());
  }
  s.check();
  return s;
}

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> normal(mean, sd);
  for (int i = 0; i < 1000; ++i) {
    const double v = normal(rng);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(mean, lo, hi);
}

// E[sigmoid(m + sd * eps)] over eps ~ N(0, 1) on a fine grid; exact when sd = 0.
class NoisySigmoid {
 public:
  explicit NoisySigmoid(double sd) : sd_(sd) {
    if (sd_ <= 0.0) return;
    constexpr int kNodes = 241;
    double total = 0.0;
    for (int k = 0; k < kNodes; ++k) {
      const double t = -8.0 + 16.0 * k / (kNodes - 1);
      nodes_.push_back(t * sd_);
      weights_.push_back(std::exp(-0.5 * t * t));
      total += weights_.back();
    }
    for (auto& w : weights_) w /= total;
  }

  double operator()(double m) const {
    if (sd_ <= 0.0) return sigmoid(m);
    double s = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) s += weights_[k] * sigmoid(m + nodes_[k]);
    return s;
  }

 private:
  double sd_;
  std::vector<double> nodes_, weights_;
};

struct FeatureDraw {
  double value = 0.0;
  double z = 0.0;
};

}  // namespace

SyntheticDataset generate_synthetic(const SynthesisSpec& spec) {
  spec.check();
  const FeatureSchema& schema = *spec.schema;
  const std::size_t n = spec.n_records;
  std::mt19937_64 feat_rng(mix_seed(spec.seed, 1));

  std::vector<Record> records(n);
  // z[i][f] per record and feature
  std::vector<std::vector<double>> z(n, std::vector<double>(schema.features().size(), 0.0));
  const int width = std::max<int>(4, static_cast<int>(std::to_string(n).size()));
  for (std::size_t i = 0; i < n; ++i) {
    Record& r = records[i];
    const std::string num = std::to_string(i + 1);
    r.id = "rec-" + std::string(static_cast<std::size_t>(width) - std::min(num.size(), static_cast<std::size_t>(width)), '0') + num;
    for (std::size_t f = 0; f < schema.features().size(); ++f) {
      const FeatureDef& def = schema.features()[f];
      if (def.kind == FeatureKind::kStaticCategorical) {
        if (def.categories.empty()) continue;
        const std::size_t k = def.categories.size();
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        const std::size_t c = pick(feat_rng);
        r.categorical[def.name] = def.categories[c];
        const double kd = static_cast<double>(k);
        const double sd = kd > 1 ? std::sqrt((kd * kd - 1.0) / 12.0) : 1.0;
        z[i][f] = (static_cast<double>(c) - (kd - 1.0) / 2.0) / sd;
        continue;
      }
      if (!def.plausible_range) continue;
      const double lo = def.plausible_range->low, hi = def.plausible_range->high;
      const double mid = (lo + hi) / 2.0, sd = (hi - lo) / 6.0;
      if (def.kind == FeatureKind::kStaticNumeric) {
        const double v = std::clamp(round2(truncated_normal(feat_rng, mid, sd, lo, hi)), lo, hi);
        r.numeric[def.name] = v;
        z[i][f] = sd > 0 ? (v - mid) / sd : 0.0;
      } else {
        const double level = truncated_normal(feat_rng, mid, sd, lo, hi);
        std::uniform_int_distribution<int> count(1, 4);
        std::uniform_real_distribution<double> hour(0.0, 24.0);
        const int m = count(feat_rng);
        std::vector<SeriesPoint> pts;
        for (int p = 0; p < m; ++p) {
          const double v = std::clamp(round2(truncated_normal(feat_rng, level, sd / 4.0, lo, hi)), lo, hi);
          pts.push_back({round2(hour(feat_rng)), v});
        }
        std::stable_sort(pts.begin(), pts.end(), [](const SeriesPoint& a, const SeriesPoint& b) { return a.hours < b.hours; });
        double mean = 0.0;
        for (const auto& p : pts) mean += p.value;
        mean /= static_cast<double>(pts.size());
        r.series[def.name] = std::move(pts);
        z[i][f] = sd > 0 ? (mean - mid) / sd : 0.0;
      }
    }
  }

  SyntheticDataset out;
  std::map<std::string, LabelVector> labels;
  for (const auto& task : spec.tasks) {
    std::vector<double> lin(n, 0.0);
    for (const auto& [name, w] : task.weights) {
      const std::size_t f = schema.index_of(name);
      for (std::size_t i = 0; i < n; ++i) lin[i] += w * z[i][f];
    }
    const NoisySigmoid link(task.noise_sd);
    auto mean_prob = [&](double b) {
      double s = 0.0;
      for (double v : lin) s += link(v + b);
      return s / static_cast<double>(n);
    };
    double lo = -60.0, hi = 60.0;
    if (mean_prob(lo) > task.prevalence || mean_prob(hi) < task.prevalence) {
      fail(ErrorCode::kInfeasiblePrevalence, "prevalence " + std::to_string(task.prevalence) + " for '" + task.name +
                                                 "' is out of reach of the intercept");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double m = (lo + hi) / 2.0;
      (mean_prob(m) < task.prevalence ? lo : hi) = m;
    }
    const double b = (lo + hi) / 2.0;
    if (std::abs(mean_prob(b) - task.prevalence) > 0.005) {
      fail(ErrorCode::kInfeasiblePrevalence, "could not reach prevalence " + std::to_string(task.prevalence) +
                                                 " for '" + task.name + "'");
    }

    std::mt19937_64 label_rng(mix_seed(spec.seed, fnv1a64(task.name)));
    std::normal_distribution<double> eps(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    LabelVector y(n);
    std::vector<double> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = eps(label_rng);
      const double u = unif(label_rng);
      y[i] = u < sigmoid(lin[i] + b + task.noise_sd * e) ? 1 : 0;
      truth[i] = link(lin[i] + b);
    }
    labels[task.name] = std::move(y);
    out.true_probability[task.name] = std::move(truth);
    out.intercept[task.name] = b;
  }

  if (spec.missing_rate > 0.0) {
    std::mt19937_64 miss_rng(mix_seed(spec.seed, 2));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& r : records) {
      for (const auto& def : schema.features()) {
        if (unif(miss_rng) >= spec.missing_rate) continue;
        r.numeric.erase(def.name);
        r.categorical.erase(def.name);
        r.series.erase(def.name);
      }
    }
  }
  out.records = RecordSet(spec.schema, std::move(records), std::move(labels));
  return out;
}

double bayes_auroc(const std::vector<double>& q) {
  // sum_{i,j} q_i (1 - q_j) ([q_i > q_j] + 0.5 [q_i = q_j]) / (sum q * sum (1 - q)), i != j
  const std::size_t n = q.size();
  if (n < 2) fail(ErrorCode::kInvalidArgument, "Bayes AUROC needs at least 2 records");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] < q[b]; });
  double num = 0.0, neg_below = 0.0;
  double sum_pos = 0.0, sum_neg = 0.0, self = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    double pos_grp = 0.0, neg_grp = 0.0;
    while (j < n && q[order[j]] == q[order[i]]) {
      pos_grp += q[order[j]];
      neg_grp += 1.0 - q[order[j]];
      self += q[order[j]] * (1.0 - q[order[j]]);
      ++j;
    }
    num += pos_grp * neg_below + 0.5 * pos_grp * neg_grp;
    neg_below += neg_grp;
    sum_pos += pos_grp;
    sum_neg += neg_grp;
    i = j;
  }
  // Remove i == j pairs, which sit in the tie term.
  num -= 0.5 * self;
  const double den = sum_pos * sum_neg - self;
  if (den <= 0.0) fail(ErrorCode::kSingleClass, "Bayes AUROC undefined for degenerate probabilities");
  return num / den;
}

}  // namespace tabembed
