#include "tabembed/learners/model.hpp"

#include <algorithm>
#include <fstream>

namespace tabembed {

namespace {

constexpr int kModelFormatVersion = 1;
constexpr double kProbFloor = 1e-15;

double clip(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

nlohmann::json trees_to_json(const std::vector<Tree>& trees) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trees) out.push_back(t.to_json());
  return out;
}

std::vector<Tree> trees_from_json(const nlohmann::json& j) {
  std::vector<Tree> out;
  for (const auto& t : j) out.push_back(Tree::from_json(t));
  return out;
}

void check_features(const Tree& t, std::size_t n_features) {
  for (const auto& node : t.nodes) {
    if (node.feature >= static_cast<int>(n_features)) fail(ErrorCode::kParseFailure, "tree split feature out of range");
  }
}

}  // namespace

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kGbt: return "gbt";
    case LearnerKind::kElasticNet: return "elasticnet_lr";
    case LearnerKind::kRandomForest: return "random_forest";
  }
  return "gbt";
}

LearnerKind learner_kind_from_string(std::string_view text) {
  if (text == "gbt" || text == "xgb") return LearnerKind::kGbt;
  if (text == "elasticnet_lr" || text == "lr" || text == "logistic_regression") return LearnerKind::kElasticNet;
  if (text == "random_forest" || text == "rf") return LearnerKind::kRandomForest;
  fail(ErrorCode::kConfigError, "unknown learner '" + std::string(text) + "'");
}

LearnerKind kind_of(const LearnerParams& params) { return static_cast<LearnerKind>(params.index()); }

nlohmann::json params_to_json(const LearnerParams& params) {
  return std::visit([](const auto& p) { return p.to_json(); }, params);
}

LearnerParams params_from_json(LearnerKind kind, const nlohmann::json& j) {
  switch (kind) {
    case LearnerKind::kGbt: return GbtParams::from_json(j);
    case LearnerKind::kElasticNet: return ElasticNetParams::from_json(j);
    case LearnerKind::kRandomForest: return ForestParams::from_json(j);
  }
  fail(ErrorCode::kConfigError, "unknown learner kind");
}

LearnerKind TrainedModel::kind() const { return static_cast<LearnerKind>(model.index()); }

LearnerParams TrainedModel::params() const {
  return std::visit([](const auto& m) -> LearnerParams { return m.params; }, model);
}

std::vector<double> TrainedModel::predict_proba(const Matrix& x) const {
  if (x.cols != n_features) {
    fail(ErrorCode::kDimensionMismatch,
         "model expects " + std::to_string(n_features) + " features, got " + std::to_string(x.cols));
  }
  std::vector<double> out(x.rows);
  std::visit(Overloaded{
                 [&](const GbtModel& m) {
                   for (std::size_t i = 0; i < x.rows; ++i) out[i] = clip(sigmoid(m.margin(x.row(i))));
                 },
                 [&](const LinearModel& m) {
                   for (std::size_t i = 0; i < x.rows; ++i) out[i] = clip(sigmoid(m.decision(x.row(i))));
                 },
                 [&](const ForestModel& m) {
                   for (std::size_t i = 0; i < x.rows; ++i) out[i] = m.probability(x.row(i));
                 },
             },
             model);
  return out;
}

std::vector<double> TrainedModel::predict_proba_staged(const Matrix& x, std::size_t n_trees) const {
  const auto* gbt = std::get_if<GbtModel>(&model);
  if (!gbt) fail(ErrorCode::kInvalidArgument, "staged prediction needs a boosted model");
  if (x.cols != n_features) fail(ErrorCode::kDimensionMismatch, "feature count mismatch");
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = clip(sigmoid(gbt->margin(x.row(i), n_trees)));
  return out;
}

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json j = {{"format_version", kModelFormatVersion},
                      {"kind", to_string(kind())},
                      {"params", params_to_json(params())},
                      {"n_features", n_features},
                      {"seed", seed},
                      {"train_fold", train_fold}};
  std::visit(Overloaded{
                 [&](const GbtModel& m) {
                   j["base_score"] = m.base_score;
                   j["train_loss"] = m.train_loss;
                   j["trees"] = trees_to_json(m.trees);
                 },
                 [&](const LinearModel& m) {
                   j["means"] = m.means;
                   j["scales"] = m.scales;
                   j["coef"] = m.coef;
                   j["intercept"] = m.intercept;
                   j["iterations"] = m.iterations;
                   j["converged"] = m.converged;
                 },
                 [&](const ForestModel& m) { j["trees"] = trees_to_json(m.trees); },
             },
             model);
  return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      fail(ErrorCode::kParseFailure, "unsupported model format version");
    }
    TrainedModel t;
    const LearnerKind kind = learner_kind_from_string(j.at("kind").get<std::string>());
    const LearnerParams params = params_from_json(kind, j.at("params"));
    t.n_features = j.at("n_features").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.train_fold = j.value("train_fold", "");
    switch (kind) {
      case LearnerKind::kGbt: {
        GbtModel m;
        m.params = std::get<GbtParams>(params);
        m.base_score = j.at("base_score").get<double>();
        m.train_loss = j.value("train_loss", std::vector<double>{});
        m.trees = trees_from_json(j.at("trees"));
        for (const auto& tr : m.trees) check_features(tr, t.n_features);
        t.model = std::move(m);
        break;
      }
      case LearnerKind::kElasticNet: {
        LinearModel m;
        m.params = std::get<ElasticNetParams>(params);
        m.means = j.at("means").get<std::vector<double>>();
        m.scales = j.at("scales").get<std::vector<double>>();
        m.coef = j.at("coef").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.iterations = j.value("iterations", std::size_t{0});
        m.converged = j.value("converged", true);
        if (m.means.size() != t.n_features || m.scales.size() != t.n_features || m.coef.size() != t.n_features) {
          fail(ErrorCode::kParseFailure, "linear model vectors do not match n_features");
        }
        t.model = std::move(m);
        break;
      }
      case LearnerKind::kRandomForest: {
        ForestModel m;
        m.params = std::get<ForestParams>(params);
        m.trees = trees_from_json(j.at("trees"));
        if (m.trees.empty()) fail(ErrorCode::kParseFailure, "forest has no trees");
        for (const auto& tr : m.trees) check_features(tr, t.n_features);
        t.model = std::move(m);
        break;
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseFailure, std::string("malformed model file: ") + e.what());
  }
}

void TrainedModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << to_json().dump() << '\n';
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseFailure, std::string("malformed model file: ") + e.what());
  }
  return from_json(j);
}

std::uint64_t TrainedModel::fingerprint() const { return fnv1a64(to_json().dump()); }

TrainedModel train_model(const LearnerParams& params, const Matrix& x, const LabelVector& y, std::uint64_t seed) {
  TrainedModel t;
  t.n_features = x.cols;
  t.seed = seed;
  std::visit(Overloaded{
                 [&](const GbtParams& p) { t.model = train_gbt(x, y, p); },
                 [&](const ElasticNetParams& p) { t.model = train_elasticnet_lr(x, y, p); },
                 [&](const ForestParams& p) { t.model = train_random_forest(x, y, p, seed); },
             },
             params);
  return t;
}

}  // namespace tabembed
