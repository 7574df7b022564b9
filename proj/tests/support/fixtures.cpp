#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

namespace fixtures {

using namespace tabembed;

std::shared_ptr<const FeatureSchema> small_schema() {
  std::vector<FeatureDef> f;
  f.push_back({"age", "age", "years", FeatureKind::kStaticNumeric, PlausibleRange{18, 100}, {}});
  f.push_back({"sbp", "systolic blood pressure", "mmHg", FeatureKind::kStaticNumeric, PlausibleRange{60, 220}, {}});
  f.push_back({"temperature", "body temperature", "celsius", FeatureKind::kStaticNumeric, PlausibleRange{30, 45}, {}});
  f.push_back({"avpu", "AVPU", "", FeatureKind::kStaticCategorical, std::nullopt, {"Alert", "Voice", "Pain"}});
  f.push_back({"glucose", "glucose", "mg/dL", FeatureKind::kTimeseriesNumeric, PlausibleRange{40, 500}, {}});
  return std::make_shared<FeatureSchema>("small", std::move(f));
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  std::mt19937_64 rng(std::random_device{}());
  for (;;) {
    path_ = base / ("tabembed-test-" + std::to_string(rng() % 1000000000) + "-" + std::to_string(counter++));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (auto& v : m.values) v = g(rng);
  return m;
}

LabelVector random_labels(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution b(p);
  LabelVector y(n);
  for (;;) {
    for (auto& v : y) v = b(rng) ? 1 : 0;
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos > 0 && static_cast<std::size_t>(pos) < n) return y;
  }
}

std::filesystem::path source_dir() { return TABEMBED_SOURCE_DIR; }

WarningCapture::WarningCapture() {
  previous_ = set_warning_sink([this](std::string_view m) { messages_.emplace_back(m); });
}

WarningCapture::~WarningCapture() { set_warning_sink(previous_); }

bool WarningCapture::contains(std::string_view needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace fixtures
