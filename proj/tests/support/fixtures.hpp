#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tabembed/common.hpp"
#include "tabembed/tabular.hpp"

namespace fixtures {

// age (18-100 years), sbp (60-220 mmHg), temperature (30-45 celsius), avpu (Alert/Voice/Pain),
// glucose series (40-500 mg/dL).
std::shared_ptr<const tabembed::FeatureSchema> small_schema();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

tabembed::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

// Labels with both classes present.
tabembed::LabelVector random_labels(std::mt19937_64& rng, std::size_t n, double p = 0.5);

// Directory holding the repository sources (configs, templates).
std::filesystem::path source_dir();

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  std::vector<std::string> messages_;
  tabembed::WarningSink previous_;
};

}  // namespace fixtures
