#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabembed {

enum class ErrorCode {
  kInvalidArgument,
  kConfigError,
  kIoError,
  // ingestion
  kUnknownColumn,
  kMalformedNumber,
  kMalformedSeries,
  kMalformedLabel,
  kMissingLabel,
  kUnknownCategory,
  kDuplicateId,
  kTooFewRecords,
  kEmptyFeatureColumn,
  // serialization
  kUnknownTemplate,
  kEmptyQuestion,
  kParseFailure,
  // backends
  kBackendUnreachable,
  kBackendProtocolError,
  kNonFiniteValues,
  kCandidateMissing,
  kCacheCorrupt,
  kPartialBatch,
  // learners / metrics
  kEmptyMatrix,
  kDegenerateLabels,
  kDimensionMismatch,
  kSingleClass,
  kTooFewValidResamples,
  kConstantInput,
  kLengthMismatch,
  kEmptyOptions,
  // pipeline
  kInfeasiblePrevalence,
  kFractionTooSmall,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Warnings go to stderr unless a sink is installed (tests capture them).
using WarningSink = std::function<void(std::string_view)>;
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset);
std::uint64_t fnv1a64_bytes(const void* data, std::size_t size, std::uint64_t state = kFnvOffset);
std::string hex64(std::uint64_t value);

// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to per-index slots by the caller. The first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }
  double* row(std::size_t r) { return values.data() + r * cols; }

  Matrix select_rows(const std::vector<std::size_t>& indices) const;
  bool operator==(const Matrix&) const = default;
};

double sigmoid(double x);
double logit(double p);

}  // namespace tabembed
