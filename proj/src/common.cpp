#include "tabembed/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>

namespace tabembed {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kMalformedNumber: return "MalformedNumber";
    case ErrorCode::kMalformedSeries: return "MalformedSeries";
    case ErrorCode::kMalformedLabel: return "MalformedLabel";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kTooFewRecords: return "TooFewRecords";
    case ErrorCode::kEmptyFeatureColumn: return "EmptyFeatureColumn";
    case ErrorCode::kUnknownTemplate: return "UnknownTemplate";
    case ErrorCode::kEmptyQuestion: return "EmptyQuestion";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kBackendProtocolError: return "BackendProtocolError";
    case ErrorCode::kNonFiniteValues: return "NonFiniteValues";
    case ErrorCode::kCandidateMissing: return "CandidateMissing";
    case ErrorCode::kCacheCorrupt: return "CacheCorrupt";
    case ErrorCode::kPartialBatch: return "PartialBatch";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kTooFewValidResamples: return "TooFewValidResamples";
    case ErrorCode::kConstantInput: return "ConstantInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyOptions: return "EmptyOptions";
    case ErrorCode::kInfeasiblePrevalence: return "InfeasiblePrevalence";
    case ErrorCode::kFractionTooSmall: return "FractionTooSmall";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

namespace {
std::mutex g_warning_mutex;
WarningSink g_warning_sink;
}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_warning_mutex);
  std::swap(g_warning_sink, sink);
  return sink;
}

void warn(std::string_view message) {
  std::lock_guard lock(g_warning_mutex);
  if (g_warning_sink) {
    g_warning_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

std::uint64_t fnv1a64_bytes(const void* data, std::size_t size, std::uint64_t state) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= bytes[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  return fnv1a64_bytes(bytes.data(), bytes.size(), state);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

Matrix Matrix::select_rows(const std::vector<std::size_t>& indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(row(indices[r]), cols, out.row(r));
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace tabembed
