#pragma once

// Pooling of token embeddings and embedding feature matrices.

#include <filesystem>
#include <functional>

#include "tabembed/backend.hpp"
#include "tabembed/embedding_cache.hpp"
#include "tabembed/tabular.hpp"

namespace tabembed {

enum class PoolingStrategy { kMax, kMean, kLastToken, kFirstToken };

std::string_view to_string(PoolingStrategy strategy);
PoolingStrategy pooling_from_string(std::string_view text);

std::vector<double> pool(const TokenEmbeddingMatrix& matrix, PoolingStrategy strategy);

// Per-record prompt builder: returns the prompt config for a record index (lets callers
// inject fold-dependent statistics such as training prevalence).
using PromptConfigFor = std::function<PromptConfig(std::size_t record_index)>;

struct EmbeddingJob {
  SerializationConfig serialization;
  PromptConfig prompt;
  PoolingStrategy pooling = PoolingStrategy::kMean;
  int jobs = 1;  // bound on in-flight backend requests
};

PromptBundle render_prompt(const RecordSet& records, std::size_t index, const SerializationConfig& scfg,
                           const PromptConfig& pcfg);

// One pooled D-dim row per record, in record order. The cache is consulted before the
// backend and filled after each fetch. On failures after partial progress, throws
// kPartialBatch naming the completed count; if nothing completed the backend error propagates.
FeatureMatrix build_feature_matrix(const RecordSet& records, const EmbeddingJob& job, Backend& backend,
                                   EmbeddingCache* cache, const PromptConfigFor& prompt_for = nullptr);

// Per-column z-scoring fitted on training rows. Constant columns get scale 1.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> scales;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
  std::uint64_t fingerprint() const;
};

// Binary layout: "TEMB" | u32 dim | u32 rows | f32[rows*dim], little-endian.
void write_feature_binary(const FeatureMatrix& m, const std::filesystem::path& path);
Matrix read_feature_binary(const std::filesystem::path& path);
void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);

}  // namespace tabembed
