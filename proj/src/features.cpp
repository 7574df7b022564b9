#include "tabembed/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace tabembed {

std::string_view to_string(PoolingStrategy strategy) {
  switch (strategy) {
    case PoolingStrategy::kMax: return "max";
    case PoolingStrategy::kMean: return "mean";
    case PoolingStrategy::kLastToken: return "last-token";
    case PoolingStrategy::kFirstToken: return "first-token";
  }
  return "mean";
}

PoolingStrategy pooling_from_string(std::string_view text) {
  if (text == "max") return PoolingStrategy::kMax;
  if (text == "mean") return PoolingStrategy::kMean;
  if (text == "last-token" || text == "last") return PoolingStrategy::kLastToken;
  if (text == "first-token" || text == "first") return PoolingStrategy::kFirstToken;
  fail(ErrorCode::kConfigError, "unknown pooling strategy '" + std::string(text) + "'");
}

std::vector<double> pool(const TokenEmbeddingMatrix& m, PoolingStrategy strategy) {
  if (m.token_count == 0 || m.dim == 0) fail(ErrorCode::kEmptyMatrix, "cannot pool an empty embedding matrix");
  if (m.values.size() != m.token_count * m.dim) fail(ErrorCode::kDimensionMismatch, "embedding matrix shape mismatch");
  const std::size_t dim = m.dim;
  switch (strategy) {
    case PoolingStrategy::kFirstToken: return {m.row(0), m.row(0) + dim};
    case PoolingStrategy::kLastToken: return {m.row(m.token_count - 1), m.row(m.token_count - 1) + dim};
    case PoolingStrategy::kMax: {
      std::vector<double> out(m.row(0), m.row(0) + dim);
      for (std::size_t t = 1; t < m.token_count; ++t) {
        const double* r = m.row(t);
        for (std::size_t d = 0; d < dim; ++d) out[d] = std::max(out[d], r[d]);
      }
      return out;
    }
    case PoolingStrategy::kMean: {
      std::vector<double> out(dim, 0.0);
      for (std::size_t t = 0; t < m.token_count; ++t) {
        const double* r = m.row(t);
        for (std::size_t d = 0; d < dim; ++d) out[d] += r[d];
      }
      for (auto& v : out) v /= static_cast<double>(m.token_count);
      return out;
    }
  }
  return {};
}

PromptBundle render_prompt(const RecordSet& records, std::size_t index, const SerializationConfig& scfg,
                           const PromptConfig& pcfg) {
  const Record& r = records.records().at(index);
  return assemble_prompt(serialize(r, records.schema(), scfg), pcfg, scfg.format, r.id);
}

FeatureMatrix build_feature_matrix(const RecordSet& records, const EmbeddingJob& job, Backend& backend,
                                   EmbeddingCache* cache, const PromptConfigFor& prompt_for) {
  const std::size_t n = records.size();
  const std::size_t dim = backend.descriptor().embedding_dim;
  FeatureMatrix out;
  out.values = Matrix(n, dim);
  out.missing_mask.assign(n * dim, 0);
  for (std::size_t d = 0; d < dim; ++d) out.columns.push_back("emb_" + std::to_string(d));
  for (const auto& r : records.records()) out.row_ids.push_back(r.id);

  std::vector<std::optional<Error>> errors(n);
  parallel_for(n, job.jobs, [&](std::size_t i) {
    try {
      const PromptBundle bundle =
          render_prompt(records, i, job.serialization, prompt_for ? prompt_for(i) : job.prompt);
      const std::string key = EmbeddingCache::key(prompt_hash(bundle, backend.descriptor()), backend.descriptor());
      std::optional<TokenEmbeddingMatrix> m;
      if (cache) m = cache->get(key);
      if (!m || m->dim != dim) {
        m = backend.embed_tokens(bundle);
        if (cache) cache->put(key, *m);
      }
      const auto pooled = pool(*m, job.pooling);
      for (double v : pooled) {
        if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValues, "pooled embedding is not finite");
      }
      std::copy(pooled.begin(), pooled.end(), out.values.row(i));
    } catch (const Error& e) {
      errors[i] = e;
    }
  });

  std::size_t completed = 0;
  const Error* first = nullptr;
  for (const auto& e : errors) {
    if (!e) {
      ++completed;
    } else if (!first) {
      first = &*e;
    }
  }
  if (first) {
    if (completed == 0) throw *first;
    fail(ErrorCode::kPartialBatch, "completed " + std::to_string(completed) + " of " + std::to_string(n) +
                                       " records; first failure: " + first->what());
  }
  return out;
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.means.assign(x.cols, 0.0);
  s.scales.assign(x.cols, 1.0);
  if (x.rows == 0) return s;
  for (std::size_t c = 0; c < x.cols; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) sum += x(r, c);
    const double mean = sum / static_cast<double>(x.rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(x.rows));
    s.means[c] = mean;
    s.scales[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols != means.size()) fail(ErrorCode::kDimensionMismatch, "standardizer column count mismatch");
  Matrix out = x;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = (x(r, c) - means[c]) / scales[c];
  }
  return out;
}

std::uint64_t Standardizer::fingerprint() const {
  return fnv1a64_bytes(scales.data(), scales.size() * sizeof(double),
                 fnv1a64_bytes(means.data(), means.size() * sizeof(double)));
}

void write_feature_binary(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("TEMB", 4);
  put_u32(static_cast<std::uint32_t>(m.values.cols));
  put_u32(static_cast<std::uint32_t>(m.values.rows));
  for (double v : m.values.values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  if (!out) fail(ErrorCode::kIoError, "write to " + path.string() + " failed");
}

Matrix read_feature_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  auto get_u32 = [&]() {
    unsigned char b[4] = {};
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) fail(ErrorCode::kParseFailure, "truncated feature file " + path.string());
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TEMB", 4) != 0) fail(ErrorCode::kParseFailure, "bad feature file magic");
  const std::uint32_t dim = get_u32();
  const std::uint32_t rows = get_u32();
  Matrix m(rows, dim);
  for (auto& v : m.values) {
    const std::uint32_t bits = get_u32();
    float f;
    std::memcpy(&f, &bits, 4);
    v = f;
  }
  return m;
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << "id";
  for (const auto& c : m.columns) out << ',' << c;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < m.values.rows; ++r) {
    out << m.row_ids.at(r);
    for (std::size_t c = 0; c < m.values.cols; ++c) out << ',' << m.values(r, c);
    out << '\n';
  }
}

}  // namespace tabembed
