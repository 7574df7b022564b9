#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "tabembed/features.hpp"

using namespace tabembed;

namespace {

TokenEmbeddingMatrix matrix(std::vector<std::vector<double>> rows) {
  TokenEmbeddingMatrix m;
  m.token_count = rows.size();
  m.dim = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  return m;
}

// Fails every record whose id is listed; otherwise a one-token row of the record index.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(std::set<std::string> failing, std::size_t dim)
      : Backend(BackendDescriptor{BackendKind::kRandom, std::nullopt, dim, 1042, 1, {}, {}}),
        failing_(std::move(failing)) {}

 protected:
  TokenEmbeddingMatrix do_embed(const PromptBundle& bundle) override {
    if (failing_.contains(bundle.source_record_id)) fail(ErrorCode::kBackendUnreachable, "down");
    return {1, descriptor().embedding_dim, std::vector<double>(descriptor().embedding_dim, 1.0), ""};
  }
  TokenLogprobs do_logprobs(const PromptBundle&, std::string_view, std::span<const TokenId>) override { return {}; }

 private:
  std::set<std::string> failing_;
};

RecordSet small_records(std::size_t n) {
  std::vector<Record> recs;
  for (std::size_t i = 0; i < n; ++i) {
    Record r;
    r.id = "r" + std::to_string(i);
    r.numeric["age"] = 30.0 + static_cast<double>(i);
    r.numeric["sbp"] = 100.0 + static_cast<double>(i);
    recs.push_back(r);
  }
  return RecordSet(fixtures::small_schema(), recs, {});
}

}  // namespace

TEST(Pool, WorkedExamples) {
  const auto m = matrix({{1, 2}, {3, 0}});
  EXPECT_EQ(pool(m, PoolingStrategy::kMax), (std::vector<double>{3, 2}));
  EXPECT_EQ(pool(m, PoolingStrategy::kMean), (std::vector<double>{2, 1}));
  EXPECT_EQ(pool(m, PoolingStrategy::kLastToken), (std::vector<double>{3, 0}));
  EXPECT_EQ(pool(m, PoolingStrategy::kFirstToken), (std::vector<double>{1, 2}));
}

TEST(Pool, EmptyMatrix) {
  try {
    pool(TokenEmbeddingMatrix{}, PoolingStrategy::kMean);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMatrix);
  }
}

TEST(Pool, LastTokenIsOrderSensitive) {
  const auto m = matrix({{1, 2}, {3, 0}});
  const auto swapped = matrix({{3, 0}, {1, 2}});
  EXPECT_NE(pool(m, PoolingStrategy::kLastToken), pool(swapped, PoolingStrategy::kLastToken));
  EXPECT_EQ(pool(m, PoolingStrategy::kMax), pool(swapped, PoolingStrategy::kMax));
}

TEST(Pool, StrategyNames) {
  for (auto s : {PoolingStrategy::kMax, PoolingStrategy::kMean, PoolingStrategy::kLastToken,
                 PoolingStrategy::kFirstToken}) {
    EXPECT_EQ(pooling_from_string(to_string(s)), s);
  }
  EXPECT_THROW(pooling_from_string("median"), Error);
}

TEST(BuildFeatureMatrix, ShapeAndWarmCacheSkipsBackend) {
  const auto rs = small_records(12);
  BackendDescriptor d;
  d.embedding_dim = 8;
  MockInformativeBackend backend(d, rs.schema_ptr(), {});
  EmbeddingCache cache;
  EmbeddingJob job;
  job.pooling = PoolingStrategy::kMax;
  const auto first = build_feature_matrix(rs, job, backend, &cache);
  EXPECT_EQ(first.values.rows, 12u);
  EXPECT_EQ(first.values.cols, 8u);
  EXPECT_EQ(first.row_ids.front(), "r0");
  for (auto m : first.missing_mask) EXPECT_EQ(m, 0);
  EXPECT_EQ(backend.embed_calls(), 12u);
  const auto second = build_feature_matrix(rs, job, backend, &cache);
  EXPECT_EQ(backend.embed_calls(), 12u);
  EXPECT_EQ(second.values, first.values);
}

TEST(BuildFeatureMatrix, ParallelMatchesSerial) {
  const auto rs = small_records(30);
  BackendDescriptor d;
  d.embedding_dim = 8;
  MockInformativeBackend backend(d, rs.schema_ptr(), {});
  EmbeddingJob job;
  const auto serial = build_feature_matrix(rs, job, backend, nullptr);
  job.jobs = 4;
  EXPECT_EQ(build_feature_matrix(rs, job, backend, nullptr).values, serial.values);
}

TEST(BuildFeatureMatrix, PartialBatchNamesCompletedCount) {
  const auto rs = small_records(5);
  FlakyBackend backend({"r1", "r3"}, 4);
  try {
    build_feature_matrix(rs, {}, backend, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPartialBatch);
    EXPECT_NE(std::string(e.what()).find("completed 3 of 5"), std::string::npos) << e.what();
  }
  FlakyBackend down({"r0", "r1", "r2", "r3", "r4"}, 4);
  try {
    build_feature_matrix(rs, {}, down, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBackendUnreachable);
  }
}

TEST(FeatureFiles, BinaryRoundTripAndCsv) {
  fixtures::TempDir dir;
  FeatureMatrix m;
  m.values = Matrix(2, 3);
  m.values.values = {0.5, -1.25, 3, 4, 5, 6};
  m.row_ids = {"a", "b"};
  m.columns = {"emb_0", "emb_1", "emb_2"};
  m.missing_mask.assign(6, 0);
  write_feature_binary(m, dir / "f.bin");
  const auto raw = fixtures::read_text(dir / "f.bin");
  EXPECT_EQ(raw.size(), 12u + 6u * 4u);
  EXPECT_EQ(raw.substr(0, 4), "TEMB");
  EXPECT_EQ(static_cast<unsigned char>(raw[4]), 3);
  EXPECT_EQ(static_cast<unsigned char>(raw[8]), 2);
  EXPECT_EQ(read_feature_binary(dir / "f.bin"), m.values);
  write_feature_csv(m, dir / "f.csv");
  EXPECT_EQ(fixtures::read_text(dir / "f.csv"), "id,emb_0,emb_1,emb_2\na,0.5,-1.25,3\nb,4,5,6\n");
}

TEST(Standardizer, FitApplyConstantColumn) {
  Matrix x(4, 2);
  x.values = {1, 5, 2, 5, 3, 5, 4, 5};
  const auto s = Standardizer::fit(x);
  EXPECT_DOUBLE_EQ(s.means[0], 2.5);
  EXPECT_DOUBLE_EQ(s.scales[0], std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(s.scales[1], 1.0);
  const auto z = s.apply(x);
  EXPECT_DOUBLE_EQ(z(3, 1), 0.0);
  EXPECT_NEAR(z(0, 0) + z(1, 0) + z(2, 0) + z(3, 0), 0.0, 1e-12);
}

TEST(PoolProperties, RandomMatrices) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng() % 12, d = 1 + rng() % 9;
    TokenEmbeddingMatrix m{t, d, {}, ""};
    for (std::size_t i = 0; i < t * d; ++i) m.values.push_back(g(rng));
    for (auto s : {PoolingStrategy::kMax, PoolingStrategy::kMean, PoolingStrategy::kLastToken,
                   PoolingStrategy::kFirstToken}) {
      const auto v = pool(m, s);
      ASSERT_EQ(v.size(), d);
      for (double x : v) EXPECT_TRUE(std::isfinite(x));
    }
  }
}
