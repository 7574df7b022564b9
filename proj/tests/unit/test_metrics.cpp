#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tabembed/metrics.hpp"

using namespace tabembed;

namespace {

// Positives ~ N(mu, 1), negatives ~ N(0, 1): population AUROC Phi(mu / sqrt 2).
void binormal(std::mt19937_64& rng, std::size_t n, double auc, std::vector<double>& s, LabelVector& y) {
  const double mu = std::sqrt(2.0) * oracle::normal_quantile(auc);
  std::normal_distribution<double> g;
  std::bernoulli_distribution b(0.4318);
  s.clear();
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    y.push_back(b(rng) ? 1 : 0);
    s.push_back(g(rng) + (y.back() ? mu : 0.0));
  }
}

}  // namespace

TEST(Auroc, WorkedExamples) {
  EXPECT_EQ(auroc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auroc({0.4, 0.4, 0.4, 0.4}, {0, 1, 0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(auroc({0.3, 0.7, 0.5, 0.6, 0.2}, {0, 1, 0, 1, 1}), 4.0 / 6.0);
  EXPECT_EQ(auroc({0.3, 0.7, 0.5, 0.6, 0.2}, {0, 1, 0, 1, 1}),
            oracle::exhaustive_auroc({0.3, 0.7, 0.5, 0.6, 0.2}, {0, 1, 0, 1, 1}));
}

TEST(Auroc, Errors) {
  try {
    auroc({0.1, 0.2}, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
  }
  EXPECT_THROW(auroc({0.1, 0.2}, {1}), Error);
}

TEST(Auroc, MatchesExhaustiveWithHeavyTies) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(rng() % 4);
    const auto y = fixtures::random_labels(rng, n);
    EXPECT_EQ(auroc(s, y), oracle::exhaustive_auroc(s, y));
  }
}

TEST(Bootstrap, DeterministicAndSeedSensitive) {
  std::mt19937_64 rng(1);
  std::vector<double> s;
  LabelVector y;
  binormal(rng, 300, 0.7, s, y);
  const auto a = bootstrap_ci(auroc, s, y, 200, 0.95, 17);
  EXPECT_EQ(a, bootstrap_ci(auroc, s, y, 200, 0.95, 17));
  EXPECT_EQ(a, bootstrap_ci(auroc, s, y, 200, 0.95, 17, 4));
  EXPECT_NE(a.lo, bootstrap_ci(auroc, s, y, 200, 0.95, 18).lo);
  EXPECT_LE(a.lo, a.point);
  EXPECT_GE(a.hi, a.point);
  EXPECT_EQ(MetricCI::from_json(a.to_json()), a);
}

TEST(Bootstrap, PerfectSeparationCollapses) {
  std::vector<double> s;
  LabelVector y;
  for (int i = 0; i < 200; ++i) {
    y.push_back(i % 2);
    s.push_back(i % 2 ? 1.0 + i : -1.0 - i);
  }
  const auto ci = bootstrap_ci(auroc, s, y, 200, 0.95, 3);
  EXPECT_EQ(ci.lo, 1.0);
  EXPECT_EQ(ci.hi, 1.0);
}

TEST(Bootstrap, WidthAtSixHundredSixty) {
  std::mt19937_64 rng(4);
  std::vector<double> s;
  LabelVector y;
  binormal(rng, 660, 0.7, s, y);
  const auto ci = bootstrap_ci(auroc, s, y, 1000, 0.95, 1);
  EXPECT_GT(ci.hi - ci.lo, 0.05);
  EXPECT_LT(ci.hi - ci.lo, 0.11);
}

TEST(Bootstrap, TooFewValidResamples) {
  // A statistic undefined on most resamples leaves too few to form an interval.
  std::vector<double> s(40);
  LabelVector y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    s[i] = static_cast<double>(i);
    y[i] = static_cast<int>(i % 2);
  }
  std::size_t calls = 0;
  const Statistic mostly_undefined = [&calls](const std::vector<double>& v, const LabelVector&) {
    return calls++ == 0 || v[0] < 4 ? 0.5 : std::numeric_limits<double>::quiet_NaN();
  };
  try {
    bootstrap_ci(mostly_undefined, s, y, 200, 0.95, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewValidResamples);
  }
}

TEST(Bootstrap, DegenerateFlagWhenPointOutsideInterval) {
  // A statistic whose full-sample value is far from its resample distribution.
  const Statistic odd = [](const std::vector<double>& s, const LabelVector&) {
    std::set<double> distinct(s.begin(), s.end());
    return static_cast<double>(distinct.size());
  };
  std::vector<double> s(100);
  LabelVector y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    s[i] = static_cast<double>(i);
    y[i] = static_cast<int>(i % 2);
  }
  const auto ci = bootstrap_ci(odd, s, y, 200, 0.95, 1);
  EXPECT_TRUE(ci.degenerate);
  EXPECT_GT(ci.point, ci.hi);
}

TEST(Quantile, TypeSeven) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.9), 5.0);
}

TEST(Calibration, ConstantHalfAllPositive) {
  const auto c = calibration_curve(std::vector<double>(20, 0.5), LabelVector(20, 1), 10);
  std::size_t occupied = 0;
  for (const auto& b : c.bins) {
    if (b.count) {
      ++occupied;
      EXPECT_DOUBLE_EQ(b.observed_rate, 1.0);
      EXPECT_DOUBLE_EQ(b.mean_predicted, 0.5);
    } else {
      EXPECT_FALSE(b.defined);
    }
  }
  EXPECT_EQ(occupied, 1u);
}

TEST(Calibration, PartitionAndEdges) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t bins : {1u, 3u, 10u, 17u}) {
    std::vector<double> p(500);
    for (auto& v : p) v = u(rng);
    p[0] = 0.0;
    p[1] = 1.0;
    const auto c = calibration_curve(p, fixtures::random_labels(rng, 500), bins);
    ASSERT_EQ(c.bins.size(), bins);
    ASSERT_EQ(c.edges.size(), bins + 1);
    std::size_t total = 0;
    for (const auto& b : c.bins) total += b.count;
    EXPECT_EQ(total, 500u);
    for (std::size_t i = 1; i < c.edges.size(); ++i) EXPECT_LT(c.edges[i - 1], c.edges[i]);
    EXPECT_EQ(c.edges.front(), 0.0);
    EXPECT_EQ(c.edges.back(), 1.0);
    EXPECT_EQ(CalibrationCurve::from_json(c.to_json()).to_json(), c.to_json());
  }
}

TEST(Calibration, CsvColumns) {
  fixtures::TempDir dir;
  calibration_curve({0.05, 0.95}, {0, 1}, 2).write_csv(dir / "c.csv");
  const auto text = fixtures::read_text(dir / "c.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "bin_mid,predicted,observed,count");
}

TEST(Correlation, WorkedExamples) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  std::vector<double> affine, expo;
  for (double v : a) {
    affine.push_back(2 * v + 3);
    expo.push_back(std::exp(v));
  }
  EXPECT_NEAR(pearson(a, affine).coefficient, 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, affine).coefficient, 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, expo).coefficient, 1.0, 1e-15);
  EXPECT_LT(pearson(a, expo).coefficient, 1.0);
  EXPECT_NEAR(spearman(a, {2, 1, 4, 3, 5}).coefficient, 0.8, 1e-12);
}

TEST(Correlation, ConstantInputAndLengthErrors) {
  try {
    pearson({1, 1, 1}, {1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConstantInput);
  }
  EXPECT_THROW(spearman({1, 2, 3}, {1, 2}), Error);
  EXPECT_THROW(pearson({1, 2}, {1, 2}), Error);
}

TEST(Correlation, TiesShareMeanRank) {
  EXPECT_EQ(average_ranks({10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Correlation, TDistributionPValueAtLargeN) {
  std::vector<double> a(30), b(30);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = g(rng);
    b[i] = g(rng);
  }
  const auto r = pearson(a, b, PValueMethod::kTDistribution);
  EXPECT_FALSE(r.exact);
  const double t = std::abs(r.coefficient) * std::sqrt(28.0 / (1 - r.coefficient * r.coefficient));
  // Large-df t tail is close to the normal tail.
  EXPECT_NEAR(r.p_value, 2 * (1 - oracle::normal_cdf(t)), 0.02);
  EXPECT_TRUE(pearson(a, b).exact == false);
}

TEST(Correlation, SmallSamplesUseExactPermutationByDefault) {
  const auto r = spearman({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5});
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, oracle::permutation_pvalue({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 1e-12);
  EXPECT_FALSE(spearman({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}, PValueMethod::kTDistribution).exact);
  std::vector<double> big(13);
  std::iota(big.begin(), big.end(), 0.0);
  EXPECT_THROW(pearson(big, big, PValueMethod::kExactPermutation), Error);
}

TEST(Confusion, CountsAndAccuracy) {
  const auto c = confusion_matrix({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1});
  EXPECT_EQ(c, (ConfusionMatrix{2, 1, 1, 1}));
  EXPECT_EQ(c.total(), 5u);
  EXPECT_DOUBLE_EQ(accuracy({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1}), 0.6);
  EXPECT_THROW(confusion_matrix({1}, {1, 0}), Error);
}

TEST(ExactMatch, MeanOfPerInputMeans) {
  McqaResult a, b;
  a.exact_match_mean = 1.0;
  b.exact_match_mean = 0.25;
  EXPECT_DOUBLE_EQ(exact_match_mean({a, b}), 0.625);
}
