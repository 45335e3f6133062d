#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bnp_dcgx/random.hpp"

using namespace dcgx;

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a = make_stream(7, 0);
  Rng b = make_stream(7, 0);
  Rng c = make_stream(7, 1);
  Rng d = make_stream(8, 0);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}

TEST(Random, UniformOpenNeverHitsEndpoints) {
  Rng rng = make_stream(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform_open(rng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, LogSumExpMatchesDirectSum) {
  const std::vector<double> v{-1.0, 0.5, 2.0};
  const double direct = std::log(std::exp(-1.0) + std::exp(0.5) + std::exp(2.0));
  EXPECT_NEAR(log_sum_exp(v), direct, 1e-14);
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Random, NormalizeLogWeightsSumsToOne) {
  const std::vector<double> v{-800.0, -801.0, -802.0};
  const auto p = normalize_log_weights(v);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
  EXPECT_NEAR(p[0] / p[1], std::exp(1.0), 1e-12);
}

TEST(Random, CategoricalFrequencies) {
  Rng rng = make_stream(3, 0);
  const std::vector<double> probs{0.2, 0.5, 0.3};
  std::vector<int> counts(3, 0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++counts[sample_categorical(rng, probs)];
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(counts[k] / static_cast<double>(draws), probs[k], 0.005);
}

TEST(Random, GammaAndInverseGammaMeans) {
  Rng rng = make_stream(4, 0);
  const int draws = 200000;
  double g = 0.0, ig = 0.0, small = 0.0;
  for (int i = 0; i < draws; ++i) {
    g += gamma_variate(rng, 3.0, 2.0);
    ig += inv_gamma_variate(rng, 4.0, 3.0);
    small += gamma_variate(rng, 0.3, 1.0);
  }
  EXPECT_NEAR(g / draws, 1.5, 0.01);
  EXPECT_NEAR(ig / draws, 1.0, 0.01);
  EXPECT_NEAR(small / draws, 0.3, 0.005);
}

TEST(Random, TinyShapeStaysFinite) {
  Rng rng = make_stream(5, 0);
  for (int i = 0; i < 1000; ++i) {
    const double lg = log_gamma_variate(rng, 1e-3);
    ASSERT_TRUE(std::isfinite(lg));
    const double ig = inv_gamma_variate(rng, 0.01, 0.01);
    ASSERT_TRUE(std::isfinite(ig));
    ASSERT_GT(ig, 0.0);
  }
}

TEST(Random, BetaMeanAndRange) {
  Rng rng = make_stream(6, 0);
  const int draws = 200000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double b = beta_variate(rng, 3.0, 1.0);
    ASSERT_GT(b, 0.0);
    ASSERT_LT(b, 1.0);
    sum += b;
  }
  EXPECT_NEAR(sum / draws, 0.75, 0.005);
}
