#include <gtest/gtest.h>

#include <cmath>

#include "fdnc/metrics.hpp"
#include "fdnc/rng.hpp"

using namespace fdnc;

namespace {

std::vector<ParamPoint> draws(std::size_t n, double mean, double sd, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(mean, sd);
  std::vector<ParamPoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({z(rng), z(rng)});
  return out;
}

}  // namespace

TEST(Wasserstein, IdenticalIsZero) {
  const auto a = draws(1'000, 0.0, 1.0, 1);
  EXPECT_EQ(wasserstein1_marginal(a, a, 0), 0.0);
  EXPECT_EQ(wasserstein1_marginal_sum(a, a), 0.0);
}

TEST(Wasserstein, ShiftGivesOffset) {
  const auto a = draws(777, 0.0, 1.0, 2);
  auto b = a;
  for (auto& p : b) p[1] -= 2.5;
  EXPECT_NEAR(wasserstein1_marginal(a, b, 1), 2.5, 1e-12);
  EXPECT_NEAR(wasserstein1_marginal(a, b, 0), 0.0, 1e-15);
}

TEST(Wasserstein, GaussianMeanGap) {
  const auto a = draws(100'000, 0.0, 1.0, 3);
  const auto b = draws(100'000, 1.0, 1.0, 4);
  EXPECT_NEAR(wasserstein1_marginal(a, b, 0), 1.0, 0.02);
}

TEST(Wasserstein, UnequalSizes) {
  const auto a = draws(3'000, 0.0, 1.0, 5);
  const auto b = draws(40'000, 0.5, 1.0, 6);
  EXPECT_NEAR(wasserstein1_marginal(a, b, 0), 0.5, 0.06);
  EXPECT_EQ(wasserstein1_marginal(a, b, 0), wasserstein1_marginal(b, a, 0));
}

TEST(Wasserstein, SymmetricAndTriangle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = draws(500, 0.0, 1.0, 100 + s);
    const auto b = draws(500, 0.3 * s, 2.0, 200 + s);
    const auto c = draws(500, -0.1 * s, 0.5, 300 + s);
    const double ab = wasserstein1_marginal(a, b, 0);
    EXPECT_EQ(ab, wasserstein1_marginal(b, a, 0));
    EXPECT_LE(wasserstein1_marginal(a, c, 0), ab + wasserstein1_marginal(b, c, 0) + 1e-12);
  }
}

TEST(ModeMass, Examples) {
  const std::vector<ParamPoint> centers{{0.0, 1.0}, {1.0, -1.0}};
  const std::vector<ParamPoint> at_first(10, ParamPoint{0.0, 1.0});
  EXPECT_EQ(mode_mass(at_first, centers, 0.75), (std::vector<double>{1.0, 0.0}));
  const std::vector<ParamPoint> split{{0.0, 1.0}, {1.0, -1.0}, {0.1, 1.1}, {0.9, -0.8}};
  EXPECT_EQ(mode_mass(split, centers, 0.75), (std::vector<double>{0.5, 0.5}));
}

TEST(Moments, WeightedAgreesWithExpandedSample) {
  const std::vector<ParamPoint> atoms{{1.0}, {2.0}, {4.0}};
  const std::vector<double> w{0.25, 0.5, 0.25};
  const std::vector<ParamPoint> expanded{{1.0}, {2.0}, {2.0}, {4.0}};
  const auto a = weighted_moments(atoms, w);
  const auto b = moments(expanded);
  EXPECT_NEAR(a.mean[0], b.mean[0], 1e-12);
  EXPECT_NEAR(a.variance[0], b.variance[0], 1e-12);
}

TEST(BatchMeans, IidSeriesMatchesNaiveSe) {
  Rng rng(7);
  std::normal_distribution<double> z;
  std::vector<double> xs(100'000);
  for (auto& x : xs) x = z(rng);
  EXPECT_NEAR(batch_means_se(xs), 1.0 / std::sqrt(100'000.0), 0.3 / std::sqrt(100'000.0));
}
