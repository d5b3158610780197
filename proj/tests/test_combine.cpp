#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>

#include "json.hpp"

#include "fdnc/combine.hpp"
#include "fdnc/io.hpp"
#include "fdnc/metrics.hpp"
#include "fdnc/rng.hpp"

using namespace fdnc;

namespace {

std::vector<ParamPoint> normal_points(std::size_t n, double mean, double sd, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(mean, sd);
  std::vector<ParamPoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({z(rng)});
  return out;
}

std::vector<Surrogate> shifted(std::span<const Surrogate> fs, double c) {
  std::vector<Surrogate> out;
  for (const auto& f : fs) out.emplace_back([f, c](std::span<const double> th) { return f(th) + c; });
  return out;
}

double log_npdf(double x, double m, double v) {
  return -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * (x - m) * (x - m) / v;
}

struct Toy {
  std::shared_ptr<GaussianMeanModel> model = std::make_shared<GaussianMeanModel>(1.0, 0.0, 10.0);
  Dataset data;
  std::vector<ShardSpec> shards;
};

Toy conjugate_toy(std::size_t N, std::size_t K, std::uint64_t seed) {
  Toy t;
  t.data = synthesize("gaussian_mean", N, {0.5}, seed);
  t.shards = shard_data(t.data, K, seed + 1, t.model);
  return t;
}

}  // namespace

TEST(MleSummary, HandExample) {
  const auto s = mle_summary_gaussian(Dataset::scalar({-1.0, 1.0}));
  EXPECT_DOUBLE_EQ(s.theta_hat[0], 0.0);
  EXPECT_DOUBLE_EQ(s.theta_hat[1], 1.0);
  EXPECT_NEAR(s.sigma_hat[0], 0.7071, 5e-5);
  EXPECT_NEAR(s.sigma_hat[1], 1.0, 1e-12);
}

TEST(MleSummary, ZeroVarianceIsAnError) {
  EXPECT_THROW(mle_summary_gaussian(Dataset::scalar({2.0, 2.0, 2.0})), CombineError);
}

TEST(MleSummary, StandardNormalDraws) {
  const auto data = synthesize("moon", 10'000, {}, 3);
  const auto s = mle_summary_gaussian(data);
  EXPECT_LT(std::abs(s.theta_hat[0]), 4.0 / 100.0);
  EXPECT_LT(std::abs(s.theta_hat[1] - 1.0), 4.0 / 100.0);
}

TEST(ChooseLambda, HandExamples) {
  const MleSummary full{{0.0}, {1.0}};
  const MleSummary a{{1.0}, {3.0}};
  const MleSummary b{{0.0}, {2.0}};
  const MleSummary shards[] = {a, b};
  const auto plan = choose_lambda(full, shards);
  EXPECT_EQ(plan.method, "mle_markov");
  EXPECT_DOUBLE_EQ(plan.lambdas[0], 1.0);
  EXPECT_DOUBLE_EQ(plan.lambdas[1], 1.0);
}

TEST(ChooseLambda, MinimumOverDimensions) {
  const MleSummary full{{0.0, 0.0}, {1.0, 1.0}};
  // With a centered shard delta is 2, so lambda_j = (sigma_k / 2)^2.
  const MleSummary sk{{0.0, 0.0}, {2.0 * std::sqrt(0.4), 2.0 * std::sqrt(0.9)}};
  const MleSummary shards[] = {sk};
  const auto plan = choose_lambda(full, shards);
  EXPECT_NEAR(plan.per_dim_lambdas[0][0], 0.4, 1e-12);
  EXPECT_NEAR(plan.per_dim_lambdas[0][1], 0.9, 1e-12);
  EXPECT_NEAR(plan.lambdas[0], 0.4, 1e-12);
}

TEST(ChooseLambda, ScaleEquivariant) {
  const MleSummary full{{0.3, 1.1}, {0.2, 0.5}};
  const MleSummary sk{{0.7, 0.4}, {0.9, 0.3}};
  const MleSummary shards[] = {sk};
  const double c = 7.5;
  const MleSummary full_c{{0.3 * c, 1.1 * c}, {0.2 * c, 0.5 * c}};
  const MleSummary sk_c{{0.7 * c, 0.4 * c}, {0.9 * c, 0.3 * c}};
  const MleSummary shards_c[] = {sk_c};
  EXPECT_NEAR(choose_lambda(full, shards).lambdas[0], choose_lambda(full_c, shards_c).lambdas[0], 1e-12);
}

TEST(ChooseLambda, RejectsNonPositiveSigma) {
  const MleSummary full{{0.0}, {0.0}};
  const MleSummary shards[] = {full};
  EXPECT_THROW(choose_lambda(full, shards), CombineError);
}

TEST(LambdaPlanFile, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "fdnc_test_combine" / "plan.json";
  LambdaPlan p{"mle_markov", {0.25, 1.0}, {{0.25, 3.0}, {std::numeric_limits<double>::infinity(), 1.0}}};
  write_lambda_plan(path, p);
  const auto q = read_lambda_plan(path);
  EXPECT_EQ(q.method, p.method);
  EXPECT_EQ(q.lambdas, p.lambdas);
  EXPECT_EQ(q.per_dim_lambdas, p.per_dim_lambdas);
}

TEST(RfIsWeights, SingleShardUnitLambdaIsUniform) {
  const auto pts = normal_points(200, 0.0, 1.0, 1);
  std::vector<Surrogate> fs{[](std::span<const double> th) { return -th[0] * th[0]; }};
  const auto w = rf_is_weights(pts, fs, 1.0, 0);
  for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0 / 200.0);
}

TEST(RfIsWeights, MatchClosedFormDensityRatio) {
  const Toy t = conjugate_toy(200, 2, 5);
  const auto fs = exact_surrogates(t.shards);
  const double lambda = 0.6;
  const auto pts = normal_points(300, 0.5, 0.2, 2);
  const auto w = rf_is_weights(pts, fs, lambda, 0);
  // Full posterior over the lambda-scaled shard-1 subposterior, both normalized Gaussians.
  const auto full = t.model->posterior(t.data);
  const auto sub = t.model->posterior(t.shards[0].data, 0.5);
  std::vector<double> lw;
  for (const auto& p : pts) {
    lw.push_back(log_npdf(p[0], full.mean, full.variance) - log_npdf(p[0], sub.mean, sub.variance / lambda));
  }
  const double mx = *std::max_element(lw.begin(), lw.end());
  double z = 0.0;
  for (double v : lw) z += std::exp(v - mx);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(w[i], std::exp(lw[i] - mx) / z, 1e-10);
}

TEST(RfIsWeights, ShiftInvariant) {
  const Toy t = conjugate_toy(100, 4, 6);
  const auto fs = exact_surrogates(t.shards);
  const auto gs = shifted(fs, 123.456);
  const auto pts = normal_points(500, 0.5, 0.3, 3);
  const auto a = rf_is_weights(pts, fs, 0.8, 2);
  const auto b = rf_is_weights(pts, gs, 0.8, 2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(RfIsWeights, NoOverlapIsAnError) {
  const std::vector<double> lw(4, kNegInf);
  try {
    normalize_log_weights(lw);
    FAIL();
  } catch (const CombineError& e) {
    EXPECT_STREQ(e.what(), "no overlap between shard and product surrogate");
  }
}

TEST(Truncate, HandExamples) {
  const std::vector<double> w{0.15, 0.5, 0.05, 0.3};
  const auto t = truncate_weights(w, 0.9);
  ASSERT_EQ(t.kept, 3u);
  EXPECT_EQ(t.order, (std::vector<std::size_t>{1, 3, 0}));
  EXPECT_NEAR(t.weights[0], 0.5 / 0.95, 1e-12);
  EXPECT_NEAR(t.weights[1], 0.3 / 0.95, 1e-12);
  EXPECT_NEAR(t.weights[2], 0.15 / 0.95, 1e-12);
  EXPECT_NEAR(t.weights[0], 0.5263, 5e-5);
  EXPECT_NEAR(t.weights[1], 0.3158, 5e-5);
  EXPECT_NEAR(t.weights[2], 0.1579, 5e-5);
  EXPECT_EQ(truncate_weights(w, 0.99).kept, 4u);
}

TEST(Truncate, FullMassKeepsEverything) {
  Rng rng(4);
  std::exponential_distribution<double> e;
  std::vector<double> w(1'000);
  for (auto& v : w) v = e(rng);
  double s = 0.0;
  for (double v : w) s += v;
  for (auto& v : w) v /= s;
  EXPECT_EQ(truncate_weights(w, 1.0).kept, w.size());
}

TEST(Truncate, MonotoneInP) {
  Rng rng(5);
  std::lognormal_distribution<double> ln(0.0, 2.0);
  std::vector<double> w(2'000);
  for (auto& v : w) v = ln(rng);
  double s = 0.0;
  for (double v : w) s += v;
  for (auto& v : w) v /= s;
  std::size_t prev = 0;
  for (double p = 0.05; p <= 1.0; p += 0.05) {
    const std::size_t k = truncate_weights(w, p).kept;
    EXPECT_GE(k, prev);
    prev = k;
  }
}

TEST(Ess, HandExamples) {
  EXPECT_DOUBLE_EQ(ess(std::vector<double>(8, 0.125)), 8.0);
  EXPECT_NEAR(ess(std::vector<double>{0.75, 0.25}), 1.6, 1e-12);
  std::vector<double> dom(50, 1e-15);
  dom[0] = 1.0 - 49e-15;
  EXPECT_NEAR(ess(dom), 1.0, 1e-9);
}

TEST(Ess, BoundedByKeptCount) {
  Rng rng(6);
  std::lognormal_distribution<double> ln(0.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> w(1 + rep % 37);
    for (auto& v : w) v = ln(rng);
    double s = 0.0;
    for (double v : w) s += v;
    for (auto& v : w) v /= s;
    const auto t = truncate_weights(w, 0.99);
    const double e = ess(t.weights);
    EXPECT_GE(e, 1.0 - 1e-12);
    EXPECT_LE(e, static_cast<double>(t.kept) + 1e-12);
  }
}

TEST(Pool, SingleShardIsIdentity) {
  WeightedAtoms a{{{1.0}, {2.0}, {3.0}}, {0.2, 0.3, 0.5}, {}, 2.0};
  const WeightedAtoms in[] = {a};
  const auto p = pool(in);
  EXPECT_EQ(p.atoms, a.atoms);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p.weights[i], a.weights[i], 1e-15);
}

TEST(Pool, EqualEssAveragesWeights) {
  WeightedAtoms a{{{1.0}, {2.0}}, {0.2, 0.8}, {}, 5.0};
  WeightedAtoms b{{{1.0}, {2.0}}, {0.6, 0.4}, {}, 5.0};
  const WeightedAtoms in[] = {a, b};
  const auto p = pool(in);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_NEAR(p.weights[0] + p.weights[2], 0.4, 1e-12);
  EXPECT_NEAR(p.weights[1] + p.weights[3], 0.6, 1e-12);
  EXPECT_EQ(p.source, (std::vector<std::size_t>{1, 1, 2, 2}));
}

TEST(Pool, ZeroEssShardDropsOut) {
  WeightedAtoms a{{{1.0}, {2.0}}, {0.5, 0.5}, {}, 100.0};
  WeightedAtoms b{{{9.0}}, {1.0}, {}, 0.0};
  const WeightedAtoms in[] = {a, b};
  const auto p = pool(in);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.weights, (std::vector<double>{0.5, 0.5}));
}

TEST(Pool, PermutationInvariant) {
  std::vector<WeightedAtoms> shards;
  for (std::size_t k = 0; k < 5; ++k) {
    WeightedAtoms w;
    w.atoms = normal_points(10 + k, static_cast<double>(k), 1.0, 20 + k);
    w.weights.assign(w.atoms.size(), 1.0 / static_cast<double>(w.atoms.size()));
    w.ess = 1.0 + static_cast<double>(k * k);
    w.source.assign(w.atoms.size(), k + 1);
    shards.push_back(w);
  }
  auto as_map = [](const WeightedAtoms& p) {
    std::map<double, double> m;
    for (std::size_t i = 0; i < p.size(); ++i) m[p.atoms[i][0]] += p.weights[i];
    return m;
  };
  const auto base = as_map(pool(shards));
  std::vector<WeightedAtoms> rev(shards.rbegin(), shards.rend());
  const auto other = as_map(pool(rev));
  ASSERT_EQ(base.size(), other.size());
  for (const auto& [x, w] : base) EXPECT_NEAR(other.at(x), w, 1e-15);
}

TEST(Resample, SingleAtom) {
  WeightedAtoms a{{{4.0, 2.0}}, {1.0}, {}, {}};
  const auto r = resample(a, 17, 3);
  ASSERT_EQ(r.size(), 17u);
  for (const auto& p : r) EXPECT_EQ(p, (ParamPoint{4.0, 2.0}));
}

TEST(Resample, UniformCountsWithinFourSigma) {
  const std::size_t m = 10, n = 100'000;
  WeightedAtoms a;
  for (std::size_t i = 0; i < m; ++i) a.atoms.push_back({static_cast<double>(i)});
  a.weights.assign(m, 0.1);
  std::vector<std::size_t> counts(m, 0);
  for (const auto& p : resample(a, n, 8)) ++counts[static_cast<std::size_t>(p[0])];
  const double sd = std::sqrt(n * 0.1 * 0.9);
  for (auto c : counts) EXPECT_LT(std::abs(static_cast<double>(c) - n * 0.1), 4 * sd);
  EXPECT_EQ(resample(a, 1'000, 8), resample(a, 1'000, 8));
}

TEST(RfIs, ShiftInvariantEndToEnd) {
  const Toy t = conjugate_toy(200, 4, 7);
  const auto fs = exact_surrogates(t.shards);
  const auto gs = shifted(fs, -50.0);
  std::vector<std::vector<ParamPoint>> samples;
  for (std::size_t k = 0; k < 4; ++k) samples.push_back(normal_points(400, 0.5, 0.15, 30 + k));
  const std::vector<double> lambdas(4, 1.0);
  const auto a = rf_is(samples, fs, lambdas, 0.99);
  const auto b = rf_is(samples, gs, lambdas, 0.99);
  ASSERT_EQ(a.pooled.size(), b.pooled.size());
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(a.per_shard[k].size(), b.per_shard[k].size());
    EXPECT_NEAR(*a.per_shard[k].ess, *b.per_shard[k].ess, 1e-9);
  }
  for (std::size_t i = 0; i < a.pooled.size(); ++i) {
    EXPECT_EQ(a.pooled.atoms[i], b.pooled.atoms[i]);
    EXPECT_NEAR(a.pooled.weights[i], b.pooled.weights[i], 1e-12);
  }
}

TEST(RfIs, SerialAndParallelAgree) {
  const Toy t = conjugate_toy(200, 4, 8);
  const auto fs = exact_surrogates(t.shards);
  std::vector<std::vector<ParamPoint>> samples;
  for (std::size_t k = 0; k < 4; ++k) samples.push_back(normal_points(1'000, 0.5, 0.2, 40 + k));
  const std::vector<double> lambdas{1.0, 0.5, 0.7, 1.0};
  const auto a = rf_is(samples, fs, lambdas, 0.999, Exec::serial);
  const auto b = rf_is(samples, fs, lambdas, 0.999, Exec::parallel);
  EXPECT_EQ(a.pooled.atoms, b.pooled.atoms);
  EXPECT_EQ(a.pooled.weights, b.pooled.weights);
}

TEST(RfIs, SingleAtomShardWarns) {
  std::vector<Surrogate> fs{[](std::span<const double> th) { return -50.0 * th[0] * th[0]; },
                            [](std::span<const double>) { return 0.0; }};
  std::vector<std::vector<ParamPoint>> samples{{{0.0}, {0.5}, {-0.5}}, {{0.0}, {3.0}, {4.0}}};
  const std::vector<double> lambdas{1.0, 1.0};
  const auto r = rf_is(samples, fs, lambdas, 0.99);
  EXPECT_EQ(r.per_shard[1].size(), 1u);
  EXPECT_DOUBLE_EQ(*r.per_shard[1].ess, 1.0);
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(RfIs, ExactSurrogatesRecoverConjugatePosterior) {
  const Toy t = conjugate_toy(1'000, 5, 9);
  const auto fs = exact_surrogates(t.shards);
  std::vector<std::vector<ParamPoint>> samples;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto sub = t.model->posterior(t.shards[k].data, 0.2);
    samples.push_back(normal_points(4'000, sub.mean, std::sqrt(sub.variance), 60 + k));
  }
  const auto r = rf_is(samples, fs, std::vector<double>(5, 1.0), 0.999);
  const auto m = weighted_moments(r.pooled.atoms, r.pooled.weights);
  const auto full = t.model->posterior(t.data);
  EXPECT_NEAR(m.mean[0], full.mean, 0.01);
  EXPECT_NEAR(m.variance[0] / full.variance, 1.0, 0.1);
}

TEST(RfMh, ConstantSurrogatesAcceptEverything) {
  std::vector<Surrogate> fs(3, [](std::span<const double>) { return 2.0; });
  MhConfig c;
  c.n_iters = 3'000;
  c.burn_in = 1'000;
  c.thin = 1;
  c.init = {0.0, 0.0};
  c.step_scale = {1.0, 1.0};
  EXPECT_EQ(rf_mh(fs, c).acceptance_rate, 1.0);
}

TEST(RfMh, ForestOnQuadraticRecoversGaussian) {
  const double sd = 0.5;
  TrainingSet s;
  s.d = 1;
  for (int i = 0; i <= 20'000; ++i) {
    const double x[] = {-4.0 + 8.0 * i / 20'000.0};
    s.add(x, -0.5 * x[0] * x[0] / (sd * sd));
  }
  const std::vector<Forest> forests{train_forest(s, {10, 1, 20'001, 3})};
  const auto fs = forest_surrogates(forests);
  MhConfig c;
  c.n_iters = 200'000;
  c.burn_in = 10'000;
  c.thin = 1;
  c.init = {0.0};
  c.step_scale = {1.2};
  c.seed = 4;
  const auto [lo, hi] = surrogate_box(forests);
  const auto out = rf_mh(fs, c, lo, hi);
  std::vector<double> xs;
  for (const auto& p : out.retained) xs.push_back(p[0]);
  const auto m = moments(out.retained);
  EXPECT_LT(std::abs(m.mean[0]), 3.0 * batch_means_se(xs));
  EXPECT_NEAR(m.variance[0], sd * sd, 0.1 * sd * sd);
}

TEST(RfMh, BoxKeepsChainInside) {
  std::vector<Surrogate> fs{[](std::span<const double>) { return 0.0; }};
  MhConfig c;
  c.n_iters = 5'000;
  c.burn_in = 0;
  c.thin = 1;
  c.init = {0.0};
  c.step_scale = {3.0};
  const std::vector<double> lo{-1.0}, hi{1.0};
  const auto out = rf_mh(fs, c, lo, hi);
  for (const auto& p : out.retained) {
    EXPECT_GE(p[0], -1.0);
    EXPECT_LE(p[0], 1.0);
  }
}

TEST(BestSurrogatePoint, ArgmaxOfSum) {
  std::vector<Surrogate> fs{[](std::span<const double> th) { return -(th[0] - 1) * (th[0] - 1); },
                            [](std::span<const double> th) { return -(th[0] - 2) * (th[0] - 2); }};
  std::vector<std::vector<ParamPoint>> samples{{{0.0}, {1.4}}, {{1.6}, {3.0}, {1.5}}};
  EXPECT_EQ(best_surrogate_point(samples, fs), (ParamPoint{1.5}));
}

TEST(OutputFiles, PooledAtomsAndEss) {
  const auto dir = std::filesystem::temp_directory_path() / "fdnc_test_combine";
  WeightedAtoms p{{{1.0, 2.0}, {3.0, -4.5}}, {0.25, 0.75}, {2, 1}, {}};
  write_pooled_atoms(dir / "pooled_atoms.csv", p, 2);
  const auto q = read_pooled_atoms(dir / "pooled_atoms.csv");
  EXPECT_EQ(q.atoms, p.atoms);
  EXPECT_EQ(q.weights, p.weights);
  EXPECT_EQ(q.source, p.source);
  EXPECT_EQ(read_csv(dir / "pooled_atoms.csv").header,
            (std::vector<std::string>{"theta_1", "theta_2", "weight", "source_shard"}));

  std::vector<WeightedAtoms> shards{{{{0.0}}, {1.0}, {}, 1.0}, {{{0.0}, {1.0}}, {0.5, 0.5}, {}, 2.0}};
  write_ess_report(dir / "ess.json", shards);
  const auto j = nlohmann::json::parse(read_text(dir / "ess.json"));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["k"], 2);
  EXPECT_EQ(j[1]["i_k"], 2);
  EXPECT_EQ(j[1]["ess"], 2.0);
}
