#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "json.hpp"

#include "fdnc/experiment.hpp"
#include "fdnc/io.hpp"
#include "fdnc/metrics.hpp"

using namespace fdnc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(const std::string& name, const fs::path& out, std::uint64_t seed = 3) {
  ExperimentConfig c = make_experiment(name, 4, seed);
  c.N = name == "misspec" ? 2'000 : 200;
  c.n_iters = 6'000;
  c.burn_in = 1'000;
  c.thin = 5;
  c.subsample_size = 2'000;
  c.n_resample = 1'000;
  c.rfmh_iters = 4'000;
  c.rfmh_burn_in = 1'000;
  c.nonpara_burn_sweeps = 10;
  c.oracle_iters = 12'000;
  c.oracle_burn_in = 2'000;
  c.out_dir = out.string();
  return c;
}

fs::path tmp(const std::string& name) {
  const auto p = fs::temp_directory_path() / "fdnc_test_experiment" / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, TextRoundTrip) {
  for (const char* name : {"bimodal", "moon", "misspec", "gaussian_mean"}) {
    const auto c = make_experiment(name, 10, 7, true);
    const auto text = config_to_text(c);
    EXPECT_EQ(config_to_text(config_from_text(text)), text) << name;
  }
}

TEST(Config, OverridesAndErrors) {
  const auto base = make_experiment("moon", 10, 1);
  const auto c = config_from_text("# comment\nK = 20\nstep_scale = 0.1, 0.2\noracle_inits = 1,2;3,4\n", base);
  EXPECT_EQ(c.K, 20u);
  EXPECT_EQ(c.step_scale, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(c.oracle_inits, (std::vector<ParamPoint>{{1, 2}, {3, 4}}));
  EXPECT_EQ(c.model, "moon");
  EXPECT_THROW(config_from_text("nonsense = 1\n"), IoError);
  EXPECT_THROW(config_from_text("K = -3\n"), IoError);
  EXPECT_THROW(config_from_text("just text\n"), IoError);
}

TEST(Config, PaperDefaults) {
  const auto b = make_experiment("bimodal", 10, 1);
  EXPECT_EQ(b.N, 200u);
  EXPECT_EQ(b.true_theta, (ParamPoint{0.0, 1.0}));
  EXPECT_EQ(b.lambda_value, 1.0);
  const auto m = make_experiment("moon", 20, 1);
  EXPECT_EQ(m.N, 1'000u);
  const auto s = make_experiment("misspec", 10, 1, true);
  EXPECT_EQ(s.N, 10'000u);
  EXPECT_EQ(s.lambda_method, "mle_markov");
  EXPECT_EQ(s.n_iters, 500'000u);
  EXPECT_EQ(s.burn_in, 100'000u);
  EXPECT_EQ(s.thin, 10u);
  EXPECT_EQ(make_experiment("bimodal", 10, 1, true).thin, 100u);
  EXPECT_EQ(make_experiment("bimodal", 10, 1, true).subsample_size, 50'000u);
  EXPECT_THROW(make_experiment("other", 10, 1), std::invalid_argument);
}

TEST(Run, StageLabelledFailure) {
  auto c = small("bimodal", tmp("bad"));
  c.K = 7;
  try {
    run_experiment(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  c = small("bimodal", tmp("bad_init"));
  c.init = {0.5};
  EXPECT_THROW(run_experiment(c), StageError);
}

TEST(Run, EmitsEveryArtifact) {
  const auto out = tmp("bimodal");
  const auto res = run_experiment(small("bimodal", out));
  for (const char* f : {"samples_rfis.csv", "samples_rfmh.csv", "samples_cmc.csv", "samples_nonpara.csv",
                        "samples_oracle.csv", "timing.json", "timing.txt", "metrics.json", "lambda_plan.json",
                        "pooled_atoms.csv", "rfmh_chain.csv", "ess.json", "config.txt", "data.txt", "data.json",
                        "chain_k1.csv", "chain_k4.csv", "trace_k1.csv", "trace_k4.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  // Every sample file re-reads with the recorded dimension.
  for (const auto& m : {"rfis", "rfmh", "cmc", "nonpara", "oracle"}) {
    const auto s = read_chain_csv(out / (std::string("samples_") + m + ".csv"));
    ASSERT_FALSE(s.empty());
    EXPECT_EQ(s.front().size(), 2u);
    EXPECT_EQ(s, res.samples.at(m));
  }
  const auto j = nlohmann::json::parse(read_text(out / "metrics.json"));
  for (const auto& m : method_names()) {
    for (double w : j["methods"][m]["w1_marginal"]) EXPECT_GE(w, 0.0);
    for (double mm : j["methods"][m]["mode_mass"]) {
      EXPECT_GE(mm, 0.0);
      EXPECT_LE(mm, 1.0);
    }
  }
  const auto t = timing_from_json(read_text(out / "timing.json"));
  EXPECT_FALSE(t.methods.at("cmc")[Stage::training].has_value());
  for (const auto& [name, mt] : t.methods) {
    double s = 0.0;
    for (Stage st : kStages) s += mt[st].value_or(0.0);
    EXPECT_NEAR(mt.total(), s, 0.1);
  }
}

TEST(Run, ByteIdenticalAndScheduleIndependent) {
  const auto a = tmp("det_a"), b = tmp("det_b");
  run_experiment(small("moon", a), Exec::parallel);
  run_experiment(small("moon", b), Exec::serial);
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename().string();
    if (name == "config.txt" || name.rfind("timing", 0) == 0) continue;
    EXPECT_EQ(read_text(e.path()), read_text(b / name)) << name;
  }
}

TEST(Run, MisspecUsesChosenLambdas) {
  const auto out = tmp("misspec");
  const auto res = run_experiment(small("misspec", out));
  EXPECT_EQ(res.lambda_plan.method, "mle_markov");
  ASSERT_EQ(res.lambda_plan.lambdas.size(), 4u);
  EXPECT_TRUE(fs::exists(out / "chain_unit_k1.csv"));
  const auto plan = read_lambda_plan(out / "lambda_plan.json");
  EXPECT_EQ(plan.lambdas, res.lambda_plan.lambdas);
}

TEST(Metrics, RecomputeMatchesRun) {
  const auto out = tmp("recompute");
  run_experiment(small("bimodal", out, 5));
  const std::string original = read_text(out / "metrics.json");
  EXPECT_EQ(recompute_metrics(out), original);
}

TEST(Oracle, ConjugateMoments) {
  auto c = make_experiment("gaussian_mean", 1, 2);
  c.oracle_iters = 200'000;
  c.oracle_burn_in = 10'000;
  c.oracle_thin = 10;
  GaussianMeanModel model(1.0, 0.0, 10.0);
  const Dataset data = synthesize("gaussian_mean", 1'000, {0.5}, 4);
  const auto s = oracle_full_mcmc(c, data, model);
  const auto post = model.posterior(data);
  std::vector<double> xs;
  for (const auto& p : s) xs.push_back(p[0]);
  const auto m = moments(s);
  EXPECT_LT(std::abs(m.mean[0] - post.mean), 3 * batch_means_se(xs));
  EXPECT_NEAR(m.variance[0] / post.variance, 1.0, 0.1);
}

TEST(Oracle, NoDataSamplesThePrior) {
  auto c = make_experiment("gaussian_mean", 1, 3);
  c.init = {0.0};
  c.step_scale = {25.0};
  c.oracle_iters = 200'000;
  c.oracle_burn_in = 10'000;
  c.oracle_thin = 10;
  GaussianMeanModel model(1.0, 0.0, 10.0);
  const auto s = oracle_full_mcmc(c, Dataset::scalar({}), model);
  std::vector<double> xs;
  for (const auto& p : s) xs.push_back(p[0]);
  const auto m = moments(s);
  EXPECT_LT(std::abs(m.mean[0]), 3 * batch_means_se(xs));
  EXPECT_NEAR(m.variance[0] / 100.0, 1.0, 0.1);
}

TEST(OutOfBox, CountsQueries) {
  const std::vector<std::vector<ParamPoint>> samples{{{0.5}, {2.0}}, {{-1.0}}};
  const std::vector<std::vector<double>> lo{{0.0}, {-2.0}}, hi{{1.0}, {1.0}};
  // Six (sample, box) pairs; outside: 2.0 in both boxes, -1.0 in the first.
  EXPECT_DOUBLE_EQ(out_of_box_fraction(samples, lo, hi), 3.0 / 6.0);
}
