// Serial reference versus OpenMP kernels, plus forest predict cost against training size.
#include <chrono>
#include <cstdio>
#include <functional>

#include "fdnc/baselines.hpp"
#include "fdnc/combine.hpp"
#include "fdnc/experiment.hpp"
#include "fdnc/forest.hpp"
#include "fdnc/parallel.hpp"
#include "predict_cost.hpp"

using namespace fdnc;

namespace {

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* name, const std::function<void(Exec)>& f) {
  const double s = seconds([&] { f(Exec::serial); });
  const double p = seconds([&] { f(Exec::parallel); });
  std::printf("%-22s %10.4f %10.4f %8.2fx\n", name, s, p, s / p);
}

}  // namespace

int main() {
  std::printf("threads: %d\n\n", max_threads());
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial s", "openmp s", "speedup");

  const auto cfg = make_experiment("bimodal", 10, 1);
  const auto model = make_model(cfg.model);
  const Dataset data = synthesize(cfg.data_generator, cfg.N, cfg.true_theta, 1);
  const auto shards = shard_data(data, cfg.K, 2, model);
  std::vector<MhConfig> mh(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    mh[k].n_iters = 20'000;
    mh[k].burn_in = 4'000;
    mh[k].thin = 10;
    mh[k].init = cfg.init;
    mh[k].step_scale = cfg.step_scale;
    mh[k].seed = derive_seed(1, "chain", k + 1);
  }
  std::vector<ChainOutput> chains;
  row("shard chains", [&](Exec e) { chains = sample_shards(shards, mh, e); });

  std::vector<Forest> forests(shards.size());
  row("forest training", [&](Exec e) {
    for (std::size_t k = 0; k < shards.size(); ++k) {
      forests[k] = train_forest(TrainingSet::from_trace(chains[k].trace), {10, 5, 10'000, k}, e);
    }
  });

  std::vector<double> queries;
  for (const auto& c : chains) {
    for (const auto& t : c.trace) queries.insert(queries.end(), t.theta.begin(), t.theta.end());
  }
  row("predict_many", [&](Exec e) { predict_many(forests[0], queries, e); });

  const auto surrogates = forest_surrogates(forests);
  std::vector<std::vector<ParamPoint>> samples;
  SubchainSet subchains;
  for (const auto& c : chains) {
    samples.push_back(c.retained);
    subchains.push_back(c.retained);
  }
  const std::vector<double> lambdas(shards.size(), 1.0);
  row("rf_is weighting", [&](Exec e) { rf_is(samples, surrogates, lambdas, 0.999, e); });
  row("consensus combine", [&](Exec e) { consensus_combine(subchains, e); });

  std::printf("\npredict cost (10 trees, min_leaf 5)\n");
  const double t1 = bench::predict_ns(10'000);
  const double t4 = bench::predict_ns(40'000);
  std::printf("  M = 10000: %8.1f ns/query\n  M = 40000: %8.1f ns/query\n  ratio:     %8.3f\n", t1, t4,
              t4 / t1);
  if (t4 / t1 >= 2.5) std::printf("  WARNING: predict cost grew by 2.5x or more\n");
  return 0;
}
