// Pilot runs that pin the forest regression fixtures in tests/fixtures/forest_rmse.json.
// Seeds here are disjoint from the ones the unit tests use.
#include <cmath>
#include <cstdio>
#include <random>

#include "fdnc/forest.hpp"
#include "fdnc/rng.hpp"

using namespace fdnc;

namespace {

TrainingSet linear_set(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TrainingSet s;
  s.d = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const double p[] = {u(rng), u(rng)};
    s.add(p, 3.0 * p[0]);
  }
  return s;
}

double rmse(const Forest& f, const TrainingSet& test) {
  double ss = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double e = f.predict(test.point(i)) - test.y[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(test.size()));
}

}  // namespace

int main() {
  constexpr int kRuns = 20;
  double worst = 0.0, mean_small = 0.0, mean_large = 0.0;
  for (int r = 0; r < kRuns; ++r) {
    Rng rng = make_rng(1000 + r, "pilot");
    const TrainingSet train = linear_set(10'000, rng);
    const TrainingSet test = linear_set(2'000, rng);
    ForestParams p{10, 5, 10'000, derive_seed(1000 + r, "forest")};
    const double e = rmse(train_forest(train, p), test);
    worst = std::max(worst, e);
    ForestParams small{10, 5, 2'000, p.seed};
    ForestParams large{100, 5, 10'000, p.seed};
    mean_small += rmse(train_forest(train, small), test) / kRuns;
    mean_large += rmse(train_forest(train, large), test) / kRuns;
  }
  std::printf("{\n  \"linear_rmse_worst\": %.6f,\n  \"linear_rmse_threshold\": %.3f,\n", worst,
              std::ceil(worst * 1.25 * 1000.0) / 1000.0);
  std::printf("  \"mean_rmse_10_trees_2000_sub\": %.6f,\n  \"mean_rmse_100_trees_full\": %.6f\n}\n",
              mean_small, mean_large);
}
