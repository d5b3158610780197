// Mean forest predict time as a function of training-set size.
#ifndef FDNC_BENCH_PREDICT_COST_HPP
#define FDNC_BENCH_PREDICT_COST_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "fdnc/forest.hpp"
#include "fdnc/rng.hpp"

namespace fdnc::bench {

inline double bumpy_log_density(double a, double b) {
  return std::log(0.5 * std::exp(-0.5 * (a * a + (b - 1) * (b - 1))) +
                  0.5 * std::exp(-0.5 * ((a - 1) * (a - 1) + (b + 1) * (b + 1))) + 1e-300);
}

/// Nanoseconds per predict call for a 10-tree forest trained on M points, best of `reps`.
inline double predict_ns(std::size_t M, std::size_t n_queries = 200'000, int reps = 5) {
  Rng rng = make_rng(7, "predict_cost", M);
  std::normal_distribution<double> z(0.5, 1.2);
  TrainingSet train;
  train.d = 2;
  for (std::size_t i = 0; i < M; ++i) {
    const double p[] = {z(rng), z(rng)};
    train.add(p, bumpy_log_density(p[0], p[1]));
  }
  const Forest f = train_forest(train, {10, 5, M, 11}, Exec::serial);
  std::vector<double> q(2 * n_queries);
  for (auto& v : q) v = z(rng);
  double best = 1e300;
  volatile double sink = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    double acc = 0.0;
    for (std::size_t i = 0; i < n_queries; ++i) acc += f.predict({q.data() + 2 * i, 2});
    const auto t1 = std::chrono::steady_clock::now();
    sink = sink + acc;
    best = std::min(best, std::chrono::duration<double, std::nano>(t1 - t0).count() / n_queries);
  }
  return best;
}

}  // namespace fdnc::bench

#endif
