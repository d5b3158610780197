#ifndef FDNC_METRICS_HPP
#define FDNC_METRICS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "fdnc/model.hpp"

namespace fdnc {

/// Wasserstein-1 distance between the dimension-`dim` marginals of two empirical measures:
/// the mean absolute difference of matched order statistics. When sizes differ, the larger
/// sample is reduced to the smaller size by taking its order statistics at the matching
/// mid-quantiles.
double wasserstein1_marginal(std::span<const ParamPoint> a, std::span<const ParamPoint> b,
                             std::size_t dim);

/// Sum over dimensions of wasserstein1_marginal.
double wasserstein1_marginal_sum(std::span<const ParamPoint> a, std::span<const ParamPoint> b);

/// Fraction of samples within Euclidean `radius` of each center.
std::vector<double> mode_mass(std::span<const ParamPoint> samples,
                              std::span<const ParamPoint> centers, double radius);

struct MomentSummary {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance
};
MomentSummary moments(std::span<const ParamPoint> samples);

/// Weighted mean and variance of a discrete measure.
MomentSummary weighted_moments(std::span<const ParamPoint> atoms, std::span<const double> weights);

/// Batch-means standard error of the mean of a scalar series.
double batch_means_se(std::span<const double> series, std::size_t n_batches = 50);

}  // namespace fdnc

#endif
