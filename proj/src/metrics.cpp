#include "fdnc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdnc {

namespace {

std::vector<double> sorted_column(std::span<const ParamPoint> s, std::size_t dim) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& p : s) v.push_back(p.at(dim));
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double wasserstein1_marginal(std::span<const ParamPoint> a, std::span<const ParamPoint> b,
                             std::size_t dim) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1_marginal: empty sample");
  auto x = sorted_column(a, dim);
  auto y = sorted_column(b, dim);
  if (x.size() < y.size()) std::swap(x, y);
  // x is the larger (or equal) sample.
  const std::size_t n = y.size();
  const double ratio = static_cast<double>(x.size()) / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto pos = static_cast<std::size_t>((static_cast<double>(i) + 0.5) * ratio);
    pos = std::min(pos, x.size() - 1);
    total += std::abs(x[pos] - y[i]);
  }
  return total / static_cast<double>(n);
}

double wasserstein1_marginal_sum(std::span<const ParamPoint> a, std::span<const ParamPoint> b) {
  if (a.empty()) throw std::invalid_argument("wasserstein1_marginal_sum: empty sample");
  double s = 0.0;
  for (std::size_t j = 0; j < a.front().size(); ++j) s += wasserstein1_marginal(a, b, j);
  return s;
}

std::vector<double> mode_mass(std::span<const ParamPoint> samples,
                              std::span<const ParamPoint> centers, double radius) {
  std::vector<double> out(centers.size(), 0.0);
  if (samples.empty()) return out;
  const double r2 = radius * radius;
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        const double z = s[j] - centers[c][j];
        d2 += z * z;
      }
      if (d2 <= r2) out[c] += 1.0;
    }
  }
  for (double& v : out) v /= static_cast<double>(samples.size());
  return out;
}

MomentSummary moments(std::span<const ParamPoint> samples) {
  std::vector<double> w(samples.size(), 1.0 / static_cast<double>(samples.size()));
  return weighted_moments(samples, w);
}

MomentSummary weighted_moments(std::span<const ParamPoint> atoms, std::span<const double> weights) {
  if (atoms.empty()) throw std::invalid_argument("moments of an empty sample");
  const std::size_t d = atoms.front().size();
  MomentSummary m{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    total += weights[i];
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += weights[i] * atoms[i][j];
  }
  for (double& v : m.mean) v /= total;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double z = atoms[i][j] - m.mean[j];
      m.variance[j] += weights[i] * z * z;
    }
  }
  for (double& v : m.variance) v /= total;
  return m;
}

double batch_means_se(std::span<const double> series, std::size_t n_batches) {
  const std::size_t b = series.size() / n_batches;
  if (b == 0) throw std::invalid_argument("batch_means_se: series shorter than the batch count");
  std::vector<double> means(n_batches, 0.0);
  for (std::size_t i = 0; i < n_batches; ++i) {
    for (std::size_t t = 0; t < b; ++t) means[i] += series[i * b + t];
    means[i] /= static_cast<double>(b);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(n_batches);
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= static_cast<double>(n_batches - 1);
  return std::sqrt(var / static_cast<double>(n_batches));
}

}  // namespace fdnc
