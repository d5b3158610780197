#ifndef FDNC_BASELINES_HPP
#define FDNC_BASELINES_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fdnc/model.hpp"
#include "fdnc/parallel.hpp"
#include "fdnc/rng.hpp"

namespace fdnc {

class BaselineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// K aligned shard chains of equal length, all sampled with lambda = 1.
using SubchainSet = std::vector<std::vector<ParamPoint>>;

/// Consensus Monte Carlo: draw t is (sum_k W_k)^-1 sum_k W_k theta_t^k with W_k the inverse
/// sample covariance of shard k. Throws BaselineError naming the shard when a covariance is
/// singular.
std::vector<ParamPoint> consensus_combine(const SubchainSet& chains, Exec exec = Exec::parallel);

/// h_j = T^(-1/(d+4)) * sigma_j with sigma_j the sample standard deviation of dimension j,
/// averaged over shards.
std::vector<double> silverman_bandwidth(const SubchainSet& chains);

/// Metropolis-within-Gibbs over the kernel-index vector (t_1..t_K) of a product of per-shard
/// Gaussian KDEs. The stationary distribution of the indices is proportional to
/// prod_k N(theta_{t_k}^k; mean of selected centers, h^2).
class KdeProductSampler {
 public:
  KdeProductSampler(const SubchainSet& chains, std::vector<double> bandwidth, std::uint64_t seed);

  /// One Metropolis update per shard index, in shard order.
  void sweep();

  const std::vector<std::size_t>& indices() const noexcept { return idx_; }

  /// Draw from N(mean of selected centers, diag(h^2 / K)).
  ParamPoint draw();

  /// Unnormalized log weight of an index vector.
  double log_weight(std::span<const std::size_t> idx) const;

 private:
  double log_weight_of_sum(std::span<const std::size_t> idx, std::span<const double> sum) const;

  const SubchainSet& chains_;
  std::vector<double> bandwidth_;
  std::size_t K_;
  std::size_t T_;
  std::size_t d_;
  Rng rng_;
  std::vector<std::size_t> idx_;
  std::vector<double> sum_;
  double cur_log_w_;
};

/// n_out draws, each preceded by n_gibbs_sweeps sweeps, after burn_sweeps initial sweeps.
std::vector<ParamPoint> kde_product_sample(const SubchainSet& chains,
                                           const std::vector<double>& bandwidth,
                                           std::size_t n_out, std::size_t n_gibbs_sweeps,
                                           std::uint64_t seed, std::size_t burn_sweeps = 0);

}  // namespace fdnc

#endif
