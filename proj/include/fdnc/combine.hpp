#ifndef FDNC_COMBINE_HPP
#define FDNC_COMBINE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fdnc/forest.hpp"
#include "fdnc/model.hpp"
#include "fdnc/parallel.hpp"
#include "fdnc/sampler.hpp"

namespace fdnc {

class CombineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An estimate of one shard's log_gamma. Must be safe to call concurrently.
using Surrogate = std::function<double(std::span<const double>)>;

/// Wraps forests as surrogates. The forests must outlive the returned callables.
std::vector<Surrogate> forest_surrogates(std::span<const Forest> forests);

/// The exact log_gamma of each shard, for oracle comparisons. The shards must outlive the
/// returned callables.
std::vector<Surrogate> exact_surrogates(std::span<const ShardSpec> shards);

// Scale factors

struct MleSummary {
  ParamPoint theta_hat;
  std::vector<double> sigma_hat;
};

/// Gaussian (mu, sigma^2) maximum-likelihood estimate and its asymptotic standard errors:
/// theta_hat = (mean, biased variance), sigma_hat = (sqrt(var / N), sqrt(2 var^2 / N)).
MleSummary mle_summary_gaussian(const Dataset& data);

struct LambdaPlan {
  std::string method;  // "fixed" or "mle_markov"
  std::vector<double> lambdas;
  std::vector<std::vector<double>> per_dim_lambdas;  // empty for "fixed"
};

LambdaPlan fixed_lambda_plan(std::size_t K, double lambda = 1.0);

/// Per shard and dimension, delta = max(|theta_k - theta - 2 sigma|, |theta_k - theta + 2 sigma|)
/// and lambda_{k,j} = (delta / sigma_k)^-2; lambda_k is the minimum over dimensions. A zero
/// delta contributes +inf to that minimum, and a shard with no finite entry gets lambda 1.
LambdaPlan choose_lambda(const MleSummary& full, std::span<const MleSummary> shards);

void write_lambda_plan(const std::filesystem::path& path, const LambdaPlan& plan);
LambdaPlan read_lambda_plan(const std::filesystem::path& path);

// Weighted measures

/// Discrete measure with normalized weights.
struct WeightedAtoms {
  std::vector<ParamPoint> atoms;
  std::vector<double> weights;
  std::vector<std::size_t> source;  // originating shard (1-based) per atom; may be empty
  std::optional<double> ess;

  std::size_t size() const noexcept { return atoms.size(); }
};

/// Unnormalized log importance weights sum_j f_j(theta) - lambda_k f_k(theta) for samples
/// drawn from shard k (0-based index into `surrogates`).
std::vector<double> rf_is_log_weights(std::span<const ParamPoint> samples,
                                      std::span<const Surrogate> surrogates, double lambda_k,
                                      std::size_t k, Exec exec = Exec::parallel);

/// Normalizes log-weights with max subtraction; the sum runs in index order.
/// Throws CombineError when every log-weight is -inf.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

/// rf_is_log_weights followed by normalize_log_weights.
std::vector<double> rf_is_weights(std::span<const ParamPoint> samples,
                                  std::span<const Surrogate> surrogates, double lambda_k,
                                  std::size_t k, Exec exec = Exec::parallel);

struct Truncation {
  std::size_t kept = 0;              // i_k
  std::vector<std::size_t> order;    // kept original indices, heaviest first
  std::vector<double> weights;       // kept weights renormalized over the prefix
};

/// Sorts weights descending (ties by index) and keeps the shortest prefix whose cumulative
/// mass reaches p. If rounding keeps the total below p, every atom is kept.
Truncation truncate_weights(std::span<const double> weights, double p);

/// i / (1 + V), V the population variance of {i * w_1, ..., i * w_i}.
double ess(std::span<const double> normalized_weights);
double ess(const WeightedAtoms& atoms);

/// Mixes shard measures with weights proportional to ESS_k * w.
WeightedAtoms pool(std::span<const WeightedAtoms> per_shard);

/// Multinomial resampling by inverse CDF.
std::vector<ParamPoint> resample(const WeightedAtoms& pooled, std::size_t n, std::uint64_t seed);

struct RfIsResult {
  std::vector<WeightedAtoms> per_shard;  // truncated, with ess set
  WeightedAtoms pooled;
  std::vector<std::string> warnings;
};

/// Weights, truncates and pools the thinned shard samples.
RfIsResult rf_is(std::span<const std::vector<ParamPoint>> shard_samples,
                 std::span<const Surrogate> surrogates, std::span<const double> lambdas, double p,
                 Exec exec = Exec::parallel);

/// The shard sample with the largest sum of surrogates.
ParamPoint best_surrogate_point(std::span<const std::vector<ParamPoint>> shard_samples,
                                std::span<const Surrogate> surrogates,
                                Exec exec = Exec::parallel);

/// Metropolis-Hastings on the surrogate product, log target sum_k f_k(theta). When a box is
/// given the target is -inf outside it; surrogates are flat beyond their training data, so an
/// unbounded walk can drift away on that plateau.
ChainOutput rf_mh(std::span<const Surrogate> surrogates, const MhConfig& cfg,
                  std::span<const double> box_lo = {}, std::span<const double> box_hi = {});

/// Intersection of the forests' training boxes, or their union when the intersection is empty.
std::pair<std::vector<double>, std::vector<double>> surrogate_box(std::span<const Forest> forests);

void write_pooled_atoms(const std::filesystem::path& path, const WeightedAtoms& pooled,
                        std::size_t d);
WeightedAtoms read_pooled_atoms(const std::filesystem::path& path);

void write_ess_report(const std::filesystem::path& path, std::span<const WeightedAtoms> per_shard);

}  // namespace fdnc

#endif
