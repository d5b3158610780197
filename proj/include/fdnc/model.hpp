#ifndef FDNC_MODEL_HPP
#define FDNC_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdnc/rng.hpp"

namespace fdnc {

/// A point in parameter space.
using ParamPoint = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observations stored row-major; every observation has `dim` entries.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<double> values, std::size_t dim);

  static Dataset scalar(std::vector<double> values) { return Dataset(std::move(values), 1); }

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const double> values() const noexcept { return values_; }

  /// Rows in the order given by `indices`.
  Dataset select(std::span<const std::size_t> indices) const;

 private:
  std::vector<double> values_;
  std::size_t dim_ = 1;
};

/// The second parameter of the N(., 2) components in the mixture and moon models.
enum class VarianceConvention { variance, stddev };

VarianceConvention parse_variance_convention(const std::string& s);
std::string to_string(VarianceConvention c);

/// Observation model with an unnormalized log-prior. Implementations are immutable.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual bool in_support(std::span<const double> theta) const = 0;
  /// log pi_0 on the support, unnormalized. Callers check the support first.
  virtual double log_prior(std::span<const double> theta) const = 0;
  virtual double log_lik(std::span<const double> x, std::span<const double> theta) const = 0;

  /// Sum of log-likelihood terms over every observation in `data`.
  virtual double log_lik_sum(const Dataset& data, std::span<const double> theta) const;
};

/// X ~ 1/2 N(theta_1, s) + 1/2 N(theta_1 + theta_2, s), flat prior on R^2.
class BimodalMixtureModel final : public Model {
 public:
  explicit BimodalMixtureModel(VarianceConvention conv = VarianceConvention::variance);
  std::string name() const override { return "bimodal"; }
  std::size_t dim() const override { return 2; }
  bool in_support(std::span<const double> theta) const override;
  double log_prior(std::span<const double>) const override { return 0.0; }
  double log_lik(std::span<const double> x, std::span<const double> theta) const override;
  double variance() const noexcept { return var_; }

 private:
  double var_;
};

/// X ~ N(sqrt(theta_1) + sqrt(theta_2), s) with theta in [0, inf)^2 and a flat prior there.
class MoonModel final : public Model {
 public:
  explicit MoonModel(VarianceConvention conv = VarianceConvention::variance);
  std::string name() const override { return "moon"; }
  std::size_t dim() const override { return 2; }
  bool in_support(std::span<const double> theta) const override;
  double log_prior(std::span<const double>) const override { return 0.0; }
  double log_lik(std::span<const double> x, std::span<const double> theta) const override;
  double variance() const noexcept { return var_; }

 private:
  double var_;
};

/// X ~ N(mu, sigma^2), theta = (mu, sigma^2), flat prior on R x (0, inf).
class GaussianModel final : public Model {
 public:
  std::string name() const override { return "gaussian"; }
  std::size_t dim() const override { return 2; }
  bool in_support(std::span<const double> theta) const override;
  double log_prior(std::span<const double>) const override { return 0.0; }
  double log_lik(std::span<const double> x, std::span<const double> theta) const override;
  double log_lik_sum(const Dataset& data, std::span<const double> theta) const override;
};

/// X ~ N(mu, sigma^2) with sigma known and a N(prior_mean, prior_sd^2) prior on mu.
/// The conjugate toy used for analytic checks.
class GaussianMeanModel final : public Model {
 public:
  GaussianMeanModel(double sigma, double prior_mean, double prior_sd);
  std::string name() const override { return "gaussian_mean"; }
  std::size_t dim() const override { return 1; }
  bool in_support(std::span<const double> theta) const override;
  double log_prior(std::span<const double> theta) const override;
  double log_lik(std::span<const double> x, std::span<const double> theta) const override;

  double sigma() const noexcept { return sigma_; }
  double prior_mean() const noexcept { return prior_mean_; }
  double prior_sd() const noexcept { return prior_sd_; }

  struct Posterior {
    double mean;
    double variance;
  };
  /// Closed-form posterior of mu given all of `data`, with the prior raised to `prior_power`.
  Posterior posterior(const Dataset& data, double prior_power = 1.0) const;

 private:
  double sigma_;
  double prior_mean_;
  double prior_sd_;
};

std::shared_ptr<const Model> make_model(const std::string& name,
                                        VarianceConvention conv = VarianceConvention::variance);

/// One data subset together with its scale factor.
struct ShardSpec {
  std::size_t k = 1;  // 1-based
  std::size_t K = 1;
  Dataset data;
  double lambda = 1.0;
  std::shared_ptr<const Model> model;
};

/// Randomly permutes the observation indices and splits them into K equal consecutive blocks.
/// Throws ModelError when K does not divide N.
std::vector<ShardSpec> shard_data(const Dataset& data, std::size_t K, std::uint64_t seed,
                                  std::shared_ptr<const Model> model);

/// The index permutation used by shard_data, exposed for partition checks.
std::vector<std::size_t> shard_permutation(std::size_t N, std::uint64_t seed);

/// (1/K) log pi_0(theta) + sum over the shard of log p(x | theta); -inf off the support.
double log_gamma(const ShardSpec& shard, std::span<const double> theta);

/// lambda_k * log_gamma. Unnormalized.
double log_scaled_subposterior(const ShardSpec& shard, std::span<const double> theta);

/// log pi_0(theta) + sum over all observations; -inf off the support.
double log_posterior(const Model& model, const Dataset& data, std::span<const double> theta);

/// Gaussian log-density with the given variance.
double normal_logpdf(double x, double mean, double variance) noexcept;

// Synthetic data and file I/O.

/// Draws N observations for a named experiment model.
///   bimodal: the mixture at `theta`; moon: N(0, 1); lognormal: LN(0, 1); normal: N(0, 1);
///   gaussian_mean: N(theta_1, sigma^2) with sigma = 1.
Dataset synthesize(const std::string& generator, std::size_t N, const ParamPoint& theta,
                   std::uint64_t seed, VarianceConvention conv = VarianceConvention::variance);

/// One observation per line, optional `# d=<dim>` header.
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// `{"model": ..., "true_theta": [...], "seed": ...}` next to a synthetic dataset.
void write_dataset_sidecar(const std::filesystem::path& path, const std::string& model,
                           const ParamPoint& true_theta, std::uint64_t seed);

}  // namespace fdnc

#endif
