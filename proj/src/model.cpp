#include "fdnc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "fdnc/io.hpp"

namespace fdnc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

double logaddexp(double a, double b) noexcept {
  const double m = std::max(a, b);
  if (m == kNegInf) return kNegInf;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double convention_variance(VarianceConvention conv) {
  // The literal "2" in N(., 2).
  return conv == VarianceConvention::variance ? 2.0 : 4.0;
}

}  // namespace

double normal_logpdf(double x, double mean, double variance) noexcept {
  const double z = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + z * z / variance);
}

Dataset::Dataset(std::vector<double> values, std::size_t dim)
    : values_(std::move(values)), dim_(dim) {
  if (dim_ == 0) throw ModelError("dataset dimension must be at least 1");
  if (values_.size() % dim_ != 0) throw ModelError("dataset values not a multiple of its dimension");
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t i : indices) {
    auto row = (*this)[i];
    out.insert(out.end(), row.begin(), row.end());
  }
  return Dataset(std::move(out), dim_);
}

VarianceConvention parse_variance_convention(const std::string& s) {
  if (s == "variance") return VarianceConvention::variance;
  if (s == "stddev") return VarianceConvention::stddev;
  throw ModelError("unknown variance_convention '" + s + "'");
}

std::string to_string(VarianceConvention c) {
  return c == VarianceConvention::variance ? "variance" : "stddev";
}

double Model::log_lik_sum(const Dataset& data, std::span<const double> theta) const {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += log_lik(data[i], theta);
  return s;
}

BimodalMixtureModel::BimodalMixtureModel(VarianceConvention conv)
    : var_(convention_variance(conv)) {}

bool BimodalMixtureModel::in_support(std::span<const double> theta) const {
  return std::isfinite(theta[0]) && std::isfinite(theta[1]);
}

double BimodalMixtureModel::log_lik(std::span<const double> x,
                                    std::span<const double> theta) const {
  const double a = normal_logpdf(x[0], theta[0], var_);
  const double b = normal_logpdf(x[0], theta[0] + theta[1], var_);
  return logaddexp(a, b) - std::numbers::ln2;
}

MoonModel::MoonModel(VarianceConvention conv) : var_(convention_variance(conv)) {}

bool MoonModel::in_support(std::span<const double> theta) const {
  return theta[0] >= 0.0 && theta[1] >= 0.0 && std::isfinite(theta[0]) &&
         std::isfinite(theta[1]);
}

double MoonModel::log_lik(std::span<const double> x, std::span<const double> theta) const {
  return normal_logpdf(x[0], std::sqrt(theta[0]) + std::sqrt(theta[1]), var_);
}

bool GaussianModel::in_support(std::span<const double> theta) const {
  return std::isfinite(theta[0]) && std::isfinite(theta[1]) && theta[1] > 0.0;
}

double GaussianModel::log_lik(std::span<const double> x, std::span<const double> theta) const {
  return normal_logpdf(x[0], theta[0], theta[1]);
}

double GaussianModel::log_lik_sum(const Dataset& data, std::span<const double> theta) const {
  // Same terms as the generic loop with the log-variance hoisted out.
  const double mu = theta[0];
  const double var = theta[1];
  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double z = data[i][0] - mu;
    ss += z * z;
  }
  const double n = static_cast<double>(data.size());
  return -0.5 * (n * (kLog2Pi + std::log(var)) + ss / var);
}

GaussianMeanModel::GaussianMeanModel(double sigma, double prior_mean, double prior_sd)
    : sigma_(sigma), prior_mean_(prior_mean), prior_sd_(prior_sd) {
  if (!(sigma > 0.0) || !(prior_sd > 0.0)) throw ModelError("gaussian_mean: scales must be positive");
}

bool GaussianMeanModel::in_support(std::span<const double> theta) const {
  return std::isfinite(theta[0]);
}

double GaussianMeanModel::log_prior(std::span<const double> theta) const {
  const double z = (theta[0] - prior_mean_) / prior_sd_;
  return -0.5 * z * z;
}

double GaussianMeanModel::log_lik(std::span<const double> x, std::span<const double> theta) const {
  return normal_logpdf(x[0], theta[0], sigma_ * sigma_);
}

GaussianMeanModel::Posterior GaussianMeanModel::posterior(const Dataset& data,
                                                          double prior_power) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) sum += data[i][0];
  const double prior_prec = prior_power / (prior_sd_ * prior_sd_);
  const double lik_prec = static_cast<double>(data.size()) / (sigma_ * sigma_);
  const double prec = prior_prec + lik_prec;
  return {(prior_prec * prior_mean_ + sum / (sigma_ * sigma_)) / prec, 1.0 / prec};
}

std::shared_ptr<const Model> make_model(const std::string& name, VarianceConvention conv) {
  if (name == "bimodal") return std::make_shared<BimodalMixtureModel>(conv);
  if (name == "moon") return std::make_shared<MoonModel>(conv);
  if (name == "gaussian" || name == "misspec") return std::make_shared<GaussianModel>();
  if (name == "gaussian_mean") return std::make_shared<GaussianMeanModel>(1.0, 0.0, 10.0);
  throw ModelError("unknown model '" + name + "'");
}

std::vector<std::size_t> shard_permutation(std::size_t N, std::uint64_t seed) {
  std::vector<std::size_t> perm(N);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, "shard");
  // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
  for (std::size_t i = N; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return perm;
}

std::vector<ShardSpec> shard_data(const Dataset& data, std::size_t K, std::uint64_t seed,
                                  std::shared_ptr<const Model> model) {
  const std::size_t N = data.size();
  if (K == 0) throw ModelError("shard count K must be at least 1");
  if (N % K != 0) {
    throw ModelError("K=" + std::to_string(K) + " does not divide N=" + std::to_string(N));
  }
  const auto perm = shard_permutation(N, seed);
  const std::size_t m = N / K;
  std::vector<ShardSpec> shards;
  shards.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::span<const std::size_t> block(perm.data() + k * m, m);
    shards.push_back(ShardSpec{k + 1, K, data.select(block), 1.0, model});
  }
  return shards;
}

double log_gamma(const ShardSpec& shard, std::span<const double> theta) {
  const Model& model = *shard.model;
  if (!model.in_support(theta)) return kNegInf;
  const double lp = model.log_prior(theta) / static_cast<double>(shard.K);
  return lp + model.log_lik_sum(shard.data, theta);
}

double log_scaled_subposterior(const ShardSpec& shard, std::span<const double> theta) {
  return shard.lambda * log_gamma(shard, theta);
}

double log_posterior(const Model& model, const Dataset& data, std::span<const double> theta) {
  if (!model.in_support(theta)) return kNegInf;
  return model.log_prior(theta) + model.log_lik_sum(data, theta);
}

Dataset synthesize(const std::string& generator, std::size_t N, const ParamPoint& theta,
                   std::uint64_t seed, VarianceConvention conv) {
  Rng rng = make_rng(seed, "data");
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> xs;
  xs.reserve(N);
  if (generator == "bimodal") {
    if (theta.size() != 2) throw ModelError("bimodal generator needs theta of length 2");
    const double sd = std::sqrt(convention_variance(conv));
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < N; ++i) {
      const double mean = coin(rng) ? theta[0] : theta[0] + theta[1];
      xs.push_back(mean + sd * z(rng));
    }
  } else if (generator == "moon" || generator == "normal") {
    for (std::size_t i = 0; i < N; ++i) xs.push_back(z(rng));
  } else if (generator == "lognormal") {
    for (std::size_t i = 0; i < N; ++i) xs.push_back(std::exp(z(rng)));
  } else if (generator == "gaussian_mean") {
    const double mu = theta.empty() ? 0.0 : theta[0];
    for (std::size_t i = 0; i < N; ++i) xs.push_back(mu + z(rng));
  } else {
    throw ModelError("unknown data generator '" + generator + "'");
  }
  return Dataset::scalar(std::move(xs));
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::size_t dim = 0;
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("d=");
      if (pos != std::string::npos) dim = static_cast<std::size_t>(std::stoul(line.substr(pos + 2)));
      continue;
    }
    std::istringstream ss(line);
    std::string tok;
    std::size_t count = 0;
    while (ss >> tok) {
      values.push_back(parse_double(tok));
      ++count;
    }
    if (dim == 0) dim = count;
    if (count != dim) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(dim) + " values");
    }
  }
  if (values.empty()) throw IoError("dataset " + path.string() + " has no observations");
  return Dataset(std::move(values), dim);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::string out = "# d=" + std::to_string(data.dim()) + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ' ';
      out += format_double(row[j]);
    }
    out += '\n';
  }
  write_text(path, out);
}

void write_dataset_sidecar(const std::filesystem::path& path, const std::string& model,
                           const ParamPoint& true_theta, std::uint64_t seed) {
  nlohmann::json j;
  j["model"] = model;
  j["true_theta"] = true_theta;
  j["seed"] = seed;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace fdnc
