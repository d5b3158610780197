#include "fdnc/baselines.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace fdnc {

namespace {

void check_aligned(const SubchainSet& chains) {
  if (chains.empty()) throw BaselineError("no shard chains");
  const std::size_t T = chains.front().size();
  if (T == 0) throw BaselineError("empty shard chain");
  const std::size_t d = chains.front().front().size();
  for (const auto& c : chains) {
    if (c.size() != T) throw BaselineError("shard chains differ in length");
    for (const auto& p : c) {
      if (p.size() != d) throw BaselineError("shard chains differ in dimension");
    }
  }
}

Eigen::MatrixXd sample_covariance(const std::vector<ParamPoint>& chain) {
  const auto T = static_cast<Eigen::Index>(chain.size());
  const auto d = static_cast<Eigen::Index>(chain.front().size());
  Eigen::MatrixXd X(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index j = 0; j < d; ++j) X(t, j) = chain[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
  }
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const double denom = T > 1 ? static_cast<double>(T - 1) : 1.0;
  return centered.transpose() * centered / denom;
}

}  // namespace

std::vector<ParamPoint> consensus_combine(const SubchainSet& chains, Exec exec) {
  check_aligned(chains);
  const std::size_t K = chains.size();
  const std::size_t T = chains.front().size();
  const auto d = static_cast<Eigen::Index>(chains.front().front().size());

  std::vector<Eigen::MatrixXd> W(K);
  Eigen::MatrixXd W_sum = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < K; ++k) {
    const Eigen::MatrixXd cov = sample_covariance(chains[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
    lu.setThreshold(1e-12);
    if (T < 2 || !lu.isInvertible() || !(cov.diagonal().minCoeff() > 0.0)) {
      throw BaselineError("singular sample covariance in shard " + std::to_string(k + 1));
    }
    W[k] = lu.inverse();
    W_sum += W[k];
  }
  const Eigen::MatrixXd W_sum_inv = W_sum.inverse();

  std::vector<ParamPoint> out(T, ParamPoint(static_cast<std::size_t>(d)));
  for_each_index(exec, T, [&](std::size_t t) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < K; ++k) {
      acc += W[k] * Eigen::Map<const Eigen::VectorXd>(chains[k][t].data(), d);
    }
    const Eigen::VectorXd theta = W_sum_inv * acc;
    for (Eigen::Index j = 0; j < d; ++j) out[t][static_cast<std::size_t>(j)] = theta(j);
  });
  return out;
}

std::vector<double> silverman_bandwidth(const SubchainSet& chains) {
  check_aligned(chains);
  const std::size_t T = chains.front().size();
  const std::size_t d = chains.front().front().size();
  std::vector<double> h(d, 0.0);
  for (const auto& c : chains) {
    const Eigen::MatrixXd cov = sample_covariance(c);
    for (std::size_t j = 0; j < d; ++j) {
      h[j] += std::sqrt(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
    }
  }
  const double factor =
      std::pow(static_cast<double>(T), -1.0 / (static_cast<double>(d) + 4.0));
  for (double& v : h) v = factor * v / static_cast<double>(chains.size());
  return h;
}

KdeProductSampler::KdeProductSampler(const SubchainSet& chains, std::vector<double> bandwidth,
                                     std::uint64_t seed)
    : chains_(chains), bandwidth_(std::move(bandwidth)), rng_(seed) {
  check_aligned(chains_);
  K_ = chains_.size();
  T_ = chains_.front().size();
  d_ = chains_.front().front().size();
  if (bandwidth_.size() != d_) throw BaselineError("bandwidth length must equal d");
  for (double h : bandwidth_) {
    if (!(h > 0.0)) throw BaselineError("bandwidth must be positive");
  }
  std::uniform_int_distribution<std::size_t> pick(0, T_ - 1);
  idx_.resize(K_);
  sum_.assign(d_, 0.0);
  for (std::size_t k = 0; k < K_; ++k) {
    idx_[k] = pick(rng_);
    for (std::size_t j = 0; j < d_; ++j) sum_[j] += chains_[k][idx_[k]][j];
  }
  cur_log_w_ = log_weight_of_sum(idx_, sum_);
}

double KdeProductSampler::log_weight_of_sum(std::span<const std::size_t> idx,
                                            std::span<const double> sum) const {
  const double K = static_cast<double>(K_);
  double lw = 0.0;
  for (std::size_t j = 0; j < d_; ++j) {
    const double mean = sum[j] / K;
    double ss = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      const double z = chains_[k][idx[k]][j] - mean;
      ss += z * z;
    }
    lw -= ss / (2.0 * bandwidth_[j] * bandwidth_[j]);
  }
  return lw;
}

double KdeProductSampler::log_weight(std::span<const std::size_t> idx) const {
  std::vector<double> sum(d_, 0.0);
  for (std::size_t k = 0; k < K_; ++k) {
    for (std::size_t j = 0; j < d_; ++j) sum[j] += chains_[k][idx[k]][j];
  }
  return log_weight_of_sum(idx, sum);
}

void KdeProductSampler::sweep() {
  std::uniform_int_distribution<std::size_t> pick(0, T_ - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> prop_sum(d_);
  for (std::size_t k = 0; k < K_; ++k) {
    const std::size_t old = idx_[k];
    const std::size_t cand = pick(rng_);
    for (std::size_t j = 0; j < d_; ++j) {
      prop_sum[j] = sum_[j] - chains_[k][old][j] + chains_[k][cand][j];
    }
    idx_[k] = cand;
    const double lw = log_weight_of_sum(idx_, prop_sum);
    if (std::log(unif(rng_)) < lw - cur_log_w_) {
      cur_log_w_ = lw;
      // Recompute instead of carrying prop_sum so rounding does not accumulate.
      for (std::size_t j = 0; j < d_; ++j) {
        sum_[j] = 0.0;
        for (std::size_t kk = 0; kk < K_; ++kk) sum_[j] += chains_[kk][idx_[kk]][j];
      }
    } else {
      idx_[k] = old;
    }
  }
}

ParamPoint KdeProductSampler::draw() {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double K = static_cast<double>(K_);
  ParamPoint out(d_);
  for (std::size_t j = 0; j < d_; ++j) {
    out[j] = sum_[j] / K + bandwidth_[j] / std::sqrt(K) * normal(rng_);
  }
  return out;
}

std::vector<ParamPoint> kde_product_sample(const SubchainSet& chains,
                                           const std::vector<double>& bandwidth,
                                           std::size_t n_out, std::size_t n_gibbs_sweeps,
                                           std::uint64_t seed, std::size_t burn_sweeps) {
  if (chains.empty() || chains.front().size() < 2) {
    throw BaselineError("KDE product sampling needs at least two draws per shard");
  }
  KdeProductSampler sampler(chains, bandwidth, seed);
  for (std::size_t s = 0; s < burn_sweeps; ++s) sampler.sweep();
  std::vector<ParamPoint> out;
  out.reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    for (std::size_t s = 0; s < n_gibbs_sweeps; ++s) sampler.sweep();
    out.push_back(sampler.draw());
  }
  return out;
}

}  // namespace fdnc
