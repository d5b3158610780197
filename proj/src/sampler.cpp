#include "fdnc/sampler.hpp"

#include <cmath>

#include "fdnc/io.hpp"

namespace fdnc {

void MhConfig::validate() const {
  if (burn_in > n_iters) throw SamplerError("burn_in exceeds n_iters");
  if (thin < 1) throw SamplerError("thin must be at least 1");
  if (init.empty()) throw SamplerError("empty initial point");
  if (step_scale.size() != init.size()) {
    throw SamplerError("step_scale length does not match the initial point");
  }
  for (double s : step_scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw SamplerError("step_scale entries must be positive");
  }
}

double target_acceptance(std::size_t dim) noexcept { return dim == 1 ? 0.44 : 0.234; }

std::vector<double> adapt_step(std::span<const double> step_scale, double batch_acceptance,
                               double target, std::size_t batch_index) {
  const double gain = 1.0 / std::sqrt(static_cast<double>(batch_index) + 1.0);
  const double factor = std::exp(gain * (batch_acceptance - target));
  std::vector<double> out(step_scale.begin(), step_scale.end());
  for (double& s : out) s *= factor;
  return out;
}

ChainOutput rwmh(const LogDensity& log_target, const MhConfig& cfg,
                 const LogDensity& byproduct_log) {
  if (!byproduct_log) {
    return rwmh(PairedLogDensity([&](std::span<const double> th) {
                  const double v = log_target(th);
                  return TargetEvaluation{v, v};
                }),
                cfg);
  }
  return rwmh(PairedLogDensity([&](std::span<const double> th) {
                return TargetEvaluation{log_target(th), byproduct_log(th)};
              }),
              cfg);
}

ChainOutput rwmh(const PairedLogDensity& log_density, const MhConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.init.size();

  ParamPoint current = cfg.init;
  TargetEvaluation cur_eval = log_density(current);
  if (cur_eval.target == kNegInf || std::isnan(cur_eval.target)) {
    throw SamplerError("initial point off support");
  }

  Rng rng{cfg.seed};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> step = cfg.step_scale;
  const double target_rate = target_acceptance(d);

  ChainOutput out;
  const std::size_t post = cfg.n_iters - cfg.burn_in;
  out.retained.reserve(post / cfg.thin);
  out.trace.reserve(post);

  std::size_t batch_accepts = 0;
  std::size_t batch_index = 0;
  std::size_t burn_accepts = 0;
  std::size_t post_accepts = 0;
  ParamPoint proposal(d);

  for (std::size_t it = 0; it < cfg.n_iters; ++it) {
    const bool burning = it < cfg.burn_in;
    for (std::size_t j = 0; j < d; ++j) proposal[j] = current[j] + step[j] * normal(rng);
    const TargetEvaluation prop_eval = log_density(proposal);
    const double log_u = std::log(unif(rng));

    bool accepted = false;
    if (prop_eval.target != kNegInf && !std::isnan(prop_eval.target)) {
      accepted = log_u < prop_eval.target - cur_eval.target;
      if (!burning && std::isfinite(prop_eval.byproduct)) {
        out.trace.push_back({proposal, prop_eval.byproduct});
      }
    }
    if (accepted) {
      current = proposal;
      cur_eval = prop_eval;
    }

    if (burning) {
      burn_accepts += accepted;
      if (cfg.adapt_during_burnin) {
        batch_accepts += accepted;
        if ((it + 1) % kAdaptBatch == 0) {
          const double rate = static_cast<double>(batch_accepts) / kAdaptBatch;
          step = adapt_step(step, rate, target_rate, batch_index++);
          batch_accepts = 0;
        }
      }
    } else {
      post_accepts += accepted;
      if ((it - cfg.burn_in + 1) % cfg.thin == 0) out.retained.push_back(current);
    }
  }

  if (post > 0) {
    out.acceptance_rate = static_cast<double>(post_accepts) / static_cast<double>(post);
  } else if (cfg.burn_in > 0) {
    out.acceptance_rate = static_cast<double>(burn_accepts) / static_cast<double>(cfg.burn_in);
  }
  out.final_step_scale = std::move(step);
  return out;
}

std::vector<ParamPoint> thin_retained(std::span<const ParamPoint> chain, std::size_t stride) {
  if (stride < 1) throw SamplerError("thinning stride must be at least 1");
  std::vector<ParamPoint> out;
  out.reserve(chain.size() / stride + 1);
  for (std::size_t i = 0; i < chain.size(); i += stride) out.push_back(chain[i]);
  return out;
}

ChainOutput sample_shard(const ShardSpec& shard, const MhConfig& cfg) {
  const double lambda = shard.lambda;
  return rwmh(PairedLogDensity([&shard, lambda](std::span<const double> th) {
                const double lg = log_gamma(shard, th);
                return TargetEvaluation{lambda * lg, lg};
              }),
              cfg);
}

std::vector<ChainOutput> sample_shards(std::span<const ShardSpec> shards,
                                       std::span<const MhConfig> cfgs, Exec exec) {
  if (shards.size() != cfgs.size()) throw SamplerError("one MhConfig per shard required");
  std::vector<ChainOutput> out(shards.size());
  for_each_index(exec, shards.size(), [&](std::size_t k) {
    try {
      out[k] = sample_shard(shards[k], cfgs[k]);
    } catch (const SamplerError& e) {
      throw SamplerError("shard " + std::to_string(shards[k].k) + ": " + e.what());
    }
  });
  return out;
}

void write_chain_csv(const std::filesystem::path& path, std::span<const ParamPoint> retained,
                     std::size_t d) {
  CsvTable t{theta_header(d), {retained.begin(), retained.end()}};
  write_csv(path, t);
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceEntry> trace,
                     std::size_t d) {
  CsvTable t{theta_header(d), {}};
  t.header.push_back("log_gamma");
  t.rows.reserve(trace.size());
  for (const auto& e : trace) {
    auto row = e.theta;
    row.push_back(e.log_value);
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

std::vector<ParamPoint> read_chain_csv(const std::filesystem::path& path) {
  return read_csv(path).rows;
}

std::vector<TraceEntry> read_trace_csv(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  const std::size_t lg = t.column("log_gamma");
  std::vector<TraceEntry> out;
  out.reserve(t.rows.size());
  for (auto& row : t.rows) {
    const double v = row[lg];
    row.erase(row.begin() + static_cast<std::ptrdiff_t>(lg));
    out.push_back({std::move(row), v});
  }
  return out;
}

}  // namespace fdnc
