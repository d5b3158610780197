#ifndef FDNC_SAMPLER_HPP
#define FDNC_SAMPLER_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fdnc/model.hpp"
#include "fdnc/parallel.hpp"

namespace fdnc {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using LogDensity = std::function<double(std::span<const double>)>;

struct MhConfig {
  std::size_t n_iters = 50'000;
  std::size_t burn_in = 10'000;
  std::size_t thin = 10;
  std::vector<double> step_scale;  // per-dimension proposal standard deviations
  ParamPoint init;
  std::uint64_t seed = 0;
  bool adapt_during_burnin = true;

  void validate() const;
};

/// A proposed point with its (unscaled) log-density.
struct TraceEntry {
  ParamPoint theta;
  double log_value;
};

struct ChainOutput {
  std::vector<ParamPoint> retained;
  std::vector<TraceEntry> trace;  // every finite post-burn-in proposal
  double acceptance_rate = 0.0;
  std::vector<double> final_step_scale;
};

/// Both values a sampler needs from one density evaluation: the log-target driving the
/// accept step and the log-density recorded in the trace.
struct TargetEvaluation {
  double target;
  double byproduct;
};
using PairedLogDensity = std::function<TargetEvaluation(std::span<const double>)>;

/// Gaussian random-walk Metropolis-Hastings.
///
/// Retains every `thin`-th post-burn-in state (the last state of each block of `thin`
/// iterations), so retained.size() == (n_iters - burn_in) / thin. The trace holds every
/// post-burn-in proposal whose byproduct log-density is finite; it records
/// `byproduct_log` (defaulting to `log_target`). Throws SamplerError when the initial point
/// is off the support.
ChainOutput rwmh(const LogDensity& log_target, const MhConfig& cfg,
                 const LogDensity& byproduct_log = {});

ChainOutput rwmh(const PairedLogDensity& log_density, const MhConfig& cfg);

/// Acceptance rate the burn-in adaptation aims for.
double target_acceptance(std::size_t dim) noexcept;

/// One Robbins-Monro update of the proposal scales after an adaptation batch:
/// every scale is multiplied by exp(gain * (batch_acceptance - target)), with
/// gain = 1 / sqrt(batch_index + 1). Scales stay strictly positive.
std::vector<double> adapt_step(std::span<const double> step_scale, double batch_acceptance,
                               double target, std::size_t batch_index);

/// Iterations per adaptation batch.
inline constexpr std::size_t kAdaptBatch = 50;

/// Keeps indices 0, stride, 2*stride, ...
std::vector<ParamPoint> thin_retained(std::span<const ParamPoint> chain, std::size_t stride);

/// Samples lambda_k * log_gamma while recording the unscaled log_gamma in the trace.
ChainOutput sample_shard(const ShardSpec& shard, const MhConfig& cfg);

/// Runs one chain per shard; cfgs[k] belongs to shards[k].
std::vector<ChainOutput> sample_shards(std::span<const ShardSpec> shards,
                                       std::span<const MhConfig> cfgs, Exec exec = Exec::parallel);

void write_chain_csv(const std::filesystem::path& path, std::span<const ParamPoint> retained,
                     std::size_t d);
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceEntry> trace,
                     std::size_t d);
std::vector<ParamPoint> read_chain_csv(const std::filesystem::path& path);
std::vector<TraceEntry> read_trace_csv(const std::filesystem::path& path);

}  // namespace fdnc

#endif
