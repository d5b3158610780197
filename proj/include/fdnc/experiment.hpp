#ifndef FDNC_EXPERIMENT_HPP
#define FDNC_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdnc/combine.hpp"
#include "fdnc/model.hpp"
#include "fdnc/parallel.hpp"
#include "fdnc/sampler.hpp"
#include "fdnc/timing.hpp"

namespace fdnc {

/// An error tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentConfig {
  std::string experiment = "bimodal";  // bimodal | moon | misspec | gaussian_mean
  std::string model = "bimodal";
  std::string data_generator = "bimodal";
  std::string data_path;  // read observations from here instead of synthesizing
  std::size_t N = 200;
  std::size_t K = 10;
  ParamPoint true_theta{0.0, 1.0};
  VarianceConvention variance_convention = VarianceConvention::variance;

  std::string lambda_method = "fixed";  // fixed | mle_markov
  double lambda_value = 1.0;

  // Shard chains.
  std::size_t n_iters = 50'000;
  std::size_t burn_in = 10'000;
  std::size_t thin = 10;
  std::vector<double> step_scale{0.5, 0.5};  // empty: derived from MLE summaries
  ParamPoint init{0.5, 0.0};                  // empty: the full-data MLE
  bool adapt_during_burnin = true;

  // Forests.
  std::size_t n_trees = 10;
  std::size_t min_leaf = 5;
  std::size_t subsample_size = 10'000;

  // RF-IS.
  double truncation_p = 0.999;
  std::size_t n_resample = 10'000;

  // RF-MH.
  std::size_t rfmh_iters = 50'000;
  std::size_t rfmh_burn_in = 10'000;
  std::size_t rfmh_thin = 4;

  // Nonparametric KDE product.
  std::size_t nonpara_sweeps = 2;
  std::size_t nonpara_burn_sweeps = 200;

  // Oracle full-data chains; each chain starts at one of oracle_inits (the shard init when
  // that list is empty).
  std::size_t oracle_iters = 220'000;
  std::size_t oracle_burn_in = 20'000;
  std::size_t oracle_thin = 20;
  std::vector<ParamPoint> oracle_inits;

  // Mode-mass metric (empty: not reported).
  std::vector<ParamPoint> mode_centers;
  double mode_radius = 0.75;

  bool write_traces = true;
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  std::size_t dim() const;
  void validate() const;
};

/// Desk-scale defaults for a named experiment; `paper_scale` switches to the long budgets (500k iterations).
ExperimentConfig make_experiment(const std::string& name, std::size_t K, std::uint64_t seed,
                                 bool paper_scale = false);

/// `key = value` lines; lists are comma-separated, point lists separated by ';'.
std::string config_to_text(const ExperimentConfig& cfg);
/// Applies every key in `text` on top of `base`. Unknown keys are errors.
ExperimentConfig config_from_text(const std::string& text, ExperimentConfig base = {});

struct ExperimentResult {
  ExperimentConfig config;
  LambdaPlan lambda_plan;
  std::map<std::string, std::vector<ParamPoint>> samples;  // rfis, rfmh, cmc, nonpara, oracle
  RfIsResult rfis;
  TimingReport timing;
  double out_of_box_fraction = 0.0;
  std::vector<std::string> warnings;
  std::string metrics_json;
};

/// Runs the full pipeline and writes every artifact under cfg.out_dir. Throws StageError.
ExperimentResult run_experiment(const ExperimentConfig& cfg, Exec exec = Exec::parallel);

/// Full-data random-walk chains started from each oracle init, concatenated.
std::vector<ParamPoint> oracle_full_mcmc(const ExperimentConfig& cfg, const Dataset& data,
                                         const Model& model);

/// Fraction of (sample, surrogate) queries outside the surrogate's training box.
double out_of_box_fraction(std::span<const std::vector<ParamPoint>> shard_samples,
                           std::span<const std::vector<double>> box_lo,
                           std::span<const std::vector<double>> box_hi);

/// The metrics.json document for a finished run.
std::string compute_metrics_json(const ExperimentConfig& cfg,
                                 const std::map<std::string, std::vector<ParamPoint>>& samples,
                                 const LambdaPlan& plan, std::optional<double> oob_fraction);

/// Re-reads a run directory and rewrites metrics.json from its files; returns the document.
std::string recompute_metrics(const std::filesystem::path& dir);

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"rfis", "rfmh", "cmc", "nonpara"};
  return names;
}

}  // namespace fdnc

#endif
