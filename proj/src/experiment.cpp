#include "fdnc/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "fdnc/baselines.hpp"
#include "fdnc/forest.hpp"
#include "fdnc/io.hpp"
#include "fdnc/metrics.hpp"

namespace fdnc {

// ---------------------------------------------------------------------------
// Configuration

std::size_t ExperimentConfig::dim() const { return make_model(model, variance_convention)->dim(); }

void ExperimentConfig::validate() const {
  const std::size_t d = dim();
  if (K < 1) throw std::invalid_argument("K must be at least 1");
  if (data_path.empty() && N % K != 0) {
    throw std::invalid_argument("K=" + std::to_string(K) + " does not divide N=" + std::to_string(N));
  }
  if (lambda_method != "fixed" && lambda_method != "mle_markov") {
    throw std::invalid_argument("lambda_method must be fixed or mle_markov");
  }
  if (lambda_method == "mle_markov" && model != "gaussian") {
    throw std::invalid_argument("lambda_method mle_markov needs the gaussian model");
  }
  if (lambda_method == "fixed" && !(lambda_value > 0.0)) {
    throw std::invalid_argument("lambda_value must be positive");
  }
  if (burn_in >= n_iters) throw std::invalid_argument("burn_in must be below n_iters");
  if (thin < 1 || rfmh_thin < 1 || oracle_thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (rfmh_burn_in >= rfmh_iters) throw std::invalid_argument("rfmh_burn_in must be below rfmh_iters");
  if (oracle_burn_in >= oracle_iters) throw std::invalid_argument("oracle_burn_in must be below oracle_iters");
  if (!step_scale.empty() && step_scale.size() != d) throw std::invalid_argument("step_scale length must equal d");
  if (!init.empty() && init.size() != d) throw std::invalid_argument("init length must equal d");
  for (const auto& p : oracle_inits) {
    if (p.size() != d) throw std::invalid_argument("oracle_inits points must have length d");
  }
  for (const auto& p : mode_centers) {
    if (p.size() != d) throw std::invalid_argument("mode_centers points must have length d");
  }
  if (!(truncation_p > 0.0 && truncation_p <= 1.0)) throw std::invalid_argument("truncation_p must lie in (0, 1]");
  if (n_trees < 1 || min_leaf < 1) throw std::invalid_argument("forest sizes must be positive");
  if (n_resample < 1) throw std::invalid_argument("n_resample must be positive");
  if ((init.empty() || step_scale.empty()) && model != "gaussian" && model != "gaussian_mean") {
    throw std::invalid_argument("init and step_scale are required for model " + model);
  }
}

ExperimentConfig make_experiment(const std::string& name, std::size_t K, std::uint64_t seed,
                                 bool paper_scale) {
  ExperimentConfig c;
  c.experiment = name;
  c.K = K;
  c.seed = seed;
  c.out_dir = "out_" + name;
  if (name == "bimodal") {
    c.model = "bimodal";
    c.data_generator = "bimodal";
    c.N = 200;
    c.true_theta = {0.0, 1.0};
    c.init = {0.5, 0.0};
    c.step_scale = {0.5, 0.5};
    c.mode_centers = {{0.0, 1.0}, {1.0, -1.0}};
    c.mode_radius = 0.75;
    // One oracle chain per configuration consistent with the data.
    c.oracle_inits = {{0.0, 1.0}, {1.0, -1.0}};
    c.oracle_iters = 110'000;
    c.oracle_burn_in = 10'000;
    c.oracle_thin = 20;
  } else if (name == "moon") {
    c.model = "moon";
    c.data_generator = "moon";
    c.N = 1000;
    c.true_theta = {};
    c.init = {0.02, 0.02};
    c.step_scale = {0.02, 0.02};
    c.oracle_inits = {{0.002, 0.002}};
  } else if (name == "misspec") {
    c.model = "gaussian";
    c.data_generator = "lognormal";
    c.N = 10'000;
    c.true_theta = {};
    c.lambda_method = "mle_markov";
    c.init = {};
    c.step_scale = {};
  } else if (name == "gaussian_mean") {
    c.model = "gaussian_mean";
    c.data_generator = "gaussian_mean";
    c.N = 1000;
    c.true_theta = {0.5};
    c.init = {};
    c.step_scale = {};
  } else {
    throw std::invalid_argument("unknown experiment '" + name + "'");
  }
  if (paper_scale) {
    c.n_iters = 500'000;
    c.burn_in = 100'000;
    c.thin = (name == "misspec") ? 10 : 100;
    c.subsample_size = 50'000;
    c.rfmh_iters = 500'000;
    c.rfmh_burn_in = 100'000;
    c.rfmh_thin = 40;
    c.oracle_iters = 1'000'000 * std::max<std::size_t>(c.oracle_inits.size(), 1);
    c.oracle_burn_in = 100'000;
    c.oracle_thin = 90;
  }
  return c;
}

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_double(tok));
  }
  return out;
}

std::string join_points(const std::vector<ParamPoint>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ';';
    s += join_doubles(pts[i]);
  }
  return s;
}

std::vector<ParamPoint> split_points(const std::string& s) {
  std::vector<ParamPoint> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    auto p = split_doubles(tok);
    if (!p.empty()) out.push_back(std::move(p));
  }
  return out;
}

std::uint64_t parse_unsigned(const std::string& s) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw IoError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw IoError("expected a boolean, got '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T>
Field field(std::string key, T ExperimentConfig::*member) {
  Field f;
  f.key = std::move(key);
  if constexpr (std::is_same_v<T, std::string>) {
    f.get = [member](const ExperimentConfig& c) { return c.*member; };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = v; };
  } else if constexpr (std::is_same_v<T, bool>) {
    f.get = [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(v); };
  } else if constexpr (std::is_same_v<T, double>) {
    f.get = [member](const ExperimentConfig& c) { return format_double(c.*member); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); };
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    f.get = [member](const ExperimentConfig& c) { return join_doubles(c.*member); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = split_doubles(v); };
  } else if constexpr (std::is_same_v<T, std::vector<ParamPoint>>) {
    f.get = [member](const ExperimentConfig& c) { return join_points(c.*member); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = split_points(v); };
  } else {
    static_assert(std::is_unsigned_v<T>);
    f.get = [member](const ExperimentConfig& c) { return std::to_string(c.*member); };
    f.set = [member](ExperimentConfig& c, const std::string& v) {
      c.*member = static_cast<T>(parse_unsigned(v));
    };
  }
  return f;
}

const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f{
        field("experiment", &ExperimentConfig::experiment),
        field("model", &ExperimentConfig::model),
        field("data_generator", &ExperimentConfig::data_generator),
        field("data_path", &ExperimentConfig::data_path),
        field("N", &ExperimentConfig::N),
        field("K", &ExperimentConfig::K),
        field("true_theta", &ExperimentConfig::true_theta),
        field("lambda_method", &ExperimentConfig::lambda_method),
        field("lambda_value", &ExperimentConfig::lambda_value),
        field("n_iters", &ExperimentConfig::n_iters),
        field("burn_in", &ExperimentConfig::burn_in),
        field("thin", &ExperimentConfig::thin),
        field("step_scale", &ExperimentConfig::step_scale),
        field("init", &ExperimentConfig::init),
        field("adapt_during_burnin", &ExperimentConfig::adapt_during_burnin),
        field("n_trees", &ExperimentConfig::n_trees),
        field("min_leaf", &ExperimentConfig::min_leaf),
        field("subsample_size", &ExperimentConfig::subsample_size),
        field("truncation_p", &ExperimentConfig::truncation_p),
        field("n_resample", &ExperimentConfig::n_resample),
        field("rfmh_iters", &ExperimentConfig::rfmh_iters),
        field("rfmh_burn_in", &ExperimentConfig::rfmh_burn_in),
        field("rfmh_thin", &ExperimentConfig::rfmh_thin),
        field("nonpara_sweeps", &ExperimentConfig::nonpara_sweeps),
        field("nonpara_burn_sweeps", &ExperimentConfig::nonpara_burn_sweeps),
        field("oracle_iters", &ExperimentConfig::oracle_iters),
        field("oracle_burn_in", &ExperimentConfig::oracle_burn_in),
        field("oracle_thin", &ExperimentConfig::oracle_thin),
        field("oracle_inits", &ExperimentConfig::oracle_inits),
        field("mode_centers", &ExperimentConfig::mode_centers),
        field("mode_radius", &ExperimentConfig::mode_radius),
        field("write_traces", &ExperimentConfig::write_traces),
        field("out_dir", &ExperimentConfig::out_dir),
        field("seed", &ExperimentConfig::seed),
    };
    Field vc;
    vc.key = "variance_convention";
    vc.get = [](const ExperimentConfig& c) { return to_string(c.variance_convention); };
    vc.set = [](ExperimentConfig& c, const std::string& v) {
      c.variance_convention = parse_variance_convention(v);
    };
    f.insert(f.begin() + 7, std::move(vc));
    return f;
  }();
  return fields;
}

}  // namespace

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

ExperimentConfig config_from_text(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& fields = config_fields();
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
    if (it == fields.end()) {
      throw IoError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    try {
      it->set(base, value);
    } catch (const std::exception& e) {
      throw IoError("config line " + std::to_string(lineno) + " (" + key + "): " + e.what());
    }
  }
  return base;
}

// ---------------------------------------------------------------------------
// Metrics

double out_of_box_fraction(std::span<const std::vector<ParamPoint>> shard_samples,
                           std::span<const std::vector<double>> box_lo,
                           std::span<const std::vector<double>> box_hi) {
  std::size_t outside = 0;
  std::size_t total = 0;
  for (const auto& samples : shard_samples) {
    for (const auto& th : samples) {
      for (std::size_t j = 0; j < box_lo.size(); ++j) {
        ++total;
        for (std::size_t c = 0; c < th.size(); ++c) {
          if (th[c] < box_lo[j][c] || th[c] > box_hi[j][c]) {
            ++outside;
            break;
          }
        }
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(outside) / static_cast<double>(total);
}

std::string compute_metrics_json(const ExperimentConfig& cfg,
                                 const std::map<std::string, std::vector<ParamPoint>>& samples,
                                 const LambdaPlan& plan, std::optional<double> oob_fraction) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  j["data_generator"] = cfg.data_generator;
  j["K"] = cfg.K;
  j["seed"] = cfg.seed;
  j["reference"] = "oracle full-data chain";
  j["metric_note"] =
      "W1 and mode-mass values are this tool's quantification of agreement with the oracle";
  const auto& oracle = samples.at("oracle");
  auto methods = nlohmann::json::object();
  for (const auto& name : method_names()) {
    auto it = samples.find(name);
    if (it == samples.end() || it->second.empty()) continue;
    nlohmann::json m;
    std::vector<double> w1;
    double sum = 0.0;
    for (std::size_t d = 0; d < oracle.front().size(); ++d) {
      w1.push_back(wasserstein1_marginal(it->second, oracle, d));
      sum += w1.back();
    }
    m["w1_marginal"] = w1;
    m["w1_sum"] = sum;
    m["n_samples"] = it->second.size();
    if (!cfg.mode_centers.empty()) m["mode_mass"] = mode_mass(it->second, cfg.mode_centers, cfg.mode_radius);
    methods[name] = std::move(m);
  }
  j["methods"] = std::move(methods);
  nlohmann::json o;
  o["n_samples"] = oracle.size();
  const auto mom = moments(oracle);
  o["mean"] = mom.mean;
  o["variance"] = mom.variance;
  if (!cfg.mode_centers.empty()) o["mode_mass"] = mode_mass(oracle, cfg.mode_centers, cfg.mode_radius);
  j["oracle"] = std::move(o);
  if (!cfg.mode_centers.empty()) {
    j["mode_centers"] = cfg.mode_centers;
    j["mode_radius"] = cfg.mode_radius;
  }
  j["lambdas"] = plan.lambdas;
  j["all_lambdas_below_one"] =
      std::all_of(plan.lambdas.begin(), plan.lambdas.end(), [](double l) { return l < 1.0; });
  j["out_of_box_fraction"] = oob_fraction ? nlohmann::json(*oob_fraction) : nlohmann::json(nullptr);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string shard_file(const char* prefix, std::size_t k) {
  return std::string(prefix) + std::to_string(k) + ".csv";
}

/// Proposal scales from a Gaussian MLE summary, widened by 1/sqrt(lambda).
std::vector<double> mle_step(const MleSummary& s, double lambda) {
  const double c = 2.38 / std::sqrt(static_cast<double>(s.sigma_hat.size()));
  std::vector<double> out;
  for (double sd : s.sigma_hat) out.push_back(c * sd / std::sqrt(lambda));
  return out;
}

struct ChainSetup {
  ParamPoint init;
  std::vector<double> step;
};

ChainSetup shard_chain_setup(const ExperimentConfig& cfg, const ShardSpec& shard,
                             const ParamPoint& full_init) {
  ChainSetup s{cfg.init.empty() ? full_init : cfg.init, cfg.step_scale};
  if (!s.step.empty()) return s;
  if (cfg.model == "gaussian") {
    s.step = mle_step(mle_summary_gaussian(shard.data), shard.lambda);
  } else {  // gaussian_mean
    const auto& m = static_cast<const GaussianMeanModel&>(*shard.model);
    const double sd = m.sigma() / std::sqrt(static_cast<double>(shard.data.size()) * shard.lambda);
    s.step = {2.38 * sd};
  }
  return s;
}

ParamPoint default_init(const ExperimentConfig& cfg, const Dataset& data) {
  if (!cfg.init.empty()) return cfg.init;
  if (cfg.model == "gaussian") return mle_summary_gaussian(data).theta_hat;
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += data[i][0];
  return {s / static_cast<double>(data.size())};
}

std::vector<double> pooled_step(const WeightedAtoms& pooled) {
  const auto m = weighted_moments(pooled.atoms, pooled.weights);
  const double c = 2.38 / std::sqrt(static_cast<double>(m.variance.size()));
  std::vector<double> out;
  for (std::size_t j = 0; j < m.variance.size(); ++j) {
    double sd = std::sqrt(m.variance[j]);
    if (!(sd > 0.0)) sd = 1e-3 * std::max(1.0, std::abs(m.mean[j]));
    out.push_back(c * sd);
  }
  return out;
}

}  // namespace

std::vector<ParamPoint> oracle_full_mcmc(const ExperimentConfig& cfg, const Dataset& data,
                                         const Model& model) {
  std::vector<ParamPoint> inits = cfg.oracle_inits;
  if (inits.empty()) inits.push_back(default_init(cfg, data));
  std::vector<double> step = cfg.step_scale;
  const double shrink = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(cfg.K, 1)));
  if (step.empty()) {
    if (cfg.model == "gaussian") {
      step = mle_step(mle_summary_gaussian(data), 1.0);
    } else {
      const auto& m = static_cast<const GaussianMeanModel&>(model);
      step = {2.38 * m.sigma() / std::sqrt(static_cast<double>(std::max<std::size_t>(data.size(), 1)))};
    }
  } else {
    for (double& s : step) s *= shrink;
  }
  // The budget is split evenly across chains.
  const std::size_t per_chain = cfg.oracle_iters / inits.size();
  if (per_chain <= cfg.oracle_burn_in) throw SamplerError("oracle budget too small for its burn-in");
  std::vector<ParamPoint> out;
  for (std::size_t c = 0; c < inits.size(); ++c) {
    MhConfig mh;
    mh.n_iters = per_chain;
    mh.burn_in = cfg.oracle_burn_in;
    mh.thin = cfg.oracle_thin;
    mh.init = inits[c];
    mh.step_scale = step;
    mh.seed = derive_seed(cfg.seed, "oracle", c);
    auto chain = rwmh([&](std::span<const double> th) { return log_posterior(model, data, th); }, mh);
    out.insert(out.end(), chain.retained.begin(), chain.retained.end());
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, Exec exec) {
  stage("config", [&] { cfg.validate(); });
  const std::filesystem::path out = cfg.out_dir;
  stage("config", [&] {
    std::filesystem::create_directories(out);
    write_text(out / "config.txt", config_to_text(cfg));
  });

  ExperimentResult res;
  res.config = cfg;
  const auto model = stage("model", [&] { return make_model(cfg.model, cfg.variance_convention); });
  const std::size_t d = model->dim();

  // Data
  const Dataset data = stage("data", [&] {
    if (!cfg.data_path.empty()) return read_dataset(cfg.data_path);
    Dataset ds = synthesize(cfg.data_generator, cfg.N, cfg.true_theta, derive_seed(cfg.seed, "data"),
                            cfg.variance_convention);
    write_dataset(out / "data.txt", ds);
    write_dataset_sidecar(out / "data.json", cfg.model, cfg.true_theta, cfg.seed);
    return ds;
  });

  std::vector<ShardSpec> shards =
      stage("shard", [&] { return shard_data(data, cfg.K, derive_seed(cfg.seed, "shard"), model); });

  // Scale factors
  res.lambda_plan = stage("lambda", [&] {
    LambdaPlan plan;
    if (cfg.lambda_method == "mle_markov") {
      const MleSummary full = mle_summary_gaussian(data);
      std::vector<MleSummary> per;
      for (const auto& s : shards) per.push_back(mle_summary_gaussian(s.data));
      plan = choose_lambda(full, per);
    } else {
      plan = fixed_lambda_plan(cfg.K, cfg.lambda_value);
    }
    for (std::size_t k = 0; k < shards.size(); ++k) shards[k].lambda = plan.lambdas[k];
    write_lambda_plan(out / "lambda_plan.json", plan);
    return plan;
  });

  const ParamPoint full_init = stage("mcmc", [&] { return default_init(cfg, data); });
  auto make_mh = [&](const ShardSpec& shard, const char* label) {
    const ChainSetup setup = shard_chain_setup(cfg, shard, full_init);
    MhConfig mh;
    mh.n_iters = cfg.n_iters;
    mh.burn_in = cfg.burn_in;
    mh.thin = cfg.thin;
    mh.init = setup.init;
    mh.step_scale = setup.step;
    mh.adapt_during_burnin = cfg.adapt_during_burnin;
    mh.seed = derive_seed(cfg.seed, label, shard.k);
    return mh;
  };

  // Shard chains at lambda_k
  Stopwatch sw;
  std::vector<ChainOutput> chains = stage("mcmc", [&] {
    std::vector<MhConfig> cfgs;
    for (const auto& s : shards) cfgs.push_back(make_mh(s, "chain"));
    return sample_shards(shards, cfgs, exec);
  });
  const double t_mcmc = sw.seconds();

  // Baselines combine lambda = 1 chains; reuse the scaled chains when every lambda is 1.
  const bool all_unit = std::all_of(res.lambda_plan.lambdas.begin(), res.lambda_plan.lambdas.end(),
                                    [](double l) { return l == 1.0; });
  sw = Stopwatch();
  std::vector<ChainOutput> unit_chains;
  if (!all_unit) {
    unit_chains = stage("mcmc", [&] {
      std::vector<ShardSpec> unit = shards;
      std::vector<MhConfig> cfgs;
      for (auto& s : unit) {
        s.lambda = 1.0;
        cfgs.push_back(make_mh(s, "chain_unit"));
      }
      return sample_shards(unit, cfgs, exec);
    });
  }
  const double t_mcmc_unit = all_unit ? t_mcmc : sw.seconds();
  const std::vector<ChainOutput>& base_chains = all_unit ? chains : unit_chains;

  stage("mcmc", [&] {
    for (std::size_t k = 0; k < chains.size(); ++k) {
      write_chain_csv(out / shard_file("chain_k", k + 1), chains[k].retained, d);
      if (cfg.write_traces) write_trace_csv(out / shard_file("trace_k", k + 1), chains[k].trace, d);
      if (!all_unit) {
        write_chain_csv(out / shard_file("chain_unit_k", k + 1), unit_chains[k].retained, d);
      }
    }
  });

  // Forests
  sw = Stopwatch();
  std::vector<Forest> forests = stage("training", [&] {
    std::vector<Forest> fs(shards.size());
    for_each_index(exec, shards.size(), [&](std::size_t k) {
      if (chains[k].trace.empty()) throw ForestError("shard " + std::to_string(k + 1) + " has an empty trace");
      ForestParams fp;
      fp.n_trees = cfg.n_trees;
      fp.min_leaf = cfg.min_leaf;
      fp.subsample_size = cfg.subsample_size;
      fp.seed = derive_seed(cfg.seed, "forest", k + 1);
      fs[k] = train_forest(TrainingSet::from_trace(chains[k].trace), fp, Exec::serial);
    });
    return fs;
  });
  const double t_training = sw.seconds();
  const auto surrogates = forest_surrogates(forests);

  std::vector<std::vector<ParamPoint>> shard_samples;
  for (const auto& c : chains) shard_samples.push_back(c.retained);

  // RF-IS
  sw = Stopwatch();
  res.rfis = stage("weighting", [&] {
    return rf_is(shard_samples, surrogates, res.lambda_plan.lambdas, cfg.truncation_p, exec);
  });
  const double t_weighting = sw.seconds();
  res.warnings = res.rfis.warnings;
  stage("weighting", [&] {
    write_pooled_atoms(out / "pooled_atoms.csv", res.rfis.pooled, d);
    write_ess_report(out / "ess.json", res.rfis.per_shard);
    res.samples["rfis"] = resample(res.rfis.pooled, cfg.n_resample, derive_seed(cfg.seed, "resample_rfis"));
    write_chain_csv(out / "samples_rfis.csv", res.samples["rfis"], d);
  });

  // RF-MH
  sw = Stopwatch();
  stage("rfmh", [&] {
    MhConfig mh;
    mh.n_iters = cfg.rfmh_iters;
    mh.burn_in = cfg.rfmh_burn_in;
    mh.thin = cfg.rfmh_thin;
    mh.init = best_surrogate_point(shard_samples, surrogates, exec);
    mh.step_scale = pooled_step(res.rfis.pooled);
    mh.seed = derive_seed(cfg.seed, "rfmh");
    const auto [lo, hi] = surrogate_box(forests);
    auto chain = rf_mh(surrogates, mh, lo, hi);
    res.samples["rfmh"] = std::move(chain.retained);
  });
  const double t_rfmh = sw.seconds();
  stage("rfmh", [&] {
    write_chain_csv(out / "rfmh_chain.csv", res.samples["rfmh"], d);
    write_chain_csv(out / "samples_rfmh.csv", res.samples["rfmh"], d);
  });

  SubchainSet subchains;
  for (const auto& c : base_chains) subchains.push_back(c.retained);

  // CMC
  sw = Stopwatch();
  res.samples["cmc"] = stage("cmc", [&] { return consensus_combine(subchains, exec); });
  const double t_cmc = sw.seconds();
  stage("cmc", [&] { write_chain_csv(out / "samples_cmc.csv", res.samples["cmc"], d); });

  // Nonparametric KDE product
  sw = Stopwatch();
  res.samples["nonpara"] = stage("nonpara", [&] {
    const auto h = silverman_bandwidth(subchains);
    return kde_product_sample(subchains, h, subchains.front().size(), cfg.nonpara_sweeps,
                              derive_seed(cfg.seed, "nonpara"), cfg.nonpara_burn_sweeps);
  });
  const double t_nonpara = sw.seconds();
  stage("nonpara", [&] { write_chain_csv(out / "samples_nonpara.csv", res.samples["nonpara"], d); });

  // Oracle
  res.samples["oracle"] = stage("oracle", [&] { return oracle_full_mcmc(cfg, data, *model); });
  stage("oracle", [&] { write_chain_csv(out / "samples_oracle.csv", res.samples["oracle"], d); });

  // Reports
  stage("metrics", [&] {
    std::vector<std::vector<double>> lo, hi;
    for (const auto& f : forests) {
      lo.push_back(f.box_lo());
      hi.push_back(f.box_hi());
    }
    res.out_of_box_fraction = out_of_box_fraction(shard_samples, lo, hi);
    std::optional<double> oob;
    if (cfg.write_traces) oob = res.out_of_box_fraction;
    res.metrics_json = compute_metrics_json(cfg, res.samples, res.lambda_plan, oob);
    write_text(out / "metrics.json", res.metrics_json);

    MethodTiming rfis_t, rfmh_t, cmc_t, np_t;
    rfis_t[Stage::mcmc] = t_mcmc;
    rfis_t[Stage::training] = t_training;
    rfis_t[Stage::weighting] = t_weighting;
    rfmh_t[Stage::mcmc] = t_mcmc;
    rfmh_t[Stage::training] = t_training;
    rfmh_t[Stage::combination] = t_rfmh;
    cmc_t[Stage::mcmc] = t_mcmc_unit;
    cmc_t[Stage::combination] = t_cmc;
    np_t[Stage::mcmc] = t_mcmc_unit;
    np_t[Stage::combination] = t_nonpara;
    res.timing.methods = {{"rfis", rfis_t}, {"rfmh", rfmh_t}, {"cmc", cmc_t}, {"nonpara", np_t}};
    emit_timing(res.timing, out);
  });
  return res;
}

std::string recompute_metrics(const std::filesystem::path& dir) {
  const ExperimentConfig cfg = stage("config", [&] {
    return config_from_text(read_text(dir / "config.txt"));
  });
  std::map<std::string, std::vector<ParamPoint>> samples;
  stage("samples", [&] {
    samples["oracle"] = read_chain_csv(dir / "samples_oracle.csv");
    for (const auto& m : method_names()) {
      const auto p = dir / ("samples_" + m + ".csv");
      if (std::filesystem::exists(p)) samples[m] = read_chain_csv(p);
    }
  });
  const LambdaPlan plan = stage("lambda", [&] { return read_lambda_plan(dir / "lambda_plan.json"); });
  std::optional<double> oob;
  stage("bounding boxes", [&] {
    std::vector<std::vector<ParamPoint>> shard_samples;
    std::vector<std::vector<double>> lo, hi;
    for (std::size_t k = 1; k <= cfg.K; ++k) {
      const auto chain = dir / shard_file("chain_k", k);
      const auto trace = dir / shard_file("trace_k", k);
      if (!std::filesystem::exists(chain) || !std::filesystem::exists(trace)) return;
      shard_samples.push_back(read_chain_csv(chain));
      const auto tr = read_trace_csv(trace);
      const std::size_t d = tr.front().theta.size();
      std::vector<double> l(d, std::numeric_limits<double>::infinity());
      std::vector<double> h(d, -std::numeric_limits<double>::infinity());
      for (const auto& e : tr) {
        for (std::size_t j = 0; j < d; ++j) {
          l[j] = std::min(l[j], e.theta[j]);
          h[j] = std::max(h[j], e.theta[j]);
        }
      }
      lo.push_back(std::move(l));
      hi.push_back(std::move(h));
    }
    oob = out_of_box_fraction(shard_samples, lo, hi);
  });
  std::string doc = stage("metrics", [&] { return compute_metrics_json(cfg, samples, plan, oob); });
  stage("metrics", [&] { write_text(dir / "metrics.json", doc); });
  return doc;
}

}  // namespace fdnc
