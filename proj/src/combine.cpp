#include "fdnc/combine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "json.hpp"

#include "fdnc/io.hpp"

namespace fdnc {

std::vector<Surrogate> forest_surrogates(std::span<const Forest> forests) {
  std::vector<Surrogate> out;
  out.reserve(forests.size());
  for (const Forest& f : forests) {
    out.emplace_back([&f](std::span<const double> th) { return f.predict(th); });
  }
  return out;
}

std::vector<Surrogate> exact_surrogates(std::span<const ShardSpec> shards) {
  std::vector<Surrogate> out;
  out.reserve(shards.size());
  for (const ShardSpec& s : shards) {
    out.emplace_back([&s](std::span<const double> th) { return log_gamma(s, th); });
  }
  return out;
}

MleSummary mle_summary_gaussian(const Dataset& data) {
  const std::size_t N = data.size();
  if (N < 2) throw CombineError("MLE summary needs at least two observations");
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) sum += data[i][0];
  const double n = static_cast<double>(N);
  const double mean = sum / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double z = data[i][0] - mean;
    ss += z * z;
  }
  const double var = ss / n;
  if (!(var > 0.0)) throw CombineError("MLE summary: zero sample variance");
  return {{mean, var}, {std::sqrt(var / n), std::sqrt(2.0 * var * var / n)}};
}

LambdaPlan fixed_lambda_plan(std::size_t K, double lambda) {
  if (!(lambda > 0.0)) throw CombineError("fixed lambda must be positive");
  return {"fixed", std::vector<double>(K, lambda), {}};
}

LambdaPlan choose_lambda(const MleSummary& full, std::span<const MleSummary> shards) {
  const std::size_t d = full.theta_hat.size();
  if (full.sigma_hat.size() != d) throw CombineError("MLE summary dimension mismatch");
  for (double s : full.sigma_hat) {
    if (!(s > 0.0)) throw CombineError("sigma_hat must be positive");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  LambdaPlan plan{"mle_markov", {}, {}};
  for (const MleSummary& sk : shards) {
    if (sk.theta_hat.size() != d || sk.sigma_hat.size() != d) {
      throw CombineError("shard MLE summary dimension mismatch");
    }
    std::vector<double> per_dim(d);
    double lam = inf;
    for (std::size_t j = 0; j < d; ++j) {
      if (!(sk.sigma_hat[j] > 0.0)) throw CombineError("sigma_hat must be positive");
      const double shift = sk.theta_hat[j] - full.theta_hat[j];
      const double delta = std::max(std::abs(shift - 2.0 * full.sigma_hat[j]),
                                    std::abs(shift + 2.0 * full.sigma_hat[j]));
      if (delta == 0.0) {
        per_dim[j] = inf;
      } else {
        const double r = sk.sigma_hat[j] / delta;
        per_dim[j] = r * r;
      }
      lam = std::min(lam, per_dim[j]);
    }
    plan.lambdas.push_back(std::isinf(lam) ? 1.0 : lam);
    plan.per_dim_lambdas.push_back(std::move(per_dim));
  }
  return plan;
}

void write_lambda_plan(const std::filesystem::path& path, const LambdaPlan& plan) {
  nlohmann::json j;
  j["method"] = plan.method;
  j["lambdas"] = plan.lambdas;
  auto rows = nlohmann::json::array();
  for (const auto& row : plan.per_dim_lambdas) {
    auto jr = nlohmann::json::array();
    // JSON has no infinity; a centered dimension is written as null.
    for (double v : row) jr.push_back(std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    rows.push_back(std::move(jr));
  }
  j["per_dim_lambdas"] = std::move(rows);
  write_text(path, j.dump(2) + "\n");
}

LambdaPlan read_lambda_plan(const std::filesystem::path& path) {
  try {
    auto j = nlohmann::json::parse(read_text(path));
    LambdaPlan plan;
    plan.method = j.at("method").get<std::string>();
    plan.lambdas = j.at("lambdas").get<std::vector<double>>();
    for (const auto& jr : j.at("per_dim_lambdas")) {
      std::vector<double> row;
      for (const auto& v : jr) {
        row.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
      }
      plan.per_dim_lambdas.push_back(std::move(row));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<double> rf_is_log_weights(std::span<const ParamPoint> samples,
                                      std::span<const Surrogate> surrogates, double lambda_k,
                                      std::size_t k, Exec exec) {
  if (samples.empty()) throw CombineError("no samples to weight");
  if (k >= surrogates.size()) throw CombineError("shard index out of range");
  std::vector<double> out(samples.size());
  auto weigh = [&](std::size_t t) {
    const auto& th = samples[t];
    double s = 0.0;
    double own = 0.0;
    for (std::size_t j = 0; j < surrogates.size(); ++j) {
      const double f = surrogates[j](th);
      s += f;
      if (j == k) own = f;
    }
    out[t] = (s == kNegInf) ? kNegInf : s - lambda_k * own;
  };
  if (exec == Exec::serial) {
    for (std::size_t t = 0; t < samples.size(); ++t) weigh(t);
  } else {
    const auto n = static_cast<long long>(samples.size());
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < n; ++t) weigh(static_cast<std::size_t>(t));
  }
  return out;
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty()) throw CombineError("no weights to normalize");
  double mx = kNegInf;
  for (double v : log_weights) {
    if (std::isnan(v)) throw CombineError("NaN log-weight");
    mx = std::max(mx, v);
  }
  if (mx == kNegInf) throw CombineError("no overlap between shard and product surrogate");
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - mx);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> rf_is_weights(std::span<const ParamPoint> samples,
                                  std::span<const Surrogate> surrogates, double lambda_k,
                                  std::size_t k, Exec exec) {
  return normalize_log_weights(rf_is_log_weights(samples, surrogates, lambda_k, k, exec));
}

Truncation truncate_weights(std::span<const double> weights, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw CombineError("truncation probability must lie in (0, 1]");
  if (weights.empty()) throw CombineError("no weights to truncate");
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  std::size_t kept = order.size();
  double cum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    cum += weights[order[i]];
    if (cum >= p) {
      kept = i + 1;
      break;
    }
  }
  order.resize(kept);
  Truncation t;
  t.kept = kept;
  t.weights.reserve(kept);
  double mass = 0.0;
  for (std::size_t i : order) mass += weights[i];
  for (std::size_t i : order) t.weights.push_back(weights[i] / mass);
  t.order = std::move(order);
  return t;
}

double ess(std::span<const double> w) {
  if (w.empty()) return 0.0;
  const double i = static_cast<double>(w.size());
  double mean = 0.0;
  for (double x : w) mean += i * x;
  mean /= i;
  double var = 0.0;
  for (double x : w) {
    const double z = i * x - mean;
    var += z * z;
  }
  var /= i;
  return i / (1.0 + var);
}

double ess(const WeightedAtoms& atoms) { return ess(atoms.weights); }

WeightedAtoms pool(std::span<const WeightedAtoms> per_shard) {
  WeightedAtoms out;
  double total = 0.0;
  for (std::size_t k = 0; k < per_shard.size(); ++k) {
    const WeightedAtoms& s = per_shard[k];
    if (s.atoms.size() != s.weights.size()) throw CombineError("atoms and weights differ in length");
    const double e = s.ess.value_or(ess(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double w = e * s.weights[i];
      if (!(w > 0.0)) continue;
      out.atoms.push_back(s.atoms[i]);
      out.weights.push_back(w);
      out.source.push_back(s.source.empty() ? k + 1 : s.source[i]);
      total += w;
    }
  }
  if (out.atoms.empty()) throw CombineError("pooled measure has no positive-weight atoms");
  for (double& w : out.weights) w /= total;
  return out;
}

std::vector<ParamPoint> resample(const WeightedAtoms& pooled, std::size_t n, std::uint64_t seed) {
  if (pooled.atoms.empty()) throw CombineError("cannot resample an empty measure");
  std::vector<double> cdf(pooled.weights.size());
  std::partial_sum(pooled.weights.begin(), pooled.weights.end(), cdf.begin());
  const double total = cdf.back();
  Rng rng = make_rng(seed, "resample");
  std::uniform_real_distribution<double> unif(0.0, total);
  std::vector<ParamPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unif(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    out.push_back(pooled.atoms[static_cast<std::size_t>(it - cdf.begin())]);
  }
  return out;
}

RfIsResult rf_is(std::span<const std::vector<ParamPoint>> shard_samples,
                 std::span<const Surrogate> surrogates, std::span<const double> lambdas, double p,
                 Exec exec) {
  const std::size_t K = shard_samples.size();
  if (surrogates.size() != K || lambdas.size() != K) {
    throw CombineError("rf_is needs one surrogate and one lambda per shard");
  }
  RfIsResult res;
  res.per_shard.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> w;
    try {
      w = rf_is_weights(shard_samples[k], surrogates, lambdas[k], k, exec);
    } catch (const CombineError& e) {
      throw CombineError("shard " + std::to_string(k + 1) + ": " + e.what());
    }
    Truncation tr = truncate_weights(w, p);
    WeightedAtoms atoms;
    atoms.atoms.reserve(tr.kept);
    for (std::size_t i : tr.order) atoms.atoms.push_back(shard_samples[k][i]);
    atoms.weights = std::move(tr.weights);
    atoms.source.assign(tr.kept, k + 1);
    atoms.ess = ess(atoms.weights);
    if (tr.kept == 1) {
      res.warnings.push_back("shard " + std::to_string(k + 1) +
                             " kept a single atom; its samples barely overlap the product surrogate");
    }
    res.per_shard.push_back(std::move(atoms));
  }
  res.pooled = pool(res.per_shard);
  return res;
}

ParamPoint best_surrogate_point(std::span<const std::vector<ParamPoint>> shard_samples,
                                std::span<const Surrogate> surrogates, Exec exec) {
  std::vector<const ParamPoint*> pts;
  for (const auto& s : shard_samples) {
    for (const auto& p : s) pts.push_back(&p);
  }
  if (pts.empty()) throw CombineError("no shard samples");
  std::vector<double> val(pts.size());
  for_each_index(exec, pts.size(), [&](std::size_t i) {
    double s = 0.0;
    for (const auto& f : surrogates) s += f(*pts[i]);
    val[i] = s;
  });
  const auto best = std::max_element(val.begin(), val.end()) - val.begin();
  return *pts[static_cast<std::size_t>(best)];
}

ChainOutput rf_mh(std::span<const Surrogate> surrogates, const MhConfig& cfg,
                  std::span<const double> box_lo, std::span<const double> box_hi) {
  if (surrogates.empty()) throw CombineError("rf_mh needs at least one surrogate");
  if (box_lo.size() != box_hi.size()) throw CombineError("box bounds differ in length");
  return rwmh(
      [surrogates, box_lo, box_hi](std::span<const double> th) {
        for (std::size_t j = 0; j < box_lo.size(); ++j) {
          if (th[j] < box_lo[j] || th[j] > box_hi[j]) return kNegInf;
        }
        double s = 0.0;
        for (const auto& f : surrogates) s += f(th);
        return s;
      },
      cfg);
}

std::pair<std::vector<double>, std::vector<double>> surrogate_box(std::span<const Forest> forests) {
  if (forests.empty()) throw CombineError("no forests");
  std::vector<double> lo = forests.front().box_lo(), hi = forests.front().box_hi();
  std::vector<double> ulo = lo, uhi = hi;
  for (const auto& f : forests) {
    for (std::size_t j = 0; j < lo.size(); ++j) {
      lo[j] = std::max(lo[j], f.box_lo()[j]);
      hi[j] = std::min(hi[j], f.box_hi()[j]);
      ulo[j] = std::min(ulo[j], f.box_lo()[j]);
      uhi[j] = std::max(uhi[j], f.box_hi()[j]);
    }
  }
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (lo[j] > hi[j]) return {ulo, uhi};
  }
  return {lo, hi};
}

void write_pooled_atoms(const std::filesystem::path& path, const WeightedAtoms& pooled,
                        std::size_t d) {
  CsvTable t{theta_header(d), {}};
  t.header.push_back("weight");
  t.header.push_back("source_shard");
  t.rows.reserve(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    auto row = pooled.atoms[i];
    row.push_back(pooled.weights[i]);
    row.push_back(pooled.source.empty() ? 0.0 : static_cast<double>(pooled.source[i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

WeightedAtoms read_pooled_atoms(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  const std::size_t wc = t.column("weight");
  const std::size_t sc = t.column("source_shard");
  WeightedAtoms out;
  for (const auto& row : t.rows) {
    ParamPoint th;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c != wc && c != sc) th.push_back(row[c]);
    }
    out.atoms.push_back(std::move(th));
    out.weights.push_back(row[wc]);
    out.source.push_back(static_cast<std::size_t>(row[sc]));
  }
  return out;
}

void write_ess_report(const std::filesystem::path& path, std::span<const WeightedAtoms> per_shard) {
  auto j = nlohmann::json::array();
  for (std::size_t k = 0; k < per_shard.size(); ++k) {
    j.push_back({{"k", k + 1},
                 {"i_k", per_shard[k].size()},
                 {"ess", per_shard[k].ess.value_or(ess(per_shard[k]))}});
  }
  write_text(path, j.dump(2) + "\n");
}

}  // namespace fdnc
