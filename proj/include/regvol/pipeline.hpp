#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "regvol/errors.hpp"
#include "regvol/instance.hpp"
#include "regvol/io.hpp"
#include "regvol/oracle.hpp"
#include "regvol/relaxation.hpp"
#include "regvol/ridge.hpp"
#include "regvol/sampler.hpp"

namespace regvol {

inline constexpr int kReportSchemaVersion = 1;

struct RunConfig {
  std::string input_path;
  int k = 0;
  double lambda = 0.0;
  double epsilon = 1.0;
  SetMode mode = SetMode::AtMostK;
  std::string method = "all";  // sample | derandomize | baseline | all | oracle
  int l = -1, lprime = -1;     // defaults: d and d-1 once the dimension is known
  std::uint64_t seed = 0;
  int reps = 20;
  std::string report_path;     // empty: caller prints to stdout
  double tol = 1e-8;
  long long oracle_budget = kDefaultEnumBudget;
  std::string rep_table_path;  // optional per-repetition table
};

inline SetMode parse_mode(const std::string& s) {
  if (s == "U_k" || s == "exact" || s == "k") return SetMode::ExactK;
  if (s == "U_<=k" || s == "atmost" || s == "le_k" || s == "U_{<=k}") return SetMode::AtMostK;
  throw ConfigError("unknown mode '" + s + "' (use U_k or U_<=k)");
}

struct MethodStats {
  double mean_objective = 0.0;
  double std_error = 0.0;
  int reps = 0;
};

struct RunReport {
  // instance & config echoes
  std::string input_path;
  int n = 0, d = 0, k = 0;
  double lambda = 0.0, epsilon = 1.0;
  SetMode mode = SetMode::AtMostK;
  std::string method;
  int l = 0, lprime = 0;
  std::uint64_t seed = 0;
  int reps = 0;

  FractionalSolution relaxation;
  double lambda_prime = 0.0, beta = 0.0;
  double theory_ratio = 0.0;  // 1 + eps / sqrt(1 + lambda')
  double k_condition_threshold = 0.0;
  bool k_condition_holds = false;
  bool epsilon_at_boundary = false;

  std::optional<MethodStats> sample_stats;
  std::optional<double> derand_objective;
  bool derand_padded = false;
  std::optional<MethodStats> baseline_stats;

  // Appendix-style comparison columns
  std::optional<double> d_lambda;
  std::optional<double> appendix_reference_per_sigma2;
  std::optional<double> eq_ratio_reference;  // 1 + (d-1)/((k-d+1) sqrt(1+lambda'))

  // oracle section
  bool oracle_attempted = false;
  bool oracle_ran = false;
  std::optional<double> opt_objective;
  std::vector<int> opt_indices;
  std::optional<double> expected_objective;         // E_{mu'}[objective], raw sets
  std::optional<double> expected_padded_objective;  // E over mu' after padding
  std::optional<bool> derand_le_expectation;

  double t_total = 0.0, t_relax = 0.0, t_methods = 0.0, t_oracle = 0.0;

  Report render() const;
};

namespace detail {

inline double now_sec() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline MethodStats summarize(const std::vector<double>& objectives) {
  MethodStats s;
  s.reps = static_cast<int>(objectives.size());
  double sum = 0.0;
  for (double v : objectives) sum += v;
  s.mean_objective = sum / s.reps;
  double var = 0.0;
  for (double v : objectives) var += (v - s.mean_objective) * (v - s.mean_objective);
  if (s.reps > 1) s.std_error = std::sqrt(var / (s.reps - 1) / s.reps);
  return s;
}

// d_lambda = tr(V^T (V V^T + lambda I)^-1 V) = sum gamma_i / (gamma_i + lambda)
inline double effective_dimension(const DesignInstance& inst) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst.V() * inst.V().transpose(),
                                                    Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (int i = 0; i < inst.dim(); ++i) {
    const double g = std::max(es.eigenvalues()[i], 0.0);
    if (g > 0.0 || inst.lambda() > 0.0) acc += g / (g + inst.lambda());
  }
  return acc;
}

}  // namespace detail

// Executes the full selection pipeline on an already-loaded matrix:
// relaxation -> hard-core measure -> sampling / derandomization / baseline,
// with an exact-enumeration section when the instance is small enough.
inline RunReport run_pipeline(const RunConfig& cfg, const Eigen::MatrixXd& V) {
  const double t0 = detail::now_sec();
  const int d = static_cast<int>(V.rows());
  const int n = static_cast<int>(V.cols());

  if (!(cfg.epsilon > 0.0) || cfg.epsilon > 1.0)
    throw ConfigError("epsilon must lie in (0, 1]");
  if (cfg.k < 1 || cfg.k > n)
    throw ConfigError("k must satisfy 1 <= k <= n (n = " + std::to_string(n) + ")");
  if (cfg.reps < 1) throw ConfigError("reps must be positive");
  const int l = cfg.l < 0 ? d : cfg.l;
  const int lp = cfg.lprime < 0 ? l - 1 : cfg.lprime;
  if (lp < 0 || lp >= l || l > d)
    throw ConfigError("need 0 <= lprime < l <= d");
  const bool want_sample = cfg.method == "sample" || cfg.method == "all";
  const bool want_derand = cfg.method == "derandomize" || cfg.method == "all";
  const bool want_baseline = cfg.method == "baseline" || cfg.method == "all";
  const bool want_oracle = cfg.method == "oracle" || cfg.method == "all";
  if (!want_sample && !want_derand && !want_baseline && !want_oracle)
    throw ConfigError("unknown method '" + cfg.method + "'");

  const DesignInstance inst(V, cfg.k, cfg.lambda);
  const GenRatioParams params(lp, l);

  RunReport rep;
  rep.input_path = cfg.input_path;
  rep.n = n;
  rep.d = d;
  rep.k = cfg.k;
  rep.lambda = cfg.lambda;
  rep.epsilon = cfg.epsilon;
  rep.mode = cfg.mode;
  rep.method = cfg.method;
  rep.l = l;
  rep.lprime = lp;
  rep.seed = cfg.seed;
  rep.reps = cfg.reps;
  rep.epsilon_at_boundary = cfg.epsilon == 1.0;

  const double tr0 = detail::now_sec();
  rep.relaxation = solve_relaxation(inst, cfg.tol);
  rep.t_relax = detail::now_sec() - tr0;

  const HardCoreMeasure measure =
      measure_from_fractional(rep.relaxation.x, cfg.epsilon, inst, cfg.mode);
  rep.lambda_prime = measure.lambda_prime;
  rep.beta = measure.beta;
  rep.theory_ratio = 1.0 + cfg.epsilon / std::sqrt(1.0 + measure.lambda_prime);
  rep.k_condition_threshold = 10.0 * d / cfg.epsilon +
                              60.0 / (cfg.epsilon * cfg.epsilon) * std::log(4.0 / cfg.epsilon);
  rep.k_condition_holds = static_cast<double>(cfg.k) >= rep.k_condition_threshold;

  struct RepRow {
    int rep;
    std::uint64_t seed;
    double objective;
    int sampled_size;
    bool padded;
  };
  std::vector<RepRow> rep_rows;

  const double tm0 = detail::now_sec();
  if (want_sample) {
    std::vector<double> objectives;
    objectives.reserve(static_cast<std::size_t>(cfg.reps));
    for (int r = 0; r < cfg.reps; ++r) {
      const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
      const SubsetSelection sel = sample(measure, inst, params, s);
      objectives.push_back(sel.objective);
      rep_rows.push_back({r, s, sel.objective, static_cast<int>(sel.sampled_indices.size()),
                          sel.padded});
    }
    rep.sample_stats = detail::summarize(objectives);
  }
  std::optional<SubsetSelection> derand_sel;
  if (want_derand) {
    derand_sel = derandomize(measure, inst, params);
    rep.derand_objective = derand_sel->objective;
    rep.derand_padded = derand_sel->padded;
  }
  if (want_baseline) {
    std::vector<double> objectives;
    objectives.reserve(static_cast<std::size_t>(cfg.reps));
    for (int r = 0; r < cfg.reps; ++r) {
      const std::uint64_t s = derive_seed(cfg.seed ^ 0xBA5EBA5Eull, static_cast<std::uint64_t>(r));
      objectives.push_back(baseline_reg_volume_sample(inst, s).objective);
    }
    rep.baseline_stats = detail::summarize(objectives);

    rep.d_lambda = detail::effective_dimension(inst);
    const double denom = cfg.k - *rep.d_lambda + 1.0;
    if (denom > 0.0)
      rep.appendix_reference_per_sigma2 =
          static_cast<double>(n) *
          aopt_objective(inst.V() * inst.V().transpose(), cfg.lambda) / denom;
    if (cfg.k >= d)
      rep.eq_ratio_reference =
          1.0 + static_cast<double>(d - 1) /
                    ((cfg.k - d + 1) * std::sqrt(1.0 + measure.lambda_prime));
  }
  rep.t_methods = detail::now_sec() - tm0;

  if (want_oracle) {
    rep.oracle_attempted = true;
    const double to0 = detail::now_sec();
    const long long count = detail::enumeration_count(n, cfg.k, cfg.mode, cfg.oracle_budget);
    if (count > cfg.oracle_budget) {
      if (cfg.method == "oracle")
        throw TooLarge("enumeration needs more than the oracle budget of " +
                       std::to_string(cfg.oracle_budget) + " subsets");
    } else {
      const SubsetSelection opt = brute_force_opt(inst, params, cfg.oracle_budget);
      rep.opt_objective = opt.objective;
      rep.opt_indices = opt.indices;
      const EnumeratedDistribution dist = enumerate_mu_prime(measure, inst, params, cfg.oracle_budget);
      double e_raw = 0.0, e_pad = 0.0;
      for (const auto& [S, p] : dist.support) {
        if (p <= 0.0) continue;
        e_raw += p * detail::selection_objective_or_inf(inst, S, params);
        const std::vector<int> padded =
            (cfg.mode == SetMode::AtMostK && static_cast<int>(S.size()) < cfg.k)
                ? detail::pad_selection(inst, S)
                : S;
        e_pad += p * detail::selection_objective_or_inf(inst, padded, params);
      }
      rep.expected_objective = e_raw;
      rep.expected_padded_objective = e_pad;
      if (derand_sel) {
        const double raw_obj =
            detail::selection_objective_or_inf(inst, derand_sel->sampled_indices, params);
        rep.derand_le_expectation = raw_obj <= e_raw + 1e-12 * std::max(1.0, std::abs(e_raw));
      }
      rep.oracle_ran = true;
    }
    rep.t_oracle = detail::now_sec() - to0;
  }

  if (!cfg.rep_table_path.empty()) {
    std::ofstream out(cfg.rep_table_path);
    if (!out) throw ParseError("cannot open rep table file: " + cfg.rep_table_path);
    out << "rep seed objective sampled_size padded\n";
    for (const auto& r : rep_rows)
      out << r.rep << ' ' << r.seed << ' ' << format_double(r.objective) << ' '
          << r.sampled_size << ' ' << (r.padded ? 1 : 0) << '\n';
  }

  rep.t_total = detail::now_sec() - t0;
  return rep;
}

inline RunReport run_pipeline(const RunConfig& cfg) {
  return run_pipeline(cfg, ingest_vectors(cfg.input_path));
}

inline Report RunReport::render() const {
  Report r;
  r.set("schema_version", kReportSchemaVersion);
  r.set("instance.input", input_path);
  r.set("instance.n", n);
  r.set("instance.d", d);
  r.set("instance.k", k);
  r.set("instance.lambda", lambda);
  r.set("config.epsilon", epsilon);
  r.set("config.mode", std::string(to_string(mode)));
  r.set("config.method", method);
  r.set("config.l", l);
  r.set("config.lprime", lprime);
  r.set("config.seed", static_cast<long long>(seed));
  r.set("config.reps", reps);
  r.set("relaxation.objective", relaxation.objective);
  r.set("relaxation.iterations", relaxation.iterations);
  r.set("relaxation.converged", relaxation.converged);
  r.set("relaxation.stationarity", relaxation.stationarity);
  r.set("measure.lambda_prime", lambda_prime);
  r.set("measure.beta", beta);
  r.set("theory.ratio_bound", theory_ratio);
  r.set("advisory.k_condition_threshold", k_condition_threshold);
  r.set("advisory.k_condition_holds", k_condition_holds);
  r.set("advisory.epsilon_at_boundary", epsilon_at_boundary);
  if (sample_stats) {
    r.set("method.sample.reps", sample_stats->reps);
    r.set("method.sample.mean_objective", sample_stats->mean_objective);
    r.set("method.sample.std_error", sample_stats->std_error);
    r.set("method.sample.ratio_vs_relaxation",
          sample_stats->mean_objective / relaxation.objective);
  }
  if (derand_objective) {
    r.set("method.derandomize.objective", *derand_objective);
    r.set("method.derandomize.padded", derand_padded);
    r.set("method.derandomize.ratio_vs_relaxation", *derand_objective / relaxation.objective);
  }
  if (baseline_stats) {
    r.set("method.baseline.reps", baseline_stats->reps);
    r.set("method.baseline.mean_objective", baseline_stats->mean_objective);
    r.set("method.baseline.std_error", baseline_stats->std_error);
    r.set("comparison.d_lambda", *d_lambda);
    if (appendix_reference_per_sigma2)
      r.set("comparison.reference_bound_per_sigma2", *appendix_reference_per_sigma2);
    if (eq_ratio_reference) r.set("comparison.ratio_reference", *eq_ratio_reference);
  }
  if (oracle_attempted) {
    r.set("oracle.ran", oracle_ran);
    if (oracle_ran) {
      r.set("oracle.opt_objective", *opt_objective);
      r.set("oracle.opt_indices", opt_indices);
      r.set("oracle.expected_objective", *expected_objective);
      r.set("oracle.expected_padded_objective", *expected_padded_objective);
      if (derand_le_expectation) r.set("oracle.derand_le_expectation", *derand_le_expectation);
    }
  }
  r.set("timing.total_sec", t_total);
  r.set("timing.relaxation_sec", t_relax);
  r.set("timing.methods_sec", t_methods);
  r.set("timing.oracle_sec", t_oracle);
  return r;
}

struct BaselineComparison {
  MethodStats ours;
  MethodStats baseline;
  std::optional<double> opt_objective;
  double d_lambda = 0.0;
  std::optional<double> appendix_reference_per_sigma2;
  std::optional<double> eq_ratio_reference;
};

// our sampler vs the z = 1 determinant baseline, with the exact optimum and
// the reference quantities when available
inline BaselineComparison compare_baseline(const RunConfig& cfg, const Eigen::MatrixXd& V) {
  RunConfig full = cfg;
  full.method = "all";
  const RunReport rep = run_pipeline(full, V);
  BaselineComparison out;
  out.ours = *rep.sample_stats;
  out.baseline = *rep.baseline_stats;
  out.opt_objective = rep.opt_objective;
  out.d_lambda = *rep.d_lambda;
  out.appendix_reference_per_sigma2 = rep.appendix_reference_per_sigma2;
  out.eq_ratio_reference = rep.eq_ratio_reference;
  return out;
}

inline BaselineComparison compare_baseline(const RunConfig& cfg) {
  return compare_baseline(cfg, ingest_vectors(cfg.input_path));
}

// CLI exit codes: 2 parse/config, 3 numerical failure, 4 oracle budget
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TooLarge*>(&e)) return 4;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DimensionMismatch*>(&e) ||
      dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const Infeasible*>(&e))
    return 2;
  return 3;
}

}  // namespace regvol
