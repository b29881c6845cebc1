#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "regvol/errors.hpp"
#include "regvol/instance.hpp"
#include "regvol/rng.hpp"
#include "regvol/scaled.hpp"
#include "regvol/symfun.hpp"

namespace regvol {

// Hard-core measure mu(S) ~ z^S over U_k or U_{<=k}, together with the
// quantities it was derived from.
struct HardCoreMeasure {
  Eigen::VectorXd z;
  double beta = 0.0;
  double lambda_prime = 0.0;
  double epsilon = 0.0;
  SetMode mode = SetMode::AtMostK;
  Eigen::VectorXd x;  // fractional solution the weights came from
  int k = 0;

  // hypothesis under which the near-pairwise-independence constant applies
  bool lemma_hypothesis(int d) const {
    return beta > 1.0 && beta <= 2.0 && (beta - 1.0) * k > beta * d;
  }
};

struct SubsetSelection {
  std::vector<int> indices;  // final set, sorted ascending
  double objective = std::numeric_limits<double>::infinity();
  bool padded = false;
  std::vector<int> sampled_indices;  // pre-padding set
};

// z_i = x_i / (beta - x_i) with beta = 1 + (eps/4) sqrt(1 + lambda'),
// lambda' = lambda / ||V(x)V(x)^T||_2.
inline HardCoreMeasure measure_from_fractional(const Eigen::VectorXd& x, double epsilon,
                                               const DesignInstance& inst, SetMode mode) {
  if (!(epsilon > 0.0) || epsilon > 1.0)
    throw DegenerateFractional("epsilon must lie in (0, 1]");
  if (x.size() != inst.size()) throw DegenerateFractional("x has wrong length");
  Eigen::VectorXd xc = x;
  for (int i = 0; i < xc.size(); ++i) {
    if (xc[i] < -1e-12 || xc[i] > 1.0 + 1e-12)
      throw DegenerateFractional("x leaves the unit box");
    xc[i] = std::clamp(xc[i], 0.0, 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst.weighted_gram(xc),
                                                    Eigen::EigenvaluesOnly);
  const double norm2 = std::max(es.eigenvalues().maxCoeff(), 0.0);

  HardCoreMeasure m;
  if (norm2 <= 0.0) {
    if (inst.lambda() > 0.0)
      throw DegenerateFractional("lambda' undefined: ||V(x)V(x)^T|| = 0 with lambda > 0");
    m.lambda_prime = 0.0;
  } else {
    m.lambda_prime = inst.lambda() / norm2;
  }
  m.epsilon = epsilon;
  m.beta = 1.0 + 0.25 * epsilon * std::sqrt(1.0 + m.lambda_prime);
  m.mode = mode;
  m.x = xc;
  m.k = inst.budget();
  m.z = Eigen::VectorXd(xc.size());
  for (int i = 0; i < xc.size(); ++i) m.z[i] = xc[i] / (m.beta - xc[i]);
  return m;
}

// table[k0][d0] = sum over S with |S| = k0, I subset of S, J disjoint from S
// of z^S E_{d0}(V_S^T V_S). Entries are stored as mantissa * 2^slice_exp with
// one exponent per cardinality slice.
struct EspSumTable {
  int n = 0, d = 0, k = 0, l = 0;
  std::vector<int> anchor_in, anchor_out;
  Eigen::MatrixXd mantissa;            // (k+1) x (l+1)
  std::vector<std::int64_t> slice_exp;  // k+1

  ScaledReal scaled(int k0, int d0) const {
    ScaledReal s = ScaledReal::from(mantissa(k0, d0));
    s.exp2 += slice_exp[static_cast<std::size_t>(k0)];
    return s;
  }

  double value(int k0, int d0) const { return scaled(k0, d0).to_double(); }
};

namespace detail {

// Newton divided differences followed by Horner expansion: converts values of
// a degree-(m-1) polynomial at m distinct nodes into monomial coefficients.
inline void polynomial_coefficients(const std::vector<double>& nodes, std::vector<double>& f) {
  const int m = static_cast<int>(nodes.size());
  for (int j = 0; j < m - 1; ++j)
    for (int i = m - 1; i > j; --i) f[i] = (f[i] - f[i - 1]) / (nodes[i] - nodes[i - j - 1]);
  for (int j = m - 2; j >= 0; --j)
    for (int i = j; i < m - 1; ++i) f[i] -= f[i + 1] * nodes[j];
}

// char-poly coefficients of D + u u^T truncated at jmax: coefficients of
// prod(1 + t d_i) and of sum_i u_i^2 prod_{j != i} (1 + t d_j), combined as
// c_j = p_j + q_{j-1}. All terms nonnegative.
inline std::vector<ScaledReal> diag_rank1_coeffs(const Eigen::VectorXd& diag,
                                                 const Eigen::VectorXd& usq, int jmax) {
  std::vector<ScaledReal> p(static_cast<std::size_t>(jmax) + 1, ScaledReal::zero());
  std::vector<ScaledReal> q(static_cast<std::size_t>(jmax) + 1, ScaledReal::zero());
  p[0] = ScaledReal::one();
  int reached = 0;
  for (int m = 0; m < diag.size(); ++m) {
    const ScaledReal zi = ScaledReal::from(diag[m]);
    const ScaledReal u2 = ScaledReal::from(usq[m]);
    reached = std::min(reached + 1, jmax);
    for (int j = reached; j >= 1; --j) q[j] += q[j - 1] * zi + p[j] * u2;
    q[0] += p[0] * u2;
    for (int j = reached; j >= 1; --j) p[j] += p[j - 1] * zi;
  }
  std::vector<ScaledReal> c(static_cast<std::size_t>(jmax) + 1, ScaledReal::zero());
  for (int j = 0; j <= jmax; ++j) {
    c[j] = p[j];
    if (j >= 1) c[j] += q[j - 1];
  }
  return c;
}

}  // namespace detail

// Builds the table through the generating polynomial
//   P(t, s) = sum_{I subset S, S cap J empty} t^|S| z^S det(I_d + s V_S V_S^T)
//           = t^|I| z^I det(M_I(s)) det(I_|A| + t K(s)),
// with M_I(s) = I + s V_I V_I^T, A the free indices, and
// K(s) = diag(sqrt z_A) (I + s V_A^T M_I(s)^-1 V_A) diag(sqrt z_A).
// t-coefficients come from the spectrum of the PSD matrix K(s) (a
// cancellation-free symmetric-function recurrence); the s-direction has
// degree at most d and is interpolated on d+1 positive nodes.
inline EspSumTable esp_sum_table(const Eigen::VectorXd& z, const Eigen::MatrixXd& V,
                                 std::vector<int> I, std::vector<int> J, int k, int l) {
  const int n = static_cast<int>(V.cols());
  const int d = static_cast<int>(V.rows());
  if (z.size() != n) throw InvalidAnchors("z and V disagree on n");
  if (l < 0 || l > d) throw InvalidAnchors("l must lie in [0, d]");
  if (k < 0) throw InvalidAnchors("k must be nonnegative");
  for (int i = 0; i < n; ++i)
    if (z[i] < 0.0) throw DegenerateMeasure("hard-core weights must be nonnegative");

  std::sort(I.begin(), I.end());
  std::sort(J.begin(), J.end());
  std::vector<bool> inI(n, false), inJ(n, false);
  for (int i : I) {
    if (i < 0 || i >= n || inI[i]) throw InvalidAnchors("bad anchor index in I");
    inI[i] = true;
  }
  for (int j : J) {
    if (j < 0 || j >= n || inJ[j]) throw InvalidAnchors("bad anchor index in J");
    if (inI[j]) throw InvalidAnchors("anchors I and J overlap");
    inJ[j] = true;
  }

  EspSumTable T;
  T.n = n;
  T.d = d;
  T.k = k;
  T.l = l;
  T.anchor_in = I;
  T.anchor_out = J;
  T.mantissa = Eigen::MatrixXd::Zero(k + 1, l + 1);
  T.slice_exp.assign(static_cast<std::size_t>(k) + 1, 0);

  const int nI = static_cast<int>(I.size());
  if (nI > k) return T;  // no admissible set

  ScaledReal zI = ScaledReal::one();
  for (int i : I) zI *= ScaledReal::from(z[i]);
  if (zI.is_zero()) return T;

  std::vector<int> A;
  A.reserve(n - nI - static_cast<int>(J.size()));
  for (int i = 0; i < n; ++i)
    if (!inI[i] && !inJ[i]) A.push_back(i);
  const int nA = static_cast<int>(A.size());
  const int jmax = std::min(nA, k - nI);

  Eigen::VectorXd zA(nA);
  Eigen::MatrixXd VA(d, nA);
  for (int a = 0; a < nA; ++a) {
    zA[a] = z[A[static_cast<std::size_t>(a)]];
    VA.col(a) = V.col(A[static_cast<std::size_t>(a)]);
  }
  Eigen::MatrixXd VI(d, nI);
  for (int a = 0; a < nI; ++a) VI.col(a) = V.col(I[static_cast<std::size_t>(a)]);

  // node scale ~ 1 / typical eigenvalue of a size-k subset Gram
  const double typical = V.squaredNorm() * std::max(k, 1) / (static_cast<double>(n) * d);
  const double sigma = 1.0 / std::max(typical, 1e-300);
  const int nodes = d + 1;
  std::vector<double> snodes(static_cast<std::size_t>(nodes));
  for (int j = 0; j < nodes; ++j)
    snodes[static_cast<std::size_t>(j)] =
        sigma * (0.5 + (d > 0 ? 1.5 * j / static_cast<double>(d) : 0.0));

  // node_vals[j][m] = coefficient of t^(nI+m) in P(t, s_j)
  std::vector<std::vector<ScaledReal>> node_vals(static_cast<std::size_t>(nodes));
  for (int jn = 0; jn < nodes; ++jn) {
    const double s = snodes[static_cast<std::size_t>(jn)];
    Eigen::MatrixXd MI = Eigen::MatrixXd::Identity(d, d);
    if (nI > 0) MI.noalias() += s * (VI * VI.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(MI);
    double ldet = 0.0;
    const Eigen::MatrixXd L = llt.matrixL();
    for (int i = 0; i < d; ++i) ldet += 2.0 * std::log(L(i, i));

    std::vector<ScaledReal> coeffs;
    if (nA == 0) {
      coeffs.assign(static_cast<std::size_t>(jmax) + 1, ScaledReal::zero());
      coeffs[0] = ScaledReal::one();
    } else if (d == 1) {
      // K = diag(z_A) + u u^T with u_i^2 = s z_i v_i^2 / M_I
      Eigen::VectorXd usq(nA);
      const double mi = MI(0, 0);
      for (int a = 0; a < nA; ++a) usq[a] = s * zA[a] * VA(0, a) * VA(0, a) / mi;
      coeffs = detail::diag_rank1_coeffs(zA, usq, jmax);
    } else {
      const Eigen::MatrixXd Vt = llt.matrixL().solve(VA);
      Eigen::MatrixXd K = Eigen::MatrixXd::Identity(nA, nA);
      K.noalias() += s * (Vt.transpose() * Vt);
      const Eigen::VectorXd sq = zA.cwiseSqrt();
      K = sq.asDiagonal() * K * sq.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
      Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      coeffs = poly_from_roots_scaled(ev.data(), nA, jmax);
    }

    const ScaledReal prefix = zI * ScaledReal::from_log(ldet);
    auto& out = node_vals[static_cast<std::size_t>(jn)];
    out.resize(static_cast<std::size_t>(jmax) + 1);
    for (int m = 0; m <= jmax; ++m) out[static_cast<std::size_t>(m)] = prefix * coeffs[static_cast<std::size_t>(m)];
  }

  // extract s-coefficients slice by slice
  std::vector<double> f(static_cast<std::size_t>(nodes));
  for (int m = 0; m <= jmax; ++m) {
    const int k0 = nI + m;
    std::int64_t emax = std::numeric_limits<std::int64_t>::min();
    bool any = false;
    for (int jn = 0; jn < nodes; ++jn) {
      const ScaledReal& v = node_vals[static_cast<std::size_t>(jn)][static_cast<std::size_t>(m)];
      if (!v.is_zero()) {
        any = true;
        emax = std::max(emax, v.exp2);
      }
    }
    if (!any) continue;
    for (int jn = 0; jn < nodes; ++jn) {
      const ScaledReal& v = node_vals[static_cast<std::size_t>(jn)][static_cast<std::size_t>(m)];
      const std::int64_t de = v.exp2 - emax;
      f[static_cast<std::size_t>(jn)] = (v.is_zero() || de < -900) ? 0.0 : std::ldexp(v.frac, static_cast<int>(de));
    }
    detail::polynomial_coefficients(snodes, f);
    for (int d0 = 0; d0 <= l; ++d0) T.mantissa(k0, d0) = f[static_cast<std::size_t>(d0)];
    T.slice_exp[static_cast<std::size_t>(k0)] = emax;
  }
  return T;
}

// sum over the mode's cardinalities k0 >= min_k0 and h <= l_use of
// C(d - h, l_use - h) lambda^{l_use - h} table[k0][h]; this is
// sum_S z^S E_{l_use}(V_S V_S^T + lambda I) over the anchored family.
inline ScaledReal regularized_mode_sum(const EspSumTable& T, SetMode mode, double lambda,
                                       int l_use, int min_k0) {
  const int k_lo = std::max(mode == SetMode::ExactK ? T.k : 0, min_k0);
  ScaledReal total = ScaledReal::zero();
  for (int k0 = k_lo; k0 <= T.k; ++k0) {
    for (int h = 0; h <= l_use; ++h) {
      const double mant = T.mantissa(k0, h);
      if (mant == 0.0) continue;
      ScaledReal w;
      if (h == l_use) {
        w = ScaledReal::one();
      } else if (lambda == 0.0) {
        continue;
      } else {
        w = ScaledReal::from_log(std::log(binomial(T.d - h, l_use - h)) +
                                 (l_use - h) * std::log(lambda));
      }
      total += T.scaled(k0, h) * w;
    }
  }
  return total;
}

namespace detail {

inline int lambda_min_slice(double lambda, int l) { return lambda == 0.0 ? l : 0; }

// ratio of two nonnegative scaled sums as a probability
inline double probability_ratio(const ScaledReal& num, const ScaledReal& den) {
  if (den.is_zero() || den.frac < 0.0)
    throw ZeroProbabilityCondition("conditioning event has zero probability");
  if (num.is_zero()) return 0.0;
  double p = (num.frac < 0.0 ? -1.0 : 1.0) * std::exp(std::log(std::abs(num.frac)) -
                                                      std::log(den.frac) +
                                                      M_LN2 * static_cast<double>(num.exp2 - den.exp2));
  if (p < -1e-6 || p > 1.0 + 1e-6)
    throw NumericalInstability("marginal probability " + std::to_string(p) +
                               " outside [0,1] beyond tolerance");
  return std::clamp(p, 0.0, 1.0);
}

inline double selection_objective_or_inf(const DesignInstance& inst, const std::vector<int>& S,
                                         const GenRatioParams& p) {
  const Eigen::VectorXd ev = regvol::detail::psd_eigenvalues(inst.subset_gram(S));
  return gen_ratio_from_eigs(ev, inst.lambda(), p);
}

// Greedy padding: add the unused index with the largest decrease of the
// regularized trace-inverse; with lambda = 0 a floor keeps early rank-deficient
// Grams comparable.
inline std::vector<int> pad_selection(const DesignInstance& inst, std::vector<int> S) {
  const int d = inst.dim();
  std::vector<bool> used(static_cast<std::size_t>(inst.size()), false);
  for (int i : S) used[static_cast<std::size_t>(i)] = true;
  double floor_lambda = inst.lambda();
  if (floor_lambda == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst.V() * inst.V().transpose(),
                                                      Eigen::EigenvaluesOnly);
    floor_lambda = 1e-12 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  }
  Eigen::MatrixXd G = inst.subset_gram(S);
  while (static_cast<int>(S.size()) < inst.budget()) {
    int best = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int i = 0; i < inst.size(); ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      Eigen::MatrixXd Gi = G;
      Gi.noalias() += inst.V().col(i) * inst.V().col(i).transpose();
      Gi.diagonal().array() += floor_lambda;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Gi, Eigen::EigenvaluesOnly);
      double obj = 0.0;
      for (int j = 0; j < d; ++j) obj += 1.0 / std::max(es.eigenvalues()[j], 1e-300);
      if (obj < best_obj) {
        best_obj = obj;
        best = i;
      }
    }
    G.noalias() += inst.V().col(best) * inst.V().col(best).transpose();
    used[static_cast<std::size_t>(best)] = true;
    S.push_back(best);
  }
  std::sort(S.begin(), S.end());
  return S;
}

}  // namespace detail

// Pr[i in S | I subset S, J cap S = empty] under
// mu'(S) ~ z^S E_l(V_S V_S^T + lambda I), l = params.l_hi.
inline double marginal_probability(const HardCoreMeasure& m, const DesignInstance& inst,
                                   std::vector<int> I, const std::vector<int>& J, int i,
                                   const GenRatioParams& params) {
  const int l = params.l_hi;
  if (l > inst.dim()) throw DegenerateSpectrum("l exceeds dimension");
  for (int a : I)
    if (a == i) throw InvalidAnchors("index already conditioned into I");
  for (int a : J)
    if (a == i) throw InvalidAnchors("index already conditioned into J");
  const int min_k0 = detail::lambda_min_slice(inst.lambda(), l);
  const EspSumTable T_den = esp_sum_table(m.z, inst.V(), I, J, inst.budget(), l);
  I.push_back(i);
  const EspSumTable T_num = esp_sum_table(m.z, inst.V(), I, J, inst.budget(), l);
  const ScaledReal den = regularized_mode_sum(T_den, m.mode, inst.lambda(), l, min_k0);
  const ScaledReal num = regularized_mode_sum(T_num, m.mode, inst.lambda(), l, min_k0);
  return detail::probability_ratio(num, den);
}

// Draws S ~ mu'(S) ~ z^S E_l(V_S V_S^T + lambda I) by deciding indices in
// ascending order via exact conditional marginals. In U_{<=k} mode the
// sampled set is padded up to size k.
inline SubsetSelection sample(const HardCoreMeasure& m, const DesignInstance& inst,
                              const GenRatioParams& params, std::uint64_t seed) {
  const int n = inst.size();
  const int k = inst.budget();
  const int l = params.l_hi;
  if (l > inst.dim()) throw DegenerateSpectrum("l exceeds dimension");
  const int min_k0 = detail::lambda_min_slice(inst.lambda(), l);

  EspSumTable cur = esp_sum_table(m.z, inst.V(), {}, {}, k, l);
  {
    const ScaledReal total = regularized_mode_sum(cur, m.mode, inst.lambda(), l, min_k0);
    if (total.is_zero() || total.frac < 0.0)
      throw DegenerateMeasure("measure has no set with positive weight");
  }

  Rng rng(seed);
  std::vector<int> I, J;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(I.size()) == k) {
      J.push_back(i);
      continue;  // remaining indices are all excluded; tables no longer needed
    }
    const int undecided_incl = n - i;
    if (m.mode == SetMode::ExactK && static_cast<int>(I.size()) + undecided_incl <= k) {
      I.push_back(i);  // forced: every remaining index is needed to reach k
      cur = esp_sum_table(m.z, inst.V(), I, J, k, l);
      continue;
    }
    std::vector<int> Inc = I;
    Inc.push_back(i);
    EspSumTable inc = esp_sum_table(m.z, inst.V(), Inc, J, k, l);
    const ScaledReal num = regularized_mode_sum(inc, m.mode, inst.lambda(), l, min_k0);
    const ScaledReal den = regularized_mode_sum(cur, m.mode, inst.lambda(), l, min_k0);
    const double p = detail::probability_ratio(num, den);
    if (rng.uniform() < p) {
      I = std::move(Inc);
      cur = std::move(inc);
    } else {
      J.push_back(i);
      cur = esp_sum_table(m.z, inst.V(), I, J, k, l);
    }
  }

  SubsetSelection sel;
  sel.sampled_indices = I;
  sel.indices = I;
  if (m.mode == SetMode::AtMostK && static_cast<int>(I.size()) < k) {
    sel.indices = detail::pad_selection(inst, I);
    sel.padded = true;
  }
  sel.objective = detail::selection_objective_or_inf(inst, sel.indices, params);
  return sel;
}

// Method of conditional expectations on
//   X(I, J) = sum z^S E_{l'}(Z_S) / sum z^S E_l(Z_S)
// over the anchored families; each step keeps the branch with the smaller
// conditional expectation, ties resolve to exclusion.
inline SubsetSelection derandomize(const HardCoreMeasure& m, const DesignInstance& inst,
                                   const GenRatioParams& params) {
  const int n = inst.size();
  const int k = inst.budget();
  const int l = params.l_hi;
  const int lp = params.l_lo;
  if (l > inst.dim()) throw DegenerateSpectrum("l exceeds dimension");
  const int min_k0 = detail::lambda_min_slice(inst.lambda(), l);
  const double inf = std::numeric_limits<double>::infinity();

  const auto log_cond_expectation = [&](const EspSumTable& T) {
    const ScaledReal den = regularized_mode_sum(T, m.mode, inst.lambda(), l, min_k0);
    if (den.is_zero() || den.frac < 0.0) return inf;
    const ScaledReal num = regularized_mode_sum(T, m.mode, inst.lambda(), lp, min_k0);
    return num.log() - den.log();
  };

  if (log_cond_expectation(esp_sum_table(m.z, inst.V(), {}, {}, k, l)) == inf)
    throw DegenerateMeasure("measure has no set with positive weight");

  std::vector<int> I, J;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(I.size()) == k) {
      J.push_back(i);
      continue;
    }
    std::vector<int> Inc = I, Exc = J;
    Inc.push_back(i);
    Exc.push_back(i);
    const double x_inc = log_cond_expectation(esp_sum_table(m.z, inst.V(), Inc, J, k, l));
    const double x_exc = log_cond_expectation(esp_sum_table(m.z, inst.V(), I, Exc, k, l));
    if (x_inc == inf && x_exc == inf)
      throw DegenerateMeasure("both branches lost all measure");
    if (x_exc <= x_inc)
      J = std::move(Exc);
    else
      I = std::move(Inc);
  }

  SubsetSelection sel;
  sel.sampled_indices = I;
  sel.indices = I;
  if (m.mode == SetMode::AtMostK && static_cast<int>(I.size()) < k) {
    sel.indices = detail::pad_selection(inst, I);
    sel.padded = true;
  }
  sel.objective = detail::selection_objective_or_inf(inst, sel.indices, params);
  return sel;
}

// Appendix-style baseline: S of size exactly k with probability proportional
// to det(V_S V_S^T + lambda I), i.e. z = 1, l = d, mode U_k.
inline SubsetSelection baseline_reg_volume_sample(const DesignInstance& inst,
                                                  std::uint64_t seed) {
  HardCoreMeasure m;
  m.z = Eigen::VectorXd::Ones(inst.size());
  m.x = Eigen::VectorXd::Ones(inst.size());
  m.beta = 1.0;
  m.epsilon = 0.0;
  m.mode = SetMode::ExactK;
  m.k = inst.budget();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst.V() * inst.V().transpose(),
                                                    Eigen::EigenvaluesOnly);
  const double norm2 = std::max(es.eigenvalues().maxCoeff(), 0.0);
  m.lambda_prime = norm2 > 0.0 ? inst.lambda() / norm2 : 0.0;
  return sample(m, inst, GenRatioParams(inst.dim() - 1, inst.dim()), seed);
}

}  // namespace regvol
