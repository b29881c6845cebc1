#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "regvol/errors.hpp"
#include "regvol/instance.hpp"
#include "regvol/sampler.hpp"
#include "regvol/scaled.hpp"
#include "regvol/symfun.hpp"

namespace regvol {

inline constexpr long long kDefaultEnumBudget = 2'000'000;

struct EnumeratedDistribution {
  std::vector<std::pair<std::vector<int>, double>> support;
  SetMode mode = SetMode::AtMostK;
};

namespace detail {

inline long long count_combinations(int n, int k, long long cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long c = 1;
  for (int i = 1; i <= k; ++i) {
    // C(n,k) = prod (n-k+i)/i, exact at every step
    if (c > cap * i / std::max(n - k + i, 1) + 1) return cap + 1;
    c = c * (n - k + i) / i;
    if (c > cap) return cap + 1;
  }
  return c;
}

inline long long enumeration_count(int n, int k, SetMode mode, long long cap) {
  if (mode == SetMode::ExactK) return count_combinations(n, k, cap);
  long long total = 0;
  for (int j = 0; j <= k; ++j) {
    total += count_combinations(n, j, cap);
    if (total > cap) return cap + 1;
  }
  return total;
}

template <typename Fn>
void for_each_combination(int n, int k, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(idx);
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

template <typename Fn>
void for_each_subset(int n, int k, SetMode mode, Fn&& fn) {
  const int lo = (mode == SetMode::ExactK) ? k : 0;
  for (int j = lo; j <= k; ++j) {
    if (j == 0) {
      std::vector<int> empty;
      fn(empty);
      continue;
    }
    for_each_combination(n, j, fn);
  }
}

// E_l(V_S V_S^T + lambda I) from the subset Gram spectrum
inline double subset_shifted_esp(const DesignInstance& inst, const std::vector<int>& S,
                                 double lambda, int l) {
  const Eigen::VectorXd ev = psd_eigenvalues(inst.subset_gram(S));
  return elem_sym_poly(Eigen::VectorXd(ev.array() + lambda), l);
}

inline ScaledReal log_weight(const Eigen::VectorXd& z, const std::vector<int>& S) {
  ScaledReal w = ScaledReal::one();
  for (int i : S) w *= ScaledReal::from(z[i]);
  return w;
}

}  // namespace detail

// Exact normalized table of mu'(S) ~ z^S E_l(V_S V_S^T + lambda I) over the
// mode's family. Every admissible set appears, including zero-probability
// ones.
inline EnumeratedDistribution enumerate_mu_prime(const HardCoreMeasure& m,
                                                 const DesignInstance& inst,
                                                 const GenRatioParams& params,
                                                 long long budget = kDefaultEnumBudget) {
  const int n = inst.size();
  const int k = inst.budget();
  if (detail::enumeration_count(n, k, m.mode, budget) > budget)
    throw TooLarge("enumeration budget exceeded");
  EnumeratedDistribution dist;
  dist.mode = m.mode;
  std::vector<ScaledReal> weights;
  ScaledReal total = ScaledReal::zero();
  detail::for_each_subset(n, k, m.mode, [&](const std::vector<int>& S) {
    const double esp = detail::subset_shifted_esp(inst, S, inst.lambda(), params.l_hi);
    const ScaledReal w = detail::log_weight(m.z, S) * ScaledReal::from(std::max(esp, 0.0));
    dist.support.emplace_back(S, 0.0);
    weights.push_back(w);
    total += w;
  });
  if (total.is_zero()) throw DegenerateMeasure("all enumeration weights vanish");
  const double lt = total.log();
  for (std::size_t i = 0; i < weights.size(); ++i)
    dist.support[i].second = weights[i].is_zero() ? 0.0 : std::exp(weights[i].log() - lt);
  return dist;
}

// Exact minimizer of the generalized ratio objective over U_k.
inline SubsetSelection brute_force_opt(const DesignInstance& inst, const GenRatioParams& params,
                                       long long budget = kDefaultEnumBudget) {
  const int n = inst.size();
  const int k = inst.budget();
  if (detail::count_combinations(n, k, budget) > budget)
    throw TooLarge("enumeration budget exceeded");
  SubsetSelection best;
  detail::for_each_combination(n, k, [&](const std::vector<int>& S) {
    const double obj = detail::selection_objective_or_inf(inst, S, params);
    if (best.indices.empty() || obj < best.objective) {
      best.indices = S;
      best.objective = obj;
    }
  });
  best.sampled_indices = best.indices;
  return best;
}

// ---- near-pairwise independence ----

struct NearPairwiseCert {
  double c_measured = 0.0;
  double alpha = 0.0;
  std::vector<int> witness_T, witness_R;
  double c_lemma = std::numeric_limits<double>::quiet_NaN();
  bool hypothesis_ok = false;  // beta in (1,2] and (beta-1)k > beta d
  bool valid = false;          // hypothesis holds and c_measured <= c_lemma
};

namespace detail {

// Pr_{S ~ mu}[S >= T] for the hard-core measure mu(S) ~ z^S over the mode,
// via elementary symmetric sums: z^T sum_{k0} e_{k0-|T|}(z off T).
inline ScaledReal hardcore_superset_mass(const Eigen::VectorXd& z, SetMode mode, int k,
                                         const std::vector<int>& T) {
  const int n = static_cast<int>(z.size());
  const int t = static_cast<int>(T.size());
  if (t > k) return ScaledReal::zero();
  std::vector<bool> inT(static_cast<std::size_t>(n), false);
  for (int i : T) inT[static_cast<std::size_t>(i)] = true;
  std::vector<double> rest;
  rest.reserve(static_cast<std::size_t>(n - t));
  for (int i = 0; i < n; ++i)
    if (!inT[static_cast<std::size_t>(i)]) rest.push_back(z[i]);
  const int jmax = std::min(static_cast<int>(rest.size()), k - t);
  const auto e = poly_from_roots_scaled(rest.data(), static_cast<int>(rest.size()), jmax);
  ScaledReal acc = ScaledReal::zero();
  if (mode == SetMode::ExactK) {
    if (k - t <= jmax) acc = e[static_cast<std::size_t>(k - t)];
  } else {
    for (int j = 0; j <= jmax; ++j) acc += e[static_cast<std::size_t>(j)];
  }
  return log_weight(z, T) * acc;
}

template <typename MarginalFn>
NearPairwiseCert certify_from_marginals(MarginalFn&& superset_mass, const Eigen::VectorXd& x,
                                        double alpha, int d_limit, int n, double beta, int k) {
  std::vector<int> admissible;
  for (int i = 0; i < n; ++i)
    if (x[i] > 0.0) admissible.push_back(i);
  const int na = static_cast<int>(admissible.size());

  struct Cand {
    std::vector<int> set;
    double log_mass;
    double log_x;
  };
  std::vector<Cand> cands;
  for (int size = 0; size <= std::min(d_limit, na); ++size) {
    for_each_subset(na, size, SetMode::ExactK, [&](const std::vector<int>& pos) {
      std::vector<int> T;
      T.reserve(pos.size());
      double lx = 0.0;
      for (int p : pos) {
        T.push_back(admissible[static_cast<std::size_t>(p)]);
        lx += std::log(x[admissible[static_cast<std::size_t>(p)]]);
      }
      const ScaledReal mass = superset_mass(T);
      if (mass.is_zero())
        throw ZeroSupport("Pr[S >= R] = 0 for admissible R with x^R > 0");
      cands.push_back({std::move(T), mass.log(), lx});
    });
  }

  NearPairwiseCert cert;
  cert.alpha = alpha;
  double best = -std::numeric_limits<double>::infinity();
  const double la = std::log(alpha);
  for (const auto& T : cands) {
    for (const auto& R : cands) {
      // log of Pr[>=T]/Pr[>=R] * x^R/x^T * alpha^(|T|-|R|)
      const double v = T.log_mass - R.log_mass + R.log_x - T.log_x +
                       la * static_cast<double>(T.set.size()) -
                       la * static_cast<double>(R.set.size());
      if (v > best) {
        best = v;
        cert.witness_T = T.set;
        cert.witness_R = R.set;
      }
    }
  }
  cert.c_measured = std::exp(best);

  cert.hypothesis_ok = beta > 1.0 && beta <= 2.0 &&
                       (beta - 1.0) * k > beta * static_cast<double>(d_limit) &&
                       std::abs(alpha - beta) <= 1e-12 * std::max(1.0, beta);
  if (cert.hypothesis_ok) {
    const double num = (beta - 1.0) * k - beta * d_limit;
    cert.c_lemma = 1.0 / (1.0 - std::exp(-num * num / (3.0 * beta * k)));
    cert.valid = cert.c_measured <= cert.c_lemma * (1.0 + 1e-9);
  }
  return cert;
}

}  // namespace detail

// c_measured = smallest c for which mu is (c, alpha)-near-pairwise
// independent with respect to x over anchor sets of size <= d_limit;
// marginals come from exact symmetric-function sums, so instances far beyond
// the subset-enumeration budget (large n, small d) are certifiable.
inline NearPairwiseCert certify_near_pairwise(const HardCoreMeasure& mu, const Eigen::VectorXd& x,
                                              double alpha, int d_limit) {
  return detail::certify_from_marginals(
      [&](const std::vector<int>& T) {
        return detail::hardcore_superset_mass(mu.z, mu.mode, mu.k, T);
      },
      x, alpha, d_limit, static_cast<int>(mu.z.size()), mu.beta, mu.k);
}

inline NearPairwiseCert certify_near_pairwise(const EnumeratedDistribution& mu,
                                              const Eigen::VectorXd& x, double alpha, int d_limit,
                                              double beta = 0.0, int k = 0) {
  const int n = static_cast<int>(x.size());
  return detail::certify_from_marginals(
      [&](const std::vector<int>& T) {
        double p = 0.0;
        for (const auto& [S, prob] : mu.support) {
          if (std::includes(S.begin(), S.end(), T.begin(), T.end())) p += prob;
        }
        return ScaledReal::from(p);
      },
      x, alpha, d_limit, n, beta, k);
}

// ---- proved-claim checks ----

struct Theorem43Report {
  double lhs = 0.0;  // E_{mu'}[ E_{d-1}(Z_S)/E_d(Z_S) ]
  double rhs = 0.0;  // c * alpha * ratio at V(x)V(x)^T + alpha lambda I
  bool holds = false;
};

inline Theorem43Report check_theorem_43(const HardCoreMeasure& m, const DesignInstance& inst,
                                        double c, double alpha,
                                        long long budget = kDefaultEnumBudget) {
  const int d = inst.dim();
  const GenRatioParams aparams(d - 1, d);
  const EnumeratedDistribution dist = enumerate_mu_prime(m, inst, aparams, budget);
  Theorem43Report rep;
  for (const auto& [S, p] : dist.support) {
    if (p <= 0.0) continue;
    const Eigen::VectorXd ev = detail::psd_eigenvalues(inst.subset_gram(S));
    double ratio = 0.0;
    for (int i = 0; i < d; ++i) ratio += 1.0 / (ev[i] + inst.lambda());
    rep.lhs += p * ratio;
  }
  rep.rhs = c * alpha * aopt_objective(inst.weighted_gram(m.x), alpha * inst.lambda());
  rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-9) + 1e-12;
  return rep;
}

// k >= 2 beta d/(beta-1) + 3 beta/(beta-1)^2 log(1/eps')
// implies exp(-((beta-1)k - beta d)^2 / (3 beta k)) <= eps'.
inline bool check_claim_62(double eps_prime, double beta, int k, int d) {
  if (!(eps_prime > 0.0) || !(beta > 1.0))
    throw DegenerateSpectrum("claim 6.2 requires eps' > 0 and beta > 1");
  const double threshold =
      2.0 * beta * d / (beta - 1.0) +
      3.0 * beta / ((beta - 1.0) * (beta - 1.0)) * std::log(1.0 / eps_prime);
  if (static_cast<double>(k) < threshold) return true;  // hypothesis not met
  const double num = (beta - 1.0) * k - beta * d;
  return std::exp(-num * num / (3.0 * beta * k)) <= eps_prime * (1.0 + 1e-12);
}

// E_{d-1}(M + beta lambda I)/E_d(M + beta lambda I)
//   <= (1 + lambda/||M||) / (1 + beta lambda/||M||) * same ratio at lambda.
inline bool check_claim_63(const Eigen::MatrixXd& M, double beta, double lam) {
  if (beta < 0.0 || lam < 0.0)
    throw DegenerateSpectrum("claim 6.3 requires beta, lambda >= 0");
  const Eigen::VectorXd ev = detail::psd_eigenvalues(M);
  const double norm2 = ev.maxCoeff();
  if (norm2 <= 0.0) throw DegenerateSpectrum("claim 6.3 requires ||M|| > 0");
  double lhs = 0.0, base = 0.0;
  for (int i = 0; i < ev.size(); ++i) {
    lhs += 1.0 / (ev[i] + beta * lam);
    base += 1.0 / (ev[i] + lam);
  }
  const double rhs = (1.0 + lam / norm2) / (1.0 + beta * lam / norm2) * base;
  return lhs <= rhs * (1.0 + 1e-12);
}

struct ChernoffReport {
  bool applicable = false;
  bool holds = true;  // vacuous when not applicable
  double tail = 0.0;
  double bound = 0.0;
  std::string reason;
};

// Exact Poisson-binomial tail against the Chernoff form used in the
// near-pairwise-independence proof: with Y = sum_{i not in R} Ber(x_i/beta),
//   Pr[Y > k - |R|] <= exp(-((beta-1)k + x(R) - beta |R|)^2 / (3 beta (k - x(R)))).
inline ChernoffReport check_chernoff_35(const Eigen::VectorXd& x, const std::vector<int>& R,
                                        double beta, int k) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i)
    if (x[i] < -1e-12 || x[i] > 1.0 + 1e-12)
      throw DegenerateSpectrum("x must lie in [0,1]^n");
  ChernoffReport rep;
  std::vector<bool> inR(static_cast<std::size_t>(n), false);
  double xR = 0.0;
  for (int i : R) {
    inR[static_cast<std::size_t>(i)] = true;
    xR += x[i];
  }
  const double dev = (beta - 1.0) * k + xR - beta * static_cast<double>(R.size());
  if (k - xR <= 1e-12) {
    rep.reason = "degenerate: x(R) = k leaves no mass outside R";
    return rep;
  }
  if (dev <= 0.0) {
    rep.reason = "threshold below the mean; Chernoff direction not applicable";
    return rep;
  }
  rep.applicable = true;
  rep.bound = std::exp(-dev * dev / (3.0 * beta * (k - xR)));

  // exact distribution of Y by dynamic programming over items
  std::vector<double> dp(1, 1.0);
  for (int i = 0; i < n; ++i) {
    if (inR[static_cast<std::size_t>(i)]) continue;
    const double p = std::clamp(x[i], 0.0, 1.0) / beta;
    dp.push_back(0.0);
    for (int j = static_cast<int>(dp.size()) - 1; j >= 1; --j)
      dp[static_cast<std::size_t>(j)] = dp[static_cast<std::size_t>(j)] * (1.0 - p) +
                                        dp[static_cast<std::size_t>(j - 1)] * p;
    dp[0] *= (1.0 - p);
  }
  const int threshold = k - static_cast<int>(R.size());
  for (int j = threshold + 1; j < static_cast<int>(dp.size()); ++j)
    rep.tail += dp[static_cast<std::size_t>(j)];
  rep.holds = rep.tail <= rep.bound * (1.0 + 1e-12) + 1e-15;
  return rep;
}

// ---- exact-rational enumeration ----

using Rational = boost::multiprecision::cpp_rational;
using RationalMatrix = std::vector<std::vector<Rational>>;  // row-major

namespace exact {

inline Rational det(RationalMatrix A) {
  const int n = static_cast<int>(A.size());
  Rational result = 1;
  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    for (int r = col; r < n; ++r) {
      if (A[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] != 0) {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) return 0;
    if (pivot != col) {
      std::swap(A[static_cast<std::size_t>(pivot)], A[static_cast<std::size_t>(col)]);
      result = -result;
    }
    const Rational& pv = A[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    result *= pv;
    for (int r = col + 1; r < n; ++r) {
      const Rational factor = A[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] / pv;
      if (factor == 0) continue;
      for (int c = col; c < n; ++c)
        A[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
            factor * A[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
    }
  }
  return result;
}

inline Rational binomial_rat(int n, int k) {
  if (k < 0 || k > n) return 0;
  boost::multiprecision::cpp_int num = 1, den = 1;
  for (int i = 1; i <= k; ++i) {
    num *= (n - k + i);
    den *= i;
  }
  return Rational(num) / Rational(den);
}

// E_h(V_S V_S^T) = sum over T subset S, |T| = h, of det(V_T^T V_T)
inline Rational gram_esp(const RationalMatrix& V, const std::vector<int>& S, int h) {
  if (h == 0) return 1;
  const int d = static_cast<int>(V.size());
  if (h > d || h > static_cast<int>(S.size())) return 0;
  Rational acc = 0;
  detail::for_each_combination(static_cast<int>(S.size()), h, [&](const std::vector<int>& pos) {
    RationalMatrix G(static_cast<std::size_t>(h),
                     std::vector<Rational>(static_cast<std::size_t>(h)));
    for (int a = 0; a < h; ++a) {
      for (int b = 0; b < h; ++b) {
        Rational dot = 0;
        for (int r = 0; r < d; ++r)
          dot += V[static_cast<std::size_t>(r)][static_cast<std::size_t>(S[static_cast<std::size_t>(pos[static_cast<std::size_t>(a)])])] *
                 V[static_cast<std::size_t>(r)][static_cast<std::size_t>(S[static_cast<std::size_t>(pos[static_cast<std::size_t>(b)])])];
        G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = dot;
      }
    }
    acc += det(std::move(G));
  });
  return acc;
}

// E_l(V_S V_S^T + lambda I_d) via the regularized expansion
inline Rational regularized_esp(const RationalMatrix& V, const std::vector<int>& S,
                                const Rational& lambda, int d, int l) {
  Rational acc = 0;
  for (int h = 0; h <= l; ++h) {
    Rational pow = 1;
    for (int e = 0; e < l - h; ++e) pow *= lambda;
    acc += binomial_rat(d - h, l - h) * pow * gram_esp(V, S, h);
  }
  return acc;
}

// mu'(S) ~ z^S E_l(Z_S(lambda)) over the mode, in exact rationals
inline std::vector<std::pair<std::vector<int>, Rational>> enumerate_mu_prime(
    const RationalMatrix& V, const std::vector<Rational>& z, const Rational& lambda, int k,
    int l, SetMode mode, long long budget = kDefaultEnumBudget) {
  const int d = static_cast<int>(V.size());
  const int n = static_cast<int>(z.size());
  if (detail::enumeration_count(n, k, mode, budget) > budget)
    throw TooLarge("enumeration budget exceeded");
  std::vector<std::pair<std::vector<int>, Rational>> out;
  Rational total = 0;
  detail::for_each_subset(n, k, mode, [&](const std::vector<int>& S) {
    Rational w = regularized_esp(V, S, lambda, d, l);
    for (int i : S) w *= z[static_cast<std::size_t>(i)];
    out.emplace_back(S, w);
    total += w;
  });
  if (total == 0) throw DegenerateMeasure("all exact weights vanish");
  for (auto& [S, w] : out) w /= total;
  return out;
}

}  // namespace exact

}  // namespace regvol
