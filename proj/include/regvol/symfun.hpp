#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "regvol/errors.hpp"
#include "regvol/scaled.hpp"

namespace regvol {

// Bounds (l_lo, l_hi) of a generalized ratio objective
// (E_{l_lo}(M) / E_{l_hi}(M))^(1/(l_hi - l_lo)); l_hi = d, l_lo = d-1
// recovers the trace-of-inverse objective.
struct GenRatioParams {
  int l_lo = 0;
  int l_hi = 1;

  GenRatioParams() = default;
  GenRatioParams(int lo, int hi) : l_lo(lo), l_hi(hi) {
    if (lo < 0 || lo >= hi)
      throw DegenerateSpectrum("GenRatioParams requires 0 <= l_lo < l_hi");
  }
};

// coeffs[j] = E_j(M), the j-th elementary symmetric polynomial of the
// eigenvalues of a PSD matrix M; coeffs[0] = 1.
struct SpectrumPoly {
  Eigen::VectorXd coeffs;
  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
};

namespace detail {

constexpr double kPsdEigTol = 1e-10;       // relative clamp threshold for eigenvalues
constexpr double kSymmetryTol = 1e-8;      // relative asymmetry tolerance
constexpr double kSingularEigTol = 1e-12;  // rank-deficiency detection

// Symmetry check, symmetrization, eigendecomposition and PSD clamping in one
// place; eigenvalues come back ascending.
inline Eigen::VectorXd psd_eigenvalues(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw NotSymmetric("matrix is not square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale)
    throw NotSymmetric("asymmetry " + std::to_string(asym) + " exceeds tolerance");
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -kPsdEigTol * std::max(top, 1e-300))
      throw NotPositiveSemidefinite("eigenvalue " + std::to_string(ev[i]) +
                                    " below PSD tolerance");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }
  return ev;
}

}  // namespace detail

// e_k(values); e_0 = 1, e_k = 0 for k > n. Total function.
inline double elem_sym_poly(const std::vector<double>& values, int k) {
  const int n = static_cast<int>(values.size());
  if (k < 0) throw DegenerateSpectrum("elem_sym_poly: negative degree");
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
  e[0] = 1.0;
  for (int m = 0; m < n; ++m) {
    const int top = std::min(m + 1, k);
    for (int j = top; j >= 1; --j) e[j] += values[static_cast<std::size_t>(m)] * e[j - 1];
  }
  return e[static_cast<std::size_t>(k)];
}

inline double elem_sym_poly(const Eigen::VectorXd& values, int k) {
  return elem_sym_poly(std::vector<double>(values.data(), values.data() + values.size()), k);
}

// Full vector (E_0(M), ..., E_d(M)) from the symmetric eigendecomposition.
inline SpectrumPoly matrix_esp(const Eigen::MatrixXd& M) {
  const Eigen::VectorXd ev = detail::psd_eigenvalues(M);
  const int d = static_cast<int>(ev.size());
  SpectrumPoly p;
  p.coeffs = Eigen::VectorXd::Zero(d + 1);
  for (int j = 0; j <= d; ++j) p.coeffs[j] = elem_sym_poly(ev, j);
  return p;
}

// E_l(M + aI) assembled from the unshifted spectrum via
// E_l(X + aI) = sum_h C(d-h, l-h) a^(l-h) E_h(X).
inline double regularized_esp(const SpectrumPoly& spectrum, double a, int l) {
  const int d = spectrum.degree();
  if (l < 0 || l > d) throw DegenerateSpectrum("regularized_esp: l out of range");
  double acc = 0.0;
  for (int h = 0; h <= l; ++h) {
    const double w = (h == l) ? 1.0 : binomial(d - h, l - h) * std::pow(a, l - h);
    acc += w * spectrum.coeffs[h];
  }
  return acc;
}

inline double regularized_esp(const Eigen::MatrixXd& M, double a, int l) {
  return regularized_esp(matrix_esp(M), a, l);
}

struct AoptDetail {
  double trace_form = 0.0;  // tr((M + lambda I)^-1)
  double esp_form = 0.0;    // E_{d-1}(M + lambda I) / E_d(M + lambda I)
  double rel_discrepancy = 0.0;
};

// tr((M + lambda I)^-1), computed two ways: directly over the shifted
// eigenvalues and as the ratio E_{d-1}/E_d; the discrepancy between the two
// routes is reported alongside.
inline AoptDetail aopt_objective_detail(const Eigen::MatrixXd& M, double lambda) {
  const Eigen::VectorXd ev = detail::psd_eigenvalues(M);
  const int d = static_cast<int>(ev.size());
  const double top = ev[d - 1];
  if (lambda <= 0.0 && ev[0] <= detail::kSingularEigTol * std::max(top, 1e-300))
    throw SingularMatrix("aopt_objective: lambda = 0 and rank-deficient matrix");
  AoptDetail out;
  for (int i = 0; i < d; ++i) out.trace_form += 1.0 / (ev[i] + lambda);
  const Eigen::VectorXd shifted = ev.array() + lambda;
  const double ed = elem_sym_poly(shifted, d);
  const double edm1 = elem_sym_poly(shifted, d - 1);
  out.esp_form = edm1 / ed;
  out.rel_discrepancy = std::abs(out.trace_form - out.esp_form) /
                        std::max({std::abs(out.trace_form), std::abs(out.esp_form), 1e-300});
  return out;
}

inline double aopt_objective(const Eigen::MatrixXd& M, double lambda) {
  return aopt_objective_detail(M, lambda).trace_form;
}

// (E_{l_lo}(M + lambda I)/E_{l_hi}(M + lambda I))^(1/(l_hi - l_lo)) from a
// given spectrum; +inf when the denominator vanishes.
inline double gen_ratio_from_eigs(const Eigen::VectorXd& eigs, double lambda,
                                  const GenRatioParams& p) {
  const Eigen::VectorXd shifted = eigs.array() + lambda;
  const double num = elem_sym_poly(shifted, p.l_lo);
  const double den = elem_sym_poly(shifted, p.l_hi);
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return std::exp((std::log(num) - std::log(den)) / static_cast<double>(p.l_hi - p.l_lo));
}

inline double gen_ratio_objective(const Eigen::MatrixXd& M, double lambda,
                                  const GenRatioParams& p) {
  const Eigen::VectorXd ev = detail::psd_eigenvalues(M);
  if (p.l_hi > ev.size())
    throw DegenerateSpectrum("gen_ratio_objective: l_hi exceeds dimension");
  const double v = gen_ratio_from_eigs(ev, lambda, p);
  if (!std::isfinite(v))
    throw DegenerateSpectrum("gen_ratio_objective: E_l(M + lambda I) <= 0");
  return v;
}

}  // namespace regvol
