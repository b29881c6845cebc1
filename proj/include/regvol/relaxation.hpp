#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "regvol/errors.hpp"
#include "regvol/instance.hpp"
#include "regvol/rng.hpp"
#include "regvol/symfun.hpp"

namespace regvol {

struct FractionalSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double stationarity = 0.0;  // ||x - Proj(x - eta0 * grad)||_inf at exit
  double step_scale = 0.0;    // eta0, the 1/L reference step
};

namespace detail {

// Regularizer floor used inside linear solves when lambda = 0 and the
// weighted Gram transiently loses rank; never added to reported objectives.
inline double numeric_floor(const DesignInstance& inst) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      inst.V() * inst.V().transpose(), Eigen::EigenvaluesOnly);
  return 1e-12 * std::max(es.eigenvalues().maxCoeff(), 0.0);
}

inline Eigen::MatrixXd relax_matrix(const DesignInstance& inst, const Eigen::VectorXd& x) {
  if (x.size() != inst.size())
    throw Infeasible("x has wrong length");
  return inst.weighted_gram(x) + inst.lambda() * Eigen::MatrixXd::Identity(inst.dim(), inst.dim());
}

}  // namespace detail

// tr((V(x)V(x)^T + lambda I)^-1) where V(x) has columns sqrt(x_i) v_i
inline double relax_objective(const DesignInstance& inst, const Eigen::VectorXd& x) {
  return aopt_objective(inst.weighted_gram(x), inst.lambda());
}

// component i is -v_i^T (V(x)V(x)^T + lambda I)^-2 v_i
inline Eigen::VectorXd relax_gradient(const DesignInstance& inst, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd A = detail::relax_matrix(inst, x);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularMatrix("relax_gradient: matrix not positive definite", "relaxation");
  const Eigen::MatrixXd W = ldlt.solve(inst.V());  // A^-1 V
  Eigen::VectorXd g(inst.size());
  for (int i = 0; i < inst.size(); ++i) g[i] = -W.col(i).squaredNorm();
  return g;
}

// Euclidean projection onto {x in [0,1]^n : sum x = k}, by bisection on the
// shift parameter of the clipped solution.
inline Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& y, int k) {
  const int n = static_cast<int>(y.size());
  if (k > n || k < 0) throw Infeasible("projection target k > n");
  if (k == 0) return Eigen::VectorXd::Zero(n);
  if (k == n) return Eigen::VectorXd::Ones(n);
  const auto mass = [&](double tau) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::clamp(y[i] - tau, 0.0, 1.0);
    return s;
  };
  double lo = y.minCoeff() - 1.0;  // all coordinates saturate at 1
  double hi = y.maxCoeff();        // all coordinates clamp to 0
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) >= static_cast<double>(k))
      lo = mid;
    else
      hi = mid;
  }
  const double tau = 0.5 * (lo + hi);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = std::clamp(y[i] - tau, 0.0, 1.0);
  return x;
}

namespace detail {

// Objective/gradient with the internal floor; reported values are recomputed
// without it.
struct FlooredEval {
  const DesignInstance& inst;
  double floor;

  double value(const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd A = relax_matrix(inst, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      acc += 1.0 / std::max(es.eigenvalues()[i], floor > 0 ? floor : 1e-300);
    return acc;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd A = relax_matrix(inst, x);
    if (inst.lambda() == 0.0)
      A.diagonal().array() += floor;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::MatrixXd W = ldlt.solve(inst.V());
    Eigen::VectorXd g(inst.size());
    for (int i = 0; i < inst.size(); ++i) g[i] = -W.col(i).squaredNorm();
    return g;
  }
};

// Curvature estimate along feasible directions by power iteration on
// gradient differences; deterministic probe start.
inline double curvature_estimate(const FlooredEval& f, const Eigen::VectorXd& x0,
                                 const Eigen::VectorXd& g0) {
  const int n = static_cast<int>(x0.size());
  Rng rng(0x5D1E6ULL);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = rng.uniform() - 0.5;
  u.array() -= u.mean();  // tangent to the sum constraint
  if (u.norm() < 1e-30) u.setConstant(1.0);
  u.normalize();
  const double h = 1e-6 * std::max(1.0, x0.norm());
  double L = 1e-12;
  for (int it = 0; it < 5; ++it) {
    Eigen::VectorXd xp = x0 + h * u;
    for (int i = 0; i < n; ++i) xp[i] = std::clamp(xp[i], 0.0, 1.0);
    const Eigen::VectorXd dg = (f.gradient(xp) - g0) / h;
    const double nrm = dg.norm();
    if (nrm < 1e-30) break;
    L = std::max(L, nrm);
    u = dg / nrm;
    u.array() -= u.mean();
    const double un = u.norm();
    if (un < 1e-30) break;
    u /= un;
  }
  return L;
}

}  // namespace detail

// Projected gradient with Armijo backtracking from the feasible barycenter
// x = (k/n) 1.
inline FractionalSolution solve_relaxation(const DesignInstance& inst, double tol = 1e-8,
                                           int max_iters = 10000) {
  const int n = inst.size();
  const int k = inst.budget();
  detail::FlooredEval f{inst, detail::numeric_floor(inst)};

  FractionalSolution sol;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, static_cast<double>(k) / n);
  double fx = f.value(x);
  Eigen::VectorXd g = f.gradient(x);

  const double L0 = detail::curvature_estimate(f, x, g);
  const double eta0 = 1.0 / L0;
  double eta = eta0;
  const double c1 = 1e-4;

  int it = 0;
  for (; it < max_iters; ++it) {
    sol.stationarity = (x - project_capped_simplex(x - eta0 * g, k)).cwiseAbs().maxCoeff();
    if (sol.stationarity <= tol) {
      sol.converged = true;
      break;
    }
    // backtracking line search; the projected step direction is a descent
    // direction, so this terminates
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd xn = project_capped_simplex(x - eta * g, k);
      const double pred = g.dot(xn - x);
      const double fn = f.value(xn);
      if (fn <= fx + c1 * pred) {
        if (fn > fx + 1e-12 * (1.0 + std::abs(fx)))
          throw NumericalInstability("relaxation objective increased on accepted step",
                                     "relaxation");
        x = xn;
        fx = fn;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // step size exhausted, report current stationarity
    g = f.gradient(x);
    eta = std::min(eta * 1.3, 1e3 * eta0);
  }
  if (!sol.converged)
    sol.stationarity = (x - project_capped_simplex(x - eta0 * g, k)).cwiseAbs().maxCoeff();
  if (sol.stationarity <= tol) sol.converged = true;

  sol.x = x;
  sol.iterations = it;
  sol.step_scale = eta0;
  sol.objective = relax_objective(inst, x);  // true lambda, no floor
  return sol;
}

}  // namespace regvol
