#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "regvol/errors.hpp"
#include "regvol/instance.hpp"
#include "regvol/rng.hpp"

namespace regvol {

// Ground truth of the linear model y_i = v_i^T w* + eta_i with
// eta ~ N(0, sigma2 I); X is the prediction matrix (defaults to V).
struct RidgeModel {
  Eigen::VectorXd w_star;
  double sigma2 = 1.0;
  double lam = 0.0;
  std::optional<Eigen::MatrixXd> X;

  const Eigen::MatrixXd& prediction_matrix(const DesignInstance& inst) const {
    return X ? *X : inst.V();
  }
};

struct ErrorDistribution {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

namespace detail {

// One symmetric factorization of Z_S(lambda) = V_S V_S^T + lambda I, reused
// for Z^-1, Z^-2 and traces.
struct ZFactor {
  Eigen::MatrixXd Q;
  Eigen::VectorXd shifted;  // gamma_i + lambda

  ZFactor(const Eigen::MatrixXd& gram, double lam) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Q = es.eigenvectors();
    shifted = es.eigenvalues().cwiseMax(0.0).array() + lam;
    const double top = shifted.maxCoeff();
    if (shifted.minCoeff() <= 1e-12 * std::max(top, 1e-300))
      throw SingularMatrix("Z_S(lambda) is singular", "ridge");
  }

  Eigen::MatrixXd inv() const {
    return Q * shifted.cwiseInverse().asDiagonal() * Q.transpose();
  }
  Eigen::MatrixXd inv2() const {
    return Q * shifted.array().square().inverse().matrix().asDiagonal() * Q.transpose();
  }
  double trace_inv() const { return shifted.cwiseInverse().sum(); }
};

}  // namespace detail

// ridge estimate Z_S(lambda)^-1 V_S y_S
inline Eigen::VectorXd ridge_estimate(const Eigen::MatrixXd& V_S, const Eigen::VectorXd& y_S,
                                      double lam) {
  if (V_S.cols() != y_S.size()) throw DimensionMismatch("V_S and y_S disagree");
  const Eigen::MatrixXd gram = V_S * V_S.transpose();
  detail::ZFactor Z(gram, lam);
  return Z.inv() * (V_S * y_S);
}

// distribution of w_hat_S(lambda) - w*:
//   N(-lambda Z^-1 w*, sigma^2 (Z^-1 - lambda Z^-2))
inline ErrorDistribution model_error_dist(const std::vector<int>& S, const RidgeModel& model,
                                          const DesignInstance& inst) {
  detail::ZFactor Z(inst.subset_gram(S), model.lam);
  ErrorDistribution d;
  d.mean = -model.lam * (Z.inv() * model.w_star);
  d.covariance = model.sigma2 * (Z.inv() - model.lam * Z.inv2());
  return d;
}

// distribution of X^T (w_hat_S(lambda) - w*)
inline ErrorDistribution prediction_error_dist(const std::vector<int>& S, const RidgeModel& model,
                                               const DesignInstance& inst) {
  const Eigen::MatrixXd& X = model.prediction_matrix(inst);
  detail::ZFactor Z(inst.subset_gram(S), model.lam);
  const Eigen::MatrixXd Zi = Z.inv();
  ErrorDistribution d;
  d.mean = -model.lam * (X.transpose() * (Zi * model.w_star));
  d.covariance = model.sigma2 * (X.transpose() * (Zi - model.lam * Z.inv2()) * X);
  return d;
}

// expected squared model and prediction errors:
//   sigma^2 tr(Z^-1) - lambda <Z^-2, sigma^2 I - lambda w* w*^T>
//   sigma^2 tr(X^T Z^-1 X) - lambda <Z^-1 X X^T Z^-1, sigma^2 I - lambda w* w*^T>
inline std::pair<double, double> expected_sq_errors(const std::vector<int>& S,
                                                    const RidgeModel& model,
                                                    const DesignInstance& inst) {
  const Eigen::MatrixXd& X = model.prediction_matrix(inst);
  detail::ZFactor Z(inst.subset_gram(S), model.lam);
  const Eigen::MatrixXd Zi = Z.inv();
  const Eigen::MatrixXd Zi2 = Z.inv2();
  const int d = inst.dim();
  const Eigen::MatrixXd penalty =
      model.sigma2 * Eigen::MatrixXd::Identity(d, d) - model.lam * (model.w_star * model.w_star.transpose());

  const double model_err =
      model.sigma2 * Z.trace_inv() - model.lam * (Zi2.transpose().cwiseProduct(penalty)).sum();

  const Eigen::MatrixXd M = Zi * (X * X.transpose()) * Zi;
  const double pred_err = model.sigma2 * (X.transpose() * Zi * X).trace() -
                          model.lam * (M.transpose().cwiseProduct(penalty)).sum();
  return {model_err, pred_err};
}

// under lambda <= sigma^2/||w*||^2 the expected squared errors are bounded by
// the first-order terms sigma^2 tr(Z^-1) and sigma^2 tr(X^T Z^-1 X)
inline bool check_bound_eq5(const std::vector<int>& S, const RidgeModel& model,
                            const DesignInstance& inst) {
  const double wn = model.w_star.squaredNorm();
  if (wn > 0.0 && model.lam > model.sigma2 / wn) return true;  // hypothesis not met
  const auto [model_err, pred_err] = expected_sq_errors(S, model, inst);
  const Eigen::MatrixXd& X = model.prediction_matrix(inst);
  detail::ZFactor Z(inst.subset_gram(S), model.lam);
  const double first_model = model.sigma2 * Z.trace_inv();
  const double first_pred = model.sigma2 * (X.transpose() * Z.inv() * X).trace();
  const double tol = 1e-9;
  return model_err <= first_model * (1.0 + tol) + tol &&
         pred_err <= first_pred * (1.0 + tol) + tol;
}

struct MonteCarloErrorStats {
  int draws = 0;
  Eigen::VectorXd model_mean;  // empirical mean of w_hat - w*
  Eigen::MatrixXd model_cov;
  Eigen::VectorXd pred_mean;  // empirical mean of X^T (w_hat - w*)
  Eigen::MatrixXd pred_cov;
  Eigen::VectorXd model_mean_se;  // per-component standard errors of the means
  Eigen::VectorXd pred_mean_se;
  double model_sq = 0.0, model_sq_se = 0.0;  // empirical expected squared errors
  double pred_sq = 0.0, pred_sq_se = 0.0;
};

// Simulates the ridge estimator under seeded Gaussian noise. noise_var
// overrides the noise variance actually drawn (the closed forms still use
// model.sigma2), which exercises the Cov[eta] <= sigma^2 I remark.
inline MonteCarloErrorStats monte_carlo_errors(const std::vector<int>& S, const RidgeModel& model,
                                               const DesignInstance& inst, int draws,
                                               std::uint64_t seed, double noise_var = -1.0) {
  const int d = inst.dim();
  const int s = static_cast<int>(S.size());
  const Eigen::MatrixXd V_S = inst.columns(S);
  const Eigen::MatrixXd& X = model.prediction_matrix(inst);
  const int p = static_cast<int>(X.cols());
  detail::ZFactor Z(V_S * V_S.transpose(), model.lam);
  const Eigen::MatrixXd solve_map = Z.inv() * V_S;  // w_hat = solve_map * y
  const double nv = noise_var > 0.0 ? noise_var : model.sigma2;
  const double sd = std::sqrt(nv);
  const Eigen::VectorXd y0 = V_S.transpose() * model.w_star;

  Rng rng(seed);
  Eigen::VectorXd msum = Eigen::VectorXd::Zero(d), msum2 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd mouter = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd psum = Eigen::VectorXd::Zero(p), psum2 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd pouter = Eigen::MatrixXd::Zero(p, p);
  double sq_m = 0.0, sq_m2 = 0.0, sq_p = 0.0, sq_p2 = 0.0;

  Eigen::VectorXd eta(s);
  for (int t = 0; t < draws; ++t) {
    for (int i = 0; i < s; ++i) eta[i] = sd * rng.normal();
    const Eigen::VectorXd err = solve_map * (y0 + eta) - model.w_star;
    const Eigen::VectorXd perr = X.transpose() * err;
    msum += err;
    msum2 += err.cwiseAbs2();
    mouter.noalias() += err * err.transpose();
    psum += perr;
    psum2 += perr.cwiseAbs2();
    pouter.noalias() += perr * perr.transpose();
    const double em = err.squaredNorm(), ep = perr.squaredNorm();
    sq_m += em;
    sq_m2 += em * em;
    sq_p += ep;
    sq_p2 += ep * ep;
  }

  const double N = static_cast<double>(draws);
  MonteCarloErrorStats out;
  out.draws = draws;
  out.model_mean = msum / N;
  out.pred_mean = psum / N;
  out.model_cov = mouter / N - out.model_mean * out.model_mean.transpose();
  out.pred_cov = pouter / N - out.pred_mean * out.pred_mean.transpose();
  out.model_mean_se =
      ((msum2 / N - out.model_mean.cwiseAbs2()).cwiseMax(0.0) / N).cwiseSqrt();
  out.pred_mean_se = ((psum2 / N - out.pred_mean.cwiseAbs2()).cwiseMax(0.0) / N).cwiseSqrt();
  out.model_sq = sq_m / N;
  out.pred_sq = sq_p / N;
  out.model_sq_se = std::sqrt(std::max(sq_m2 / N - out.model_sq * out.model_sq, 0.0) / N);
  out.pred_sq_se = std::sqrt(std::max(sq_p2 / N - out.pred_sq * out.pred_sq, 0.0) / N);
  return out;
}

}  // namespace regvol
