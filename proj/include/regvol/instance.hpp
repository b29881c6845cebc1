#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "regvol/errors.hpp"

namespace regvol {

// Support of the sampling measure: subsets of size exactly k or at most k.
enum class SetMode { ExactK, AtMostK };

inline const char* to_string(SetMode m) {
  return m == SetMode::ExactK ? "U_k" : "U_<=k";
}

// A design selection problem: columns of V are candidate vectors, k is the
// selection budget, lambda the ridge regularizer.
class DesignInstance {
 public:
  DesignInstance(Eigen::MatrixXd V, int k, double lambda)
      : V_(std::move(V)), k_(k), lambda_(lambda) {
    if (V_.rows() < 1) throw Infeasible("instance requires d >= 1");
    if (k_ < 1 || k_ > V_.cols())
      throw Infeasible("budget k must satisfy 1 <= k <= n");
    if (lambda_ < 0.0) throw Infeasible("lambda must be nonnegative");
    if (lambda_ == 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V_);
      if (qr.rank() < V_.rows())
        throw SingularMatrix("lambda = 0 requires V of full row rank", "relaxation");
    }
  }

  const Eigen::MatrixXd& V() const { return V_; }
  int dim() const { return static_cast<int>(V_.rows()); }
  int size() const { return static_cast<int>(V_.cols()); }
  int budget() const { return k_; }
  double lambda() const { return lambda_; }

  // sum_i x_i v_i v_i^T
  Eigen::MatrixXd weighted_gram(const Eigen::VectorXd& x) const {
    return V_ * x.asDiagonal() * V_.transpose();
  }

  // V_S V_S^T for an index set S
  Eigen::MatrixXd subset_gram(const std::vector<int>& S) const {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim(), dim());
    for (int i : S) G.noalias() += V_.col(i) * V_.col(i).transpose();
    return G;
  }

  Eigen::MatrixXd columns(const std::vector<int>& S) const {
    Eigen::MatrixXd C(dim(), static_cast<int>(S.size()));
    for (std::size_t j = 0; j < S.size(); ++j) C.col(static_cast<int>(j)) = V_.col(S[j]);
    return C;
  }

 private:
  Eigen::MatrixXd V_;
  int k_;
  double lambda_;
};

}  // namespace regvol
