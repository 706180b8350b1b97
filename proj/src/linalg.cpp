#include "shapemorph/linalg.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "shapemorph/error.hpp"

namespace shapemorph::linalg {

double Cholesky::log_det() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

Eigen::MatrixXd Cholesky::solve_columns(const Eigen::MatrixXd& B) const {
  if (B.rows() != L.rows()) fail(ErrorCode::shape, "right-hand side does not match the factor");
  Eigen::MatrixXd X = B;
  const auto Lv = L.triangularView<Eigen::Lower>();
  Lv.solveInPlace(X);
  Lv.transpose().solveInPlace(X);
  return X;
}

Eigen::VectorXd Cholesky::solve(const Eigen::VectorXd& b) const {
  if (b.size() != L.rows()) fail(ErrorCode::shape, "right-hand side does not match the factor");
  Eigen::VectorXd x = b;
  const auto Lv = L.triangularView<Eigen::Lower>();
  Lv.solveInPlace(x);
  Lv.transpose().solveInPlace(x);
  return x;
}

Eigen::MatrixXd Cholesky::inverse() const {
  return solve_columns(Eigen::MatrixXd::Identity(L.rows(), L.rows()));
}

bool try_cholesky(const Eigen::MatrixXd& C, double jitter, int max_escalations, Cholesky& out) {
  if (C.rows() != C.cols()) fail(ErrorCode::shape, "covariance matrix is not square");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) fail(ErrorCode::domain, "jitter must be non-negative");
  Eigen::LLT<Eigen::MatrixXd> llt;
  double j = jitter;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd Cj = C;
    Cj.diagonal().array() += j;
    llt.compute(Cj);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) {
      out.L = llt.matrixL();
      out.jitter = j;
      return true;
    }
    if (j == 0.0 || attempt >= max_escalations) return false;
    j *= 10.0;
  }
}

Cholesky cholesky(const Eigen::MatrixXd& C, double jitter, int max_escalations) {
  Cholesky out;
  if (!try_cholesky(C, jitter, max_escalations, out))
    fail(ErrorCode::non_psd, "covariance of " + std::to_string(C.rows()) +
                                 " points is not positive definite (initial jitter " + std::to_string(jitter) + ")");
  return out;
}

}  // namespace shapemorph::linalg
