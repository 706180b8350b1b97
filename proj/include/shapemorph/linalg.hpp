#pragma once

#include <Eigen/Core>

namespace shapemorph::linalg {

/// Lower Cholesky factor of C + jitter I. The strictly upper triangle of L
/// is zero.
struct Cholesky {
  Eigen::MatrixXd L;
  double jitter = 0.0;  // diagonal actually added

  Eigen::Index size() const { return L.rows(); }
  double log_det() const;

  /// (L L^T)^-1 B.
  Eigen::MatrixXd solve_columns(const Eigen::MatrixXd& B) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  /// Full symmetric (L L^T)^-1.
  Eigen::MatrixXd inverse() const;
};

/// Factorises C + jitter I. On failure the jitter is multiplied by 10, at
/// most max_escalations times; a zero jitter is never escalated. Returns
/// false if every attempt fails.
bool try_cholesky(const Eigen::MatrixXd& C, double jitter, int max_escalations, Cholesky& out);

/// As try_cholesky, throwing Error(non_psd) on failure.
Cholesky cholesky(const Eigen::MatrixXd& C, double jitter, int max_escalations = 6);

}  // namespace shapemorph::linalg
