#pragma once

#include <Eigen/Core>

#include "shapemorph/geometry/deviation.hpp"
#include "shapemorph/geometry/keypoints.hpp"
#include "shapemorph/kernels/covariance.hpp"
#include "shapemorph/linalg.hpp"

namespace shapemorph::simulation {

/// Zero-noise Gaussian process regression through conditioning points
/// X~ with values Z~:  mean(X) = C(X, X~) [C(X~, X~) + jitter I]^-1 Z~.
///
/// A query point whose coordinates equal a conditioning point's exactly
/// also receives the jitter on its cross-covariance entry, so in exact
/// arithmetic the predictor returns that point's value instead of being
/// pulled off by the stabiliser. condition() returns it verbatim; predict()
/// leaves the solve round-off in, which reaches eps |C| |W| and so grows
/// with the conditioning number.
class GprPredictor {
 public:
  /// Throws Error(conditioning) naming duplicated conditioning points, and
  /// Error(non_psd) if the jittered matrix still cannot be factorised.
  GprPredictor(kernels::KernelSpec spec, Eigen::MatrixXd cond_points, double jitter);

  Eigen::Index size() const { return cond_.rows(); }
  double jitter() const { return chol_.jitter; }

  /// [C~ + jitter I]^-1 R with one step of iterative refinement; R has one
  /// row per conditioning point and any number of columns.
  Eigen::MatrixXd weights(const Eigen::MatrixXd& R) const;

  /// C(query, X~) (plus the exact-match nugget) times W, computed in row
  /// blocks so the full cross-covariance is never held at once.
  Eigen::MatrixXd predict(const kernels::PointsRef& query, const Eigen::MatrixXd& W) const;

  /// predict(query, weights(R)) with query rows that coincide with a
  /// conditioning point set to that point's row of R.
  Eigen::MatrixXd condition(const kernels::PointsRef& query, const Eigen::MatrixXd& R) const;

  Eigen::VectorXd mean(const kernels::PointsRef& query, const Eigen::VectorXd& values) const;

 private:
  kernels::KernelSpec spec_;
  Eigen::MatrixXd cond_;
  Eigen::MatrixXd C_;  // jittered conditioning covariance
  linalg::Cholesky chol_;
};

Eigen::VectorXd gpr_mean(const kernels::KernelSpec& spec, const kernels::PointsRef& cond_points,
                         const Eigen::VectorXd& cond_values, const kernels::PointsRef& query, double jitter);

/// Mean deviation field over every mesh node, conditioned on the
/// manipulated key points.
geometry::DeviationField gpr_mean(const kernels::KernelSpec& spec, const geometry::Mesh& mesh,
                                  const geometry::KeyPointSet& keys, const geometry::ManipulatedKeySet& manipulated,
                                  double jitter);

}  // namespace shapemorph::simulation
