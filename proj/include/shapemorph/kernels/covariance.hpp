#pragma once

#include <Eigen/Core>
#include <vector>

#include "shapemorph/kernels/kernel_spec.hpp"

namespace shapemorph::kernels {

// Point sets are row-per-point, D columns (column-major, i.e. one
// contiguous array per axis).
using PointsRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Sum over terms of
///   SE        s2 exp(-r^2/2),                  r^2 = sum_d ((x_d - x'_d)/l_d)^2
///   periodic  s2 exp(-1/2 sum_d (sin(pi (x_d - x'_d)/p_d)/l_d)^2)
///   matern32  s2 (1 + sqrt3 r) exp(-sqrt3 r)
///   matern52  s2 (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r)
double eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& y);

/// Entry (i, j) = eval(spec, A_i, B_j).
Eigen::MatrixXd cov_matrix(const KernelSpec& spec, const PointsRef& A, const PointsRef& B);

/// Symmetric C(A, A); each unordered pair evaluated once and mirrored.
Eigen::MatrixXd cov_matrix(const KernelSpec& spec, const PointsRef& A);

/// dC/d(log theta_j) for every flattened log-hyperparameter j.
std::vector<Eigen::MatrixXd> grad_log_params(const KernelSpec& spec, const PointsRef& A);

/// g_j = sum_ab W_ab dC_ab/d(log theta_j) for symmetric W (only the upper
/// triangle is read), streamed without
/// materialising the derivative matrices.
Eigen::VectorXd weighted_grad_log_params(const KernelSpec& spec, const PointsRef& A,
                                         const Eigen::MatrixXd& W);

/// Lossless widening of an N x 3 coordinate block to the first `dim` axes.
Eigen::MatrixXd as_points(const Eigen::MatrixX3d& xyz, int dim);

}  // namespace shapemorph::kernels
