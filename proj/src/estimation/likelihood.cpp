#include "shapemorph/estimation/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "shapemorph/error.hpp"
#include "shapemorph/linalg.hpp"

namespace shapemorph::estimation {

LikelihoodEval evaluate_likelihood(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
                                   const Eigen::VectorXd& z, double jitter, bool with_gradient) {
  const Eigen::Index K = points.rows();
  if (z.size() != K)
    fail(ErrorCode::shape, "got " + std::to_string(z.size()) + " deviations for " + std::to_string(K) + " points");
  if (K == 0) fail(ErrorCode::shape, "likelihood needs at least one point");

  const linalg::Cholesky chol = linalg::cholesky(kernels::cov_matrix(spec, points), jitter);
  const Eigen::VectorXd alpha = chol.solve(z);

  LikelihoodEval out;
  out.jitter = chol.jitter;
  out.nll = 0.5 * static_cast<double>(K) * std::log(2.0 * std::numbers::pi) + 0.5 * chol.log_det() +
            0.5 * z.dot(alpha);
  if (!std::isfinite(out.nll)) fail(ErrorCode::non_psd, "likelihood is not finite");
  if (with_gradient) {
    Eigen::MatrixXd W = chol.inverse();
    W.noalias() -= alpha * alpha.transpose();
    out.gradient = 0.5 * kernels::weighted_grad_log_params(spec, points, W);
    out.jitter_slope = 0.5 * W.trace();
  }
  return out;
}

double neg_log_likelihood(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
                          const Eigen::VectorXd& z, double jitter) {
  return evaluate_likelihood(spec, points, z, jitter, false).nll;
}

Eigen::VectorXd nll_gradient(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
                             const Eigen::VectorXd& z, double jitter) {
  return evaluate_likelihood(spec, points, z, jitter, true).gradient;
}

}  // namespace shapemorph::estimation
