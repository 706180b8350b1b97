#pragma once

#include <Eigen/Core>

#include "shapemorph/kernels/covariance.hpp"

namespace shapemorph::estimation {

struct LikelihoodEval {
  double nll = 0.0;
  Eigen::VectorXd gradient;  // empty unless requested
  double jitter = 0.0;       // diagonal actually added after escalation
  // d nll / d jitter, i.e. tr((C + jitter I)^-1 - alpha alpha^T) / 2; only
  // filled with the gradient.
  double jitter_slope = 0.0;
};

/// NLL = K/2 ln(2 pi) + 1/2 ln|C + jitter I| + 1/2 z^T (C + jitter I)^-1 z on
/// the given points. A failed Cholesky multiplies jitter by 10, at most six
/// times; a zero jitter is never escalated. Throws Error(non_psd) if every
/// attempt fails.
LikelihoodEval evaluate_likelihood(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
                                   const Eigen::VectorXd& z, double jitter, bool with_gradient);

double neg_log_likelihood(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
                          const Eigen::VectorXd& z, double jitter);

/// d NLL / d log theta, jitter held fixed; ordering as KernelSpec::log_params.
Eigen::VectorXd nll_gradient(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
                             const Eigen::VectorXd& z, double jitter);

}  // namespace shapemorph::estimation
