#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "shapemorph/kernels/covariance.hpp"

namespace shapemorph::estimation {

struct FitConfig {
  int max_iters = 200;
  double grad_tol = 1e-6;  // on the projected log-space gradient, inf-norm
  int restarts = 4;
  double jitter = 1e-8;    // multiple of the current total variance
  std::uint64_t seed = 0;  // restart initializations
};

void validate(const FitConfig& config);

struct FitResult {
  kernels::KernelSpec spec;
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> restart_nlls;   // final NLL per restart (NaN if it diverged)
  std::vector<double> initial_nlls;   // NLL at each restart's starting point
  std::vector<std::string> warnings;
};

/// Box bounds on the log-parameters, derived from the data: variances within
/// [1e-6, 1e4] x var(z), lengths within [1e-3, 1e2] x axis extent, periods
/// within [1e-2, 1e1] x axis extent.
struct ParamBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

ParamBounds param_bounds(const kernels::KernelSpec& family_template, const kernels::PointsRef& points,
                         const Eigen::VectorXd& z);

/// Maximum-likelihood hyperparameters for the template's families:
/// Polak-Ribiere (PR+) conjugate gradient in log-parameter space with Armijo
/// backtracking, projected onto ParamBounds, best of config.restarts random
/// starts. Only the template's families, dimension and term count are used.
FitResult fit_params(const kernels::PointsRef& points, const Eigen::VectorXd& z,
                     const kernels::KernelSpec& family_template, const FitConfig& config);

}  // namespace shapemorph::estimation
