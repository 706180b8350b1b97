#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "shapemorph/estimation/fit.hpp"

namespace shapemorph::estimation {

/// Gaussian over the correlation-length vectors (first kernel term) of a
/// batch of fitted parts.
struct BatchModel {
  Eigen::VectorXd mean;  // mm
  Eigen::MatrixXd cov;   // mm^2, unbiased
  int count = 0;
};

void validate(const BatchModel& model);

BatchModel characterize_batch(const std::vector<FitResult>& fits);

struct AxisTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Welch two-sample, two-tailed t-test per correlation-length axis.
std::vector<AxisTest> compare_batches(const std::vector<FitResult>& a, const std::vector<FitResult>& b);

/// Same test on raw samples.
AxisTest welch_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Template with its first term's lengths drawn from the batch Gaussian,
/// redrawn until all are positive (at most 1000 attempts).
kernels::KernelSpec sample_batch_params(const BatchModel& model, const kernels::KernelSpec& tmpl,
                                        std::uint64_t seed);

}  // namespace shapemorph::estimation
