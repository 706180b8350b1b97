#pragma once

#include <Eigen/Core>
#include <cstddef>

#include "shapemorph/kernels/covariance.hpp"
#include "shapemorph/random.hpp"

namespace shapemorph::simulation {

inline constexpr std::size_t kDefaultDenseLimit = 12000;

/// Eigenvalues clamped at zero, with those at or below the round-off level
/// (max * n * machine epsilon) also set to zero.
Eigen::VectorXd clamp_spectrum(const Eigen::VectorXd& eigenvalues);

/// Throws Error(dense_limit) if n exceeds the limit, pointing at the
/// reduced-rank path.
void check_dense_limit(Eigen::Index n, std::size_t limit);

/// Unconditional field xi = L U, L the lower Cholesky factor of
/// C(X, X) + jitter I. The factor is computed once and reused per draw.
class CholeskySampler {
 public:
  CholeskySampler(const kernels::KernelSpec& spec, const kernels::PointsRef& points, double jitter,
                  std::size_t dense_limit = kDefaultDenseLimit);
  Eigen::VectorXd sample(RandomSource& rng) const;
  Eigen::Index size() const { return L_.rows(); }

 private:
  Eigen::MatrixXd L_;
  bool zero_ = false;
};

/// Unconditional field xi = Phi Lambda^1/2 U from the eigendecomposition of
/// C(X, X); eigenvalues below zero are clamped to zero.
class EigenSampler {
 public:
  EigenSampler(const kernels::KernelSpec& spec, const kernels::PointsRef& points,
               std::size_t dense_limit = kDefaultDenseLimit);
  Eigen::VectorXd sample(RandomSource& rng) const;
  Eigen::Index size() const { return root_.rows(); }

 private:
  Eigen::MatrixXd root_;  // Phi Lambda^1/2
};

/// Default jitter 1e-8 x total variance.
Eigen::VectorXd sample_cholesky(const kernels::KernelSpec& spec, const kernels::PointsRef& points, RandomSource& rng);
Eigen::VectorXd sample_eigen(const kernels::KernelSpec& spec, const kernels::PointsRef& points, RandomSource& rng);

}  // namespace shapemorph::simulation
