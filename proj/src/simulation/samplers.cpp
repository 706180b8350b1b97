#include "shapemorph/simulation/samplers.hpp"

#include <Eigen/Eigenvalues>
#include <limits>
#include <string>

#include "shapemorph/error.hpp"
#include "shapemorph/linalg.hpp"

namespace shapemorph::simulation {

Eigen::VectorXd clamp_spectrum(const Eigen::VectorXd& eigenvalues) {
  Eigen::VectorXd out = eigenvalues.cwiseMax(0.0);
  if (out.size() == 0) return out;
  const double cut = out.maxCoeff() * static_cast<double>(out.size()) * std::numeric_limits<double>::epsilon();
  for (auto& v : out)
    if (v <= cut) v = 0.0;
  return out;
}

void check_dense_limit(Eigen::Index n, std::size_t limit) {
  if (n > 0 && static_cast<std::size_t>(n) > limit)
    fail(ErrorCode::dense_limit, std::to_string(n) + " points exceed the dense sampler limit of " +
                                     std::to_string(limit) + "; use the reduced method");
}

CholeskySampler::CholeskySampler(const kernels::KernelSpec& spec, const kernels::PointsRef& points, double jitter,
                                 std::size_t dense_limit) {
  check_dense_limit(points.rows(), dense_limit);
  if (spec.total_variance() == 0.0) {
    L_ = Eigen::MatrixXd::Zero(points.rows(), 0);
    zero_ = true;
    return;
  }
  L_ = linalg::cholesky(kernels::cov_matrix(spec, points), jitter).L;
}

Eigen::VectorXd CholeskySampler::sample(RandomSource& rng) const {
  if (zero_) return Eigen::VectorXd::Zero(L_.rows());
  const Eigen::VectorXd u = rng.normals(L_.rows());
  return L_.triangularView<Eigen::Lower>() * u;
}

EigenSampler::EigenSampler(const kernels::KernelSpec& spec, const kernels::PointsRef& points, std::size_t dense_limit) {
  check_dense_limit(points.rows(), dense_limit);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernels::cov_matrix(spec, points));
  if (es.info() != Eigen::Success) fail(ErrorCode::non_psd, "eigendecomposition did not converge");
  root_ = es.eigenvectors() * clamp_spectrum(es.eigenvalues()).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd EigenSampler::sample(RandomSource& rng) const {
  const Eigen::VectorXd u = rng.normals(root_.cols());
  return root_ * u;
}

Eigen::VectorXd sample_cholesky(const kernels::KernelSpec& spec, const kernels::PointsRef& points, RandomSource& rng) {
  return CholeskySampler(spec, points, 1e-8 * spec.total_variance()).sample(rng);
}

Eigen::VectorXd sample_eigen(const kernels::KernelSpec& spec, const kernels::PointsRef& points, RandomSource& rng) {
  return EigenSampler(spec, points).sample(rng);
}

}  // namespace shapemorph::simulation
