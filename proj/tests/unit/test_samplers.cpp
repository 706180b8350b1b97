#include <gtest/gtest.h>

#include "shapemorph/simulation/samplers.hpp"
#include "support/fields.hpp"
#include "support/test_util.hpp"

using namespace shapemorph;
using namespace shapemorph::simulation;
using kernels::Family;

namespace {

constexpr int kDraws = 5000;

Eigen::MatrixXd twenty_points() { return test::grid_points(5, 4, 4.0, 5.0); }

kernels::KernelSpec field_spec() { return kernels::single_term(Family::squared_exponential, 1.3, Eigen::Vector2d(8.0, 6.0)); }

template <class Sampler>
Eigen::MatrixXd draws(const Sampler& s, std::uint64_t seed) {
  Eigen::MatrixXd out(s.size(), kDraws);
  for (int i = 0; i < kDraws; ++i) {
    RandomSource rng(seed, static_cast<std::uint64_t>(i));
    out.col(i) = s.sample(rng);
  }
  return out;
}

}  // namespace

TEST(Samplers, IdentityCovarianceReturnsRawNormals) {
  // correlation length far below the spacing: off-diagonals underflow to 0
  const auto spec = kernels::single_term(Family::squared_exponential, 1.0, Eigen::Vector2d(1e-3, 1e-3));
  const Eigen::MatrixXd P = twenty_points();
  ASSERT_EQ(kernels::cov_matrix(spec, P), Eigen::MatrixXd::Identity(20, 20));
  const CholeskySampler s(spec, P, 0.0);
  RandomSource a(7, 3), b(7, 3);
  EXPECT_EQ(s.sample(a), b.normals(20));
}

TEST(Samplers, CholeskyCovarianceMatchesKernel) {
  const auto spec = field_spec();
  const Eigen::MatrixXd P = twenty_points();
  const Eigen::MatrixXd S = test::sample_covariance(draws(CholeskySampler(spec, P, 1e-8 * 1.3), 11));
  EXPECT_LE((S - kernels::cov_matrix(spec, P)).cwiseAbs().maxCoeff(), 0.1 * 1.3);
}

TEST(Samplers, EigenMatchesCholesky) {
  const auto spec = field_spec();
  const Eigen::MatrixXd P = twenty_points();
  const Eigen::MatrixXd Sc = test::sample_covariance(draws(CholeskySampler(spec, P, 1e-8 * 1.3), 21));
  const Eigen::MatrixXd Se = test::sample_covariance(draws(EigenSampler(spec, P), 22));
  EXPECT_LE((Sc - Se).cwiseAbs().maxCoeff(), 0.15 * 1.3);
  EXPECT_LE((Se - kernels::cov_matrix(spec, P)).cwiseAbs().maxCoeff(), 0.1 * 1.3);
}

TEST(Samplers, CoincidentPointsGiveConstantField) {
  const auto spec = field_spec();
  const Eigen::MatrixXd P = Eigen::MatrixXd::Constant(12, 2, 3.5);
  const EigenSampler s(spec, P);
  RandomSource rng(5);
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd xi = s.sample(rng);
    EXPECT_LE((xi.array() - xi[0]).abs().maxCoeff(), 1e-12 * (1.0 + std::abs(xi[0])));
  }
}

TEST(Samplers, ZeroVarianceGivesZeroField) {
  const auto spec = field_spec().scaled_to(0.0);
  const Eigen::MatrixXd P = twenty_points();
  RandomSource rng(1);
  EXPECT_EQ(CholeskySampler(spec, P, 0.0).sample(rng), Eigen::VectorXd::Zero(20));
  EXPECT_EQ(EigenSampler(spec, P).sample(rng), Eigen::VectorXd::Zero(20));
}

TEST(Samplers, Deterministic) {
  const auto spec = field_spec();
  const Eigen::MatrixXd P = twenty_points();
  RandomSource a(99, 4), b(99, 4), c(99, 5);
  const Eigen::VectorXd xa = sample_cholesky(spec, P, a);
  EXPECT_EQ(xa, sample_cholesky(spec, P, b));
  EXPECT_NE(xa, sample_cholesky(spec, P, c));
  RandomSource d(3), e(3);
  EXPECT_EQ(sample_eigen(spec, P, d), sample_eigen(spec, P, e));
}

TEST(Samplers, DenseLimit) {
  const auto spec = field_spec();
  const Eigen::MatrixXd P = twenty_points();
  EXPECT_ERROR_CODE(CholeskySampler(spec, P, 0.0, 19), ErrorCode::dense_limit);
  EXPECT_ERROR_CODE(EigenSampler(spec, P, 10), ErrorCode::dense_limit);
  EXPECT_NO_THROW(CholeskySampler(spec, P, 0.0, 20));
}

TEST(Samplers, SpectrumClamp) {
  const Eigen::VectorXd v = clamp_spectrum(Eigen::Vector4d(-1e-14, 1e-17, 0.5, 2.0));
  EXPECT_EQ(v, Eigen::Vector4d(0.0, 0.0, 0.5, 2.0));
}
