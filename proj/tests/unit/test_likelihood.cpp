#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <numeric>
#include <random>

#include "shapemorph/estimation/likelihood.hpp"
#include "support/test_util.hpp"

using namespace shapemorph;
using namespace shapemorph::estimation;
using kernels::Family;
using kernels::KernelSpec;
using kernels::single_term;

namespace {

Eigen::MatrixXd random_points(Eigen::Index n, int dim, double scale, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, scale);
  Eigen::MatrixXd P(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) P(i, d) = u(rng);
  return P;
}

std::vector<KernelSpec> specs(int dim) {
  const Eigen::VectorXd l = Eigen::VectorXd::LinSpaced(dim, 3.0, 5.0);
  std::vector<KernelSpec> out;
  for (Family f : {Family::squared_exponential, Family::matern32, Family::matern52})
    out.push_back(single_term(f, 0.7, l));
  out.push_back(single_term(Family::periodic, 0.5, l, Eigen::VectorXd::Constant(dim, 8.0)));
  KernelSpec two = out[2];
  two.terms.push_back(out[3].terms[0]);
  out.push_back(two);
  return out;
}

}  // namespace

TEST(Likelihood, SinglePointValues) {
  const auto s = single_term(Family::squared_exponential, 1.0, Eigen::VectorXd::Ones(1));
  const Eigen::MatrixXd P = Eigen::MatrixXd::Zero(1, 1);
  EXPECT_NEAR(neg_log_likelihood(s, P, Eigen::VectorXd::Zero(1), 0.0), 0.918939, 1e-6);
  EXPECT_NEAR(neg_log_likelihood(s, P, Eigen::VectorXd::Ones(1), 0.0), 1.418939, 1e-6);
}

TEST(Likelihood, SinglePointGradientIsSymbolic) {
  // NLL = ln(2 pi)/2 + ln(s)/2 + z^2/(2 s); d/dlog s = 1/2 - z^2/(2 s).
  const double s2 = 1.7, z = 0.9;
  const auto s = single_term(Family::matern32, s2, Eigen::VectorXd::Constant(2, 4.0));
  const Eigen::VectorXd g = nll_gradient(s, Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Constant(1, z), 0.0);
  EXPECT_NEAR(g[0], 0.5 - z * z / (2 * s2), 1e-14);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 0.0);
}

TEST(Likelihood, TwoPointClosedForm) {
  const auto s = single_term(Family::squared_exponential, 2.0, Eigen::VectorXd::Ones(1));
  Eigen::MatrixXd P(2, 1);
  P << 0.0, 1.0;
  const Eigen::Vector2d z(0.3, -1.1);
  const double a = 2.0, c = 2.0 * std::exp(-0.5), det = a * a - c * c;
  const double quad = (a * z[0] * z[0] - 2 * c * z[0] * z[1] + a * z[1] * z[1]) / det;
  const double want = std::log(2 * M_PI) + 0.5 * std::log(det) + 0.5 * quad;
  EXPECT_NEAR(neg_log_likelihood(s, P, z, 0.0), want, 1e-13);
}

TEST(Likelihood, CoincidentPointsWithoutJitterAreNotPsd) {
  const auto s = single_term(Family::matern52, 1.0, Eigen::VectorXd::Ones(2));
  const Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_ERROR_CODE(neg_log_likelihood(s, P, Eigen::VectorXd::Zero(2), 0.0), ErrorCode::non_psd);
  EXPECT_NO_THROW(neg_log_likelihood(s, P, Eigen::VectorXd::Zero(2), 1e-8));
}

TEST(Likelihood, JitterEscalatesOnFailure) {
  // Nearly collinear long-range SE covariance is numerically singular.
  const auto s = single_term(Family::squared_exponential, 1.0, Eigen::VectorXd::Constant(1, 1e4));
  const Eigen::MatrixXd P = Eigen::VectorXd::LinSpaced(60, 0.0, 1.0);
  const auto ev = evaluate_likelihood(s, P, Eigen::VectorXd::Zero(60), 1e-16, false);
  EXPECT_GT(ev.jitter, 1e-16);
  EXPECT_LE(ev.jitter, 1e-10);
  EXPECT_ERROR_CODE(evaluate_likelihood(s, P, Eigen::VectorXd::Zero(60), 0.0, false), ErrorCode::non_psd);
  EXPECT_TRUE(std::isfinite(ev.nll));
}

TEST(Likelihood, GradientMatchesFiniteDifferences) {
  for (int dim = 1; dim <= 3; ++dim) {
    // Spacing wide enough that C stays well conditioned in every dimension.
    const Eigen::MatrixXd P = random_points(20, dim, 60.0 / dim, 40 + dim);
    std::mt19937_64 rng(dim);
    std::normal_distribution<double> n01;
    Eigen::VectorXd z(20);
    for (auto& v : z) v = n01(rng);
    for (const auto& s : specs(dim)) {
      const double jitter = 1e-4;
      const Eigen::VectorXd g = nll_gradient(s, P, z, jitter);
      const Eigen::VectorXd p = s.log_params();
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double h = 1e-5;
        Eigen::VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        const double fd = (neg_log_likelihood(s.with_log_params(pp), P, z, jitter) -
                           neg_log_likelihood(s.with_log_params(pm), P, z, jitter)) / (2 * h);
        EXPECT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "dim " << dim << " param " << k;
      }
    }
  }
}

TEST(Likelihood, DiagonalCovarianceVarianceGradient) {
  // Points far apart relative to the length give C = s2 I.
  const double s2 = 0.8, jitter = 0.05;
  const auto s = single_term(Family::squared_exponential, s2, Eigen::VectorXd::Ones(1));
  const Eigen::MatrixXd P = Eigen::VectorXd::LinSpaced(7, 0.0, 600.0);
  const Eigen::VectorXd g = nll_gradient(s, P, Eigen::VectorXd::Zero(7), jitter);
  EXPECT_NEAR(g[0], 7.0 / 2.0 * s2 / (s2 + jitter), 1e-14);
}

TEST(Likelihood, PermutationInvariant) {
  const Eigen::MatrixXd P = random_points(15, 3, 10.0, 3);
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(15, -1.0, 2.0);
  std::vector<int> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(4));
  Eigen::MatrixXd Pp(15, 3);
  Eigen::VectorXd zp(15);
  for (int i = 0; i < 15; ++i) Pp.row(i) = P.row(perm[static_cast<std::size_t>(i)]), zp[i] = z[perm[static_cast<std::size_t>(i)]];
  for (const auto& s : specs(3))
    {
    const double a = neg_log_likelihood(s, P, z, 1e-8);
    EXPECT_NEAR(a, neg_log_likelihood(s, Pp, zp, 1e-8), 1e-12 * std::abs(a));
  }
}

TEST(Likelihood, RejectsSizeMismatch) {
  const auto s = single_term(Family::matern52, 1.0, Eigen::VectorXd::Ones(2));
  EXPECT_ERROR_CODE(neg_log_likelihood(s, Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(2), 0.0), ErrorCode::shape);
}
