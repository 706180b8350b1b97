#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "shapemorph/estimation/fit.hpp"
#include "shapemorph/estimation/likelihood.hpp"
#include "support/fields.hpp"
#include "support/test_util.hpp"

using namespace shapemorph;
using namespace shapemorph::estimation;
using kernels::Family;
using kernels::single_term;

TEST(Fit, RecoversSquaredExponentialLengths) {
  const auto truth = single_term(Family::squared_exponential, 1.0, Eigen::Vector2d(30.0, 10.0));
  const Eigen::MatrixXd P = test::grid_points(20, 20, 5.0, 5.0);
  std::vector<double> lx, ly;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::VectorXd z = test::draw_field(truth, P, 100 + seed);
    FitConfig cfg;
    cfg.seed = seed;
    const FitResult r = fit_params(P, z, truth, cfg);
    lx.push_back(r.spec.terms[0].lengths[0]);
    ly.push_back(r.spec.terms[0].lengths[1]);
    for (double init : r.initial_nlls) EXPECT_LE(r.nll, init);
  }
  std::nth_element(lx.begin(), lx.begin() + 5, lx.end());
  std::nth_element(ly.begin(), ly.begin() + 5, ly.end());
  EXPECT_NEAR(lx[5], 30.0, 6.0);
  EXPECT_NEAR(ly[5], 10.0, 2.0);
}

TEST(Fit, ZeroDataDrivesVarianceToLowerBound) {
  const Eigen::MatrixXd P = test::grid_points(5, 4, 2.0, 3.0);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(P.rows());
  const auto tmpl = single_term(Family::matern52, 1.0, Eigen::Vector2d(1, 1));
  const FitResult r = fit_params(P, z, tmpl, FitConfig{});
  const ParamBounds b = param_bounds(tmpl, P, z);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(std::log(r.spec.terms[0].sigma_f2), b.lower[0], 1e-12);
}

TEST(Fit, ResultRespectsBoundsAndImproves) {
  const auto truth = single_term(Family::matern32, 0.5, Eigen::Vector3d(8.0, 5.0, 3.0));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  Eigen::MatrixXd P(60, 3);
  for (Eigen::Index i = 0; i < 60; ++i) P.row(i) << u(rng), u(rng), u(rng) / 3.0;
  const Eigen::VectorXd z = test::draw_field(truth, P, 3);
  FitConfig cfg;
  cfg.restarts = 3;
  const FitResult r = fit_params(P, z, truth, cfg);
  EXPECT_NO_THROW(kernels::validate(r.spec));
  const ParamBounds b = param_bounds(truth, P, z);
  const Eigen::VectorXd x = r.spec.log_params();
  EXPECT_TRUE(((x - b.lower).array() >= -1e-12).all());
  EXPECT_TRUE(((b.upper - x).array() >= -1e-12).all());
  ASSERT_EQ(r.restart_nlls.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LE(r.nll, r.restart_nlls[i]);
    EXPECT_LE(r.restart_nlls[i], r.initial_nlls[i]);
  }
  EXPECT_NEAR(r.nll, neg_log_likelihood(r.spec, P, z, cfg.jitter * r.spec.total_variance()), 1e-9);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Fit, DeterministicForSeed) {
  const Eigen::MatrixXd P = test::grid_points(6, 6, 4.0, 4.0);
  const Eigen::VectorXd z = test::draw_field(single_term(Family::matern52, 1.0, Eigen::Vector2d(8, 8)), P, 1);
  const auto tmpl = single_term(Family::matern52, 1.0, Eigen::Vector2d(1, 1));
  FitConfig cfg;
  cfg.seed = 77;
  const auto a = fit_params(P, z, tmpl, cfg), b = fit_params(P, z, tmpl, cfg);
  EXPECT_EQ(a.spec.log_params(), b.spec.log_params());
  EXPECT_EQ(a.nll, b.nll);
}

TEST(Fit, PeriodicTermFits) {
  auto tmpl = single_term(Family::periodic, 1.0, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
  const Eigen::MatrixXd P = Eigen::VectorXd::LinSpaced(40, 0.0, 39.0);
  const Eigen::VectorXd z = (P.col(0).array() * (2.0 * M_PI / 13.0)).sin();
  FitConfig cfg;
  cfg.restarts = 2;
  const FitResult r = fit_params(P, z, tmpl, cfg);
  EXPECT_TRUE(std::isfinite(r.nll));
  EXPECT_EQ(r.spec.terms[0].periods.size(), 1);
}

TEST(Fit, FewPointsWarn) {
  const Eigen::MatrixXd P = test::grid_points(2, 2, 1.0, 1.0);
  const auto tmpl = single_term(Family::matern52, 1.0, Eigen::Vector2d(1, 1));
  const FitResult r = fit_params(P, Eigen::Vector4d(0.1, -0.2, 0.3, 0.0), tmpl, FitConfig{});
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Fit, RejectsBadInput) {
  const Eigen::MatrixXd P = test::grid_points(3, 3, 1.0, 1.0);
  const auto tmpl = single_term(Family::matern52, 1.0, Eigen::Vector2d(1, 1));
  FitConfig cfg;
  cfg.restarts = 0;
  EXPECT_ERROR_CODE(fit_params(P, Eigen::VectorXd::Zero(9), tmpl, cfg), ErrorCode::domain);
  EXPECT_ERROR_CODE(fit_params(P, Eigen::VectorXd::Zero(8), tmpl, FitConfig{}), ErrorCode::shape);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(9);
  z[2] = std::nan("");
  EXPECT_ERROR_CODE(fit_params(P, z, tmpl, FitConfig{}), ErrorCode::domain);
}
