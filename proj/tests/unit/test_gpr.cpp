#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "shapemorph/simulation/gpr.hpp"
#include "support/test_util.hpp"

using namespace shapemorph;
using namespace shapemorph::simulation;
using kernels::Family;

TEST(Gpr, TwoPointClosedForm) {
  const auto spec = kernels::single_term(Family::squared_exponential, 1.0, Eigen::VectorXd::Constant(1, 1.0));
  Eigen::MatrixXd cond(2, 1), query(1, 1);
  cond << 0.0, 2.0;
  query << 1.0;
  const Eigen::VectorXd m = gpr_mean(spec, cond, Eigen::Vector2d(1.0, 1.0), query, 0.0);
  EXPECT_NEAR(m[0], 2.0 * std::exp(-0.5) / (1.0 + std::exp(-2.0)), 1e-12);
}

TEST(Gpr, ReproducesConditioningValues) {
  const auto spec = kernels::single_term(Family::matern52, 0.8, Eigen::Vector2d(12.0, 7.0));
  Eigen::MatrixXd cond(6, 2);
  cond << 0, 0, 3, 1, 9, 4, 15, 2, 4, 11, 20, 20;
  const Eigen::VectorXd z = (Eigen::VectorXd(6) << 0.3, -1.2, 2.5, 0.0, 1.1, -0.4).finished();
  Eigen::MatrixXd query(8, 2);
  query << 1, 1, 3, 1, 5, 5, 9, 4, 15, 2, 30, 30, 20, 20, 0, 0;
  const Eigen::VectorXd m = gpr_mean(spec, cond, z, query, 1e-6);
  EXPECT_NEAR(m[1], z[1], 1e-6);
  EXPECT_NEAR(m[3], z[2], 1e-6);
  EXPECT_NEAR(m[4], z[3], 1e-6);
  EXPECT_NEAR(m[6], z[5], 1e-6);
  EXPECT_NEAR(m[7], z[0], 1e-6);
}

TEST(Gpr, SolveRouteAgreesWithPinnedRows) {
  // well conditioned: the plain solve lands on the conditioning values too,
  // so pinning only removes round-off
  const auto spec = kernels::single_term(Family::matern52, 0.8, Eigen::Vector2d(4.0, 3.0));
  Eigen::MatrixXd cond(6, 2);
  cond << 0, 0, 3, 1, 9, 4, 15, 2, 4, 11, 20, 20;
  const Eigen::VectorXd z = (Eigen::VectorXd(6) << 0.3, -1.2, 2.5, 0.0, 1.1, -0.4).finished();
  const GprPredictor gpr(spec, cond, 1e-8);
  Eigen::MatrixXd query(7, 2);
  query << cond, 7, 7;
  const Eigen::MatrixXd solved = gpr.predict(query, gpr.weights(z));
  const Eigen::MatrixXd pinned = gpr.condition(query, z);
  EXPECT_LE((solved.topRows(6) - z).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(pinned.topRows(6), z);
  EXPECT_EQ(pinned(6, 0), solved(6, 0));
}

TEST(Gpr, RevertsToZeroFarAway) {
  const auto spec = kernels::single_term(Family::squared_exponential, 1.0, Eigen::Vector2d(5.0, 5.0));
  Eigen::MatrixXd cond(3, 2), query(1, 2);
  cond << 0, 0, 4, 0, 0, 4;
  query << 60, 60;
  const Eigen::Vector3d z(3.0, -2.0, 1.0);
  const Eigen::VectorXd m = gpr_mean(spec, cond, z, query, 1e-8);
  EXPECT_LT(std::abs(m[0]), 1e-3 * 3.0);
}

TEST(Gpr, ZeroInputGivesZeroMean) {
  const auto spec = kernels::single_term(Family::matern32, 2.0, Eigen::Vector2d(5.0, 9.0));
  Eigen::MatrixXd cond(3, 2);
  cond << 0, 0, 4, 0, 0, 4;
  const Eigen::MatrixXd query = Eigen::MatrixXd::Random(50, 2) * 20.0;
  const Eigen::VectorXd m = gpr_mean(spec, cond, Eigen::Vector3d::Zero(), query, 1e-8);
  EXPECT_LE(m.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Gpr, BlockedPredictionMatchesDirectSolve) {
  // more than one row block of queries against a plain LDLT reference
  const auto spec = kernels::single_term(Family::squared_exponential, 1.5, Eigen::Vector2d(6.0, 4.0));
  Eigen::MatrixXd cond(10, 2);
  for (int i = 0; i < 10; ++i) cond.row(i) << 3.0 * i, (i % 3) * 5.0;
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(10, -1.0, 2.0);
  Eigen::MatrixXd query(5000, 2);
  for (int i = 0; i < 5000; ++i) query.row(i) << 0.006 * i + 0.0005, 0.002 * i + 0.0007;
  const double jitter = 1e-6;
  Eigen::MatrixXd C = kernels::cov_matrix(spec, cond);
  C.diagonal().array() += jitter;
  const Eigen::VectorXd ref = kernels::cov_matrix(spec, query, cond) * C.ldlt().solve(z);
  const Eigen::VectorXd m = gpr_mean(spec, cond, z, query, jitter);
  EXPECT_LE((m - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Gpr, DuplicateConditioningPointsNamed) {
  const auto spec = kernels::single_term(Family::squared_exponential, 1.0, Eigen::Vector2d(5.0, 5.0));
  Eigen::MatrixXd cond(3, 2);
  cond << 0, 0, 1, 1, 0, 0;
  try {
    GprPredictor(spec, cond, 1e-8);
    FAIL() << "expected conditioning error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::conditioning);
    EXPECT_NE(std::string(e.what()).find("(0, 2)"), std::string::npos) << e.what();
  }
}

TEST(Gpr, MeshOverloadConditionsOnManipulatedKeys) {
  const geometry::Mesh mesh = geometry::make_plate(6, 5, 10.0, 10.0);
  geometry::KeyPointSet keys;
  keys.mesh_id = mesh.checksum();
  keys.indices = {0, 7, 14, 29};
  geometry::ManipulatedKeySet man;
  man.selected = {1, 3};
  man.deviations = Eigen::Vector2d(1.5, -0.5);
  const auto spec = kernels::single_term(Family::matern52, 1.0, Eigen::Vector3d(15.0, 15.0, 15.0));
  const geometry::DeviationField f = gpr_mean(spec, mesh, keys, man, 1e-8);
  EXPECT_EQ(f.role, geometry::FieldRole::mean);
  EXPECT_EQ(f.values.size(), 30);
  EXPECT_NEAR(f.values[7], 1.5, 1e-6);
  EXPECT_NEAR(f.values[29], -0.5, 1e-6);

  geometry::ManipulatedKeySet none;
  EXPECT_ERROR_CODE(gpr_mean(spec, mesh, keys, none, 1e-8), ErrorCode::domain);
}
