#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <atomic>

#include "shapemorph/simulation/conditional.hpp"
#include "shapemorph/simulation/scenarios.hpp"
#include "support/fields.hpp"
#include "support/test_util.hpp"

using namespace shapemorph;
using namespace shapemorph::simulation;
using kernels::Family;

namespace {

geometry::KeyPointSet keys_of(const geometry::Mesh& mesh, std::vector<Eigen::Index> idx) {
  geometry::KeyPointSet k;
  k.mesh_id = mesh.checksum();
  k.indices = std::move(idx);
  return k;
}

geometry::KeyPointSet all_nodes(const geometry::Mesh& mesh) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < mesh.node_count(); ++i) idx.push_back(i);
  return keys_of(mesh, idx);
}

kernels::KernelSpec spec3(double l) { return kernels::single_term(Family::matern52, 0.4, Eigen::Vector3d(l, l, l)); }

// C(X,X) - C(X,Xt) C(Xt,Xt)^-1 C(Xt,X), by LDLT
Eigen::MatrixXd conditional_covariance(const kernels::KernelSpec& spec, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xt) {
  const Eigen::MatrixXd Cxt = kernels::cov_matrix(spec, X, Xt);
  return kernels::cov_matrix(spec, X) - Cxt * kernels::cov_matrix(spec, Xt).ldlt().solve(Cxt.transpose());
}

Eigen::MatrixXd residuals(const Ensemble& e) {
  Eigen::MatrixXd R(e.mean_field.values.size(), static_cast<Eigen::Index>(e.instances.size()));
  for (std::size_t i = 0; i < e.instances.size(); ++i)
    R.col(static_cast<Eigen::Index>(i)) = e.instances[i].values - e.mean_field.values;
  return R;
}

struct Case {
  geometry::Mesh mesh = geometry::make_plate(5, 5, 6.0, 6.0);
  geometry::KeyPointSet keys = keys_of(mesh, {0, 4, 12, 20, 24});
  geometry::ManipulatedKeySet man;
  Case() {
    man.selected = {0, 1, 2, 3, 4};
    man.deviations = (Eigen::VectorXd(5) << 0.5, -0.3, 1.0, 0.0, 0.2).finished();
  }
};

}  // namespace

TEST(Conditional, InstancesPassThroughManipulatedKeys) {
  Case c;
  const auto tol = make_tolerance(1.0, 0.95);
  for (Method m : {Method::cholesky, Method::eigen, Method::reduced}) {
    SimulationOptions opt;
    opt.method = m;
    const Ensemble e = conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 50, 17, opt);
    ASSERT_EQ(e.instances.size(), 50u);
    for (const auto& inst : e.instances) {
      EXPECT_EQ(inst.role, geometry::FieldRole::instance);
      EXPECT_EQ(inst.mesh_id, c.mesh.checksum());
      for (std::size_t k = 0; k < c.man.size(); ++k)
        EXPECT_NEAR(inst.values[c.keys.indices[c.man.selected[k]]], c.man.deviations[static_cast<Eigen::Index>(k)], 1e-6)
            << to_string(m);
    }
  }
}

TEST(Conditional, ResidualCovarianceMatchesAnalytic) {
  Case c;
  const auto tol = make_tolerance(1.0, 0.95);
  const kernels::KernelSpec spec = spec3(12.0);
  const kernels::KernelSpec scaled = spec.scaled_to(tol.sigma_t * tol.sigma_t);
  const Eigen::MatrixXd X = c.mesh.nodes();
  const Eigen::MatrixXd target = conditional_covariance(scaled, X, geometry::key_coordinates(c.mesh, c.keys));
  for (Method m : {Method::cholesky, Method::eigen}) {
    SimulationOptions opt;
    opt.method = m;
    const Ensemble e = conditional_simulate(spec, c.mesh, c.keys, c.man, tol, 5000, 1234, opt);
    const double err = (test::sample_covariance(residuals(e)) - target).cwiseAbs().maxCoeff();
    EXPECT_LE(err, 0.15 * tol.sigma_t * tol.sigma_t) << to_string(m);
  }
}

TEST(Conditional, UnmanipulatedKeysKeepVariance) {
  Case c;
  geometry::ManipulatedKeySet two;
  two.selected = {0, 4};
  two.deviations = Eigen::Vector2d(1.0, 1.0);
  const auto tol = make_tolerance(1.0, 0.95);
  const Ensemble e = conditional_simulate(spec3(12.0), c.mesh, c.keys, two, tol, 400, 3);
  const Eigen::MatrixXd S = test::sample_covariance(residuals(e));
  EXPECT_GT(S(12, 12), 0.05 * tol.sigma_t * tol.sigma_t);  // centre key, not conditioned on
  EXPECT_LT(S(0, 0), 1e-10);
}

TEST(Conditional, ZeroDeviationsGiveZeroMean) {
  Case c;
  const geometry::ManipulatedKeySet zero = scenario_form_only(c.keys);
  const Ensemble e = conditional_simulate(spec3(9.0), c.mesh, c.keys, zero, make_tolerance(2.0, 0.97), 5, 1);
  EXPECT_LE(e.mean_field.values.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(e.mean_field.role, geometry::FieldRole::mean);
}

TEST(Conditional, NoManipulatedKeysIsUnconditional) {
  Case c;
  const auto tol = make_tolerance(2.0, 0.97);
  const auto spec = spec3(9.0);
  const Ensemble e = conditional_simulate(spec, c.mesh, c.keys, {}, tol, 4, 77);
  EXPECT_EQ(e.mean_field.values, Eigen::VectorXd::Zero(25));
  const double v = tol.sigma_t * tol.sigma_t;
  const CholeskySampler ref(spec.scaled_to(v), c.mesh.nodes(), 1e-8 * v);
  for (std::uint64_t i = 0; i < 4; ++i) {
    RandomSource rng(77, i);
    EXPECT_EQ(e.instances[i].values, ref.sample(rng));
  }
}

TEST(Conditional, FormOnlyConformance) {
  // 200-node plate, keys on a 20 mm voxel grid well inside the 40 mm
  // correlation length, so conditioning cuts the variance everywhere
  const geometry::Mesh mesh = geometry::make_plate(20, 10, 10.0, 10.0);
  const auto keys = geometry::select_key_points(mesh, 20.0);
  const auto tol = make_tolerance(2.0, 0.97);
  const Ensemble e = conditional_simulate(spec3(40.0), mesh, keys, scenario_form_only(keys), tol, 200, 5);
  for (Eigen::Index n = 0; n < mesh.node_count(); ++n) {
    int ok = 0;
    for (const auto& inst : e.instances) ok += std::abs(inst.values[n]) <= 2.0;
    EXPECT_GE(ok / 200.0, 0.97) << "node " << n;
  }
}

TEST(Conditional, VarianceScaledToTolerance) {
  Case c;
  kernels::KernelSpec two_term = spec3(10.0);
  two_term.terms.push_back({Family::squared_exponential, 1.2, Eigen::Vector3d(4, 4, 4), {}});
  const auto tol = make_tolerance(1.0, 0.95);
  const Ensemble e = conditional_simulate(two_term, c.mesh, c.keys, {}, tol, 1, 0);
  const auto& s = e.provenance.spec;
  EXPECT_NEAR(s.total_variance(), tol.sigma_t * tol.sigma_t, 1e-15);
  EXPECT_NEAR(s.terms[0].sigma_f2 / s.terms[1].sigma_f2, 0.4 / 1.2, 1e-12);
  EXPECT_EQ(s.terms[1].lengths, two_term.terms[1].lengths);
}

TEST(Conditional, Deterministic) {
  Case c;
  const auto tol = make_tolerance(1.0, 0.95);
  for (Method m : {Method::cholesky, Method::eigen, Method::reduced}) {
    SimulationOptions opt;
    opt.method = m;
    const Ensemble a = conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 6, 42, opt);
    const Ensemble b = conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 6, 42, opt);
    const Ensemble d = conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 6, 43, opt);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(a.instances[i].values, b.instances[i].values);
      EXPECT_NE(a.instances[i].values, d.instances[i].values);
    }
    EXPECT_EQ(a.provenance.streams, (std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5}));
    EXPECT_EQ(a.provenance.method, m);
  }
}

TEST(Conditional, ReducedMatchesDenseWithAllKeys) {
  const geometry::Mesh mesh = geometry::make_plate(5, 4, 4.0, 5.0);
  const auto keys = all_nodes(mesh);
  geometry::ManipulatedKeySet man;
  man.selected = {0, 19};
  man.deviations = Eigen::Vector2d(0.5, -0.5);
  const auto tol = make_tolerance(1.0, 0.95);
  SimulationOptions red;
  red.method = Method::reduced;
  red.energy = 1.0;
  const Ensemble a = conditional_simulate(spec3(8.0), mesh, keys, man, tol, 5000, 9, red);
  const Ensemble b = conditional_simulate(spec3(8.0), mesh, keys, man, tol, 5000, 10);
  const double err = (test::sample_covariance(residuals(a)) - test::sample_covariance(residuals(b))).cwiseAbs().maxCoeff();
  EXPECT_LE(err, 0.15 * tol.sigma_t * tol.sigma_t);
}

TEST(Conditional, ProgressAndCancel) {
  Case c;
  const auto tol = make_tolerance(1.0, 0.95);
  SimulationOptions opt;
  std::atomic<std::size_t> calls{0};
  opt.progress = [&](std::size_t done, std::size_t total) {
    EXPECT_EQ(total, 8u);
    EXPECT_LE(done, total);
    ++calls;
    return true;
  };
  conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 8, 1, opt);
  EXPECT_EQ(calls.load(), 8u);

  opt.progress = [](std::size_t done, std::size_t) { return done < 3; };
  EXPECT_ERROR_CODE(conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 8, 1, opt), ErrorCode::cancelled);
}

TEST(Conditional, RejectsBadInput) {
  Case c;
  const auto tol = make_tolerance(1.0, 0.95);
  EXPECT_ERROR_CODE(conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 0, 1), ErrorCode::domain);
  SimulationOptions small;
  small.dense_limit = 10;
  EXPECT_ERROR_CODE(conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, tol, 1, 1, small), ErrorCode::dense_limit);
  geometry::ManipulatedKeySet bad = c.man;
  bad.selected[0] = 9;
  EXPECT_ERROR_CODE(conditional_simulate(spec3(10.0), c.mesh, c.keys, bad, tol, 1, 1), ErrorCode::domain);
  ToleranceSpec wrong = tol;
  wrong.p = 1.0;
  EXPECT_ERROR_CODE(conditional_simulate(spec3(10.0), c.mesh, c.keys, c.man, wrong, 1, 1), ErrorCode::domain);
  EXPECT_ERROR_CODE(parse_method("qr"), ErrorCode::domain);
  EXPECT_EQ(parse_method("reduced"), Method::reduced);
}
