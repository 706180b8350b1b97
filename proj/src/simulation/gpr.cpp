#include "shapemorph/simulation/gpr.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "shapemorph/error.hpp"

namespace shapemorph::simulation {
namespace {

constexpr Eigen::Index kRowBlock = 2048;

using Key = std::array<double, 3>;

Key key_of(const kernels::PointsRef& P, Eigen::Index i) {
  Key k{0.0, 0.0, 0.0};
  for (Eigen::Index d = 0; d < P.cols(); ++d) k[static_cast<std::size_t>(d)] = P(i, d) + 0.0;  // folds -0 into +0
  return k;
}

}  // namespace

GprPredictor::GprPredictor(kernels::KernelSpec spec, Eigen::MatrixXd cond_points, double jitter)
    : spec_(std::move(spec)), cond_(std::move(cond_points)) {
  if (cond_.rows() < 1) fail(ErrorCode::shape, "regression needs at least one conditioning point");
  if (cond_.cols() != spec_.dim) fail(ErrorCode::shape, "conditioning points do not match kernel dimension");

  std::map<Key, Eigen::Index> seen;
  std::string dups;
  for (Eigen::Index i = 0; i < cond_.rows(); ++i) {
    auto [it, fresh] = seen.emplace(key_of(cond_, i), i);
    if (!fresh) dups += " (" + std::to_string(it->second) + ", " + std::to_string(i) + ")";
  }
  if (!dups.empty()) fail(ErrorCode::conditioning, "duplicate conditioning points:" + dups);

  Eigen::MatrixXd C = kernels::cov_matrix(spec_, cond_);
  chol_ = linalg::cholesky(C, jitter);
  C.diagonal().array() += chol_.jitter;
  C_ = std::move(C);
}

Eigen::MatrixXd GprPredictor::weights(const Eigen::MatrixXd& R) const {
  if (R.rows() != cond_.rows()) fail(ErrorCode::shape, "one row per conditioning point expected");
  Eigen::MatrixXd W = chol_.solve_columns(R);
  const Eigen::MatrixXd resid = R - C_ * W;
  W += chol_.solve_columns(resid);
  return W;
}

Eigen::MatrixXd GprPredictor::predict(const kernels::PointsRef& query, const Eigen::MatrixXd& W) const {
  if (query.cols() != spec_.dim) fail(ErrorCode::shape, "query points do not match kernel dimension");
  if (W.rows() != cond_.rows()) fail(ErrorCode::shape, "weights do not match conditioning points");
  std::map<Key, Eigen::Index> index;
  for (Eigen::Index i = 0; i < cond_.rows(); ++i) index.emplace(key_of(cond_, i), i);

  Eigen::MatrixXd out(query.rows(), W.cols());
  for (Eigen::Index r0 = 0; r0 < query.rows(); r0 += kRowBlock) {
    const Eigen::Index nb = std::min(kRowBlock, query.rows() - r0);
    Eigen::MatrixXd cross = kernels::cov_matrix(spec_, query.middleRows(r0, nb), cond_);
    for (Eigen::Index i = 0; i < nb; ++i) {
      const auto it = index.find(key_of(query, r0 + i));
      if (it != index.end()) cross(i, it->second) += chol_.jitter;
    }
    out.middleRows(r0, nb).noalias() = cross * W;
  }
  return out;
}

Eigen::MatrixXd GprPredictor::condition(const kernels::PointsRef& query, const Eigen::MatrixXd& R) const {
  Eigen::MatrixXd out = predict(query, weights(R));
  std::map<Key, Eigen::Index> index;
  for (Eigen::Index i = 0; i < cond_.rows(); ++i) index.emplace(key_of(cond_, i), i);
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    const auto it = index.find(key_of(query, i));
    if (it != index.end()) out.row(i) = R.row(it->second);
  }
  return out;
}

Eigen::VectorXd GprPredictor::mean(const kernels::PointsRef& query, const Eigen::VectorXd& values) const {
  return condition(query, values).col(0);
}

Eigen::VectorXd gpr_mean(const kernels::KernelSpec& spec, const kernels::PointsRef& cond_points,
                         const Eigen::VectorXd& cond_values, const kernels::PointsRef& query, double jitter) {
  if (cond_values.size() != cond_points.rows())
    fail(ErrorCode::shape, "got " + std::to_string(cond_values.size()) + " values for " +
                               std::to_string(cond_points.rows()) + " conditioning points");
  return GprPredictor(spec, cond_points, jitter).mean(query, cond_values);
}

geometry::DeviationField gpr_mean(const kernels::KernelSpec& spec, const geometry::Mesh& mesh,
                                  const geometry::KeyPointSet& keys, const geometry::ManipulatedKeySet& manipulated,
                                  double jitter) {
  geometry::validate(keys, mesh);
  geometry::validate(manipulated, keys);
  if (manipulated.size() == 0) fail(ErrorCode::domain, "no manipulated key points to condition on");
  const Eigen::MatrixXd X = kernels::as_points(mesh.nodes(), spec.dim);
  const Eigen::MatrixXd Xk = kernels::as_points(geometry::rows_of(mesh.nodes(), geometry::manipulated_nodes(keys, manipulated)), spec.dim);
  geometry::DeviationField f;
  f.mesh_id = mesh.checksum();
  f.role = geometry::FieldRole::mean;
  f.values = gpr_mean(spec, Xk, manipulated.deviations, X, jitter);
  return f;
}

}  // namespace shapemorph::simulation
