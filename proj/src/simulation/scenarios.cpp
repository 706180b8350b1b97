#include "shapemorph/simulation/scenarios.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <vector>

#include "shapemorph/error.hpp"

namespace shapemorph::simulation {

geometry::ManipulatedKeySet scenario_bend(const geometry::KeyPointSet& keys, const geometry::Mesh& mesh,
                                          const Axis& axis, double max_dev) {
  geometry::validate(keys, mesh);
  if (!std::isfinite(max_dev)) fail(ErrorCode::domain, "bend deviation must be finite");
  if (!axis.point.allFinite() || !axis.direction.allFinite() || axis.direction.norm() == 0.0)
    fail(ErrorCode::domain, "bend axis needs a finite point and a nonzero direction");
  const Eigen::Vector3d u = axis.direction.normalized();
  const Eigen::MatrixX3d Xk = geometry::key_coordinates(mesh, keys);

  Eigen::VectorXd d(Xk.rows());
  for (Eigen::Index k = 0; k < Xk.rows(); ++k) d[k] = (Xk.row(k).transpose() - axis.point).cross(u).norm();
  const double d_max = d.maxCoeff();
  // distances below round-off of the part size count as on the axis
  if (!(d_max > 1e-12 * (1.0 + mesh.bbox().diagonal())))
    fail(ErrorCode::degenerate_axis, "every key point lies on the bend axis");

  geometry::ManipulatedKeySet out;
  out.deviations.resize(Xk.rows());
  for (Eigen::Index k = 0; k < Xk.rows(); ++k) {
    out.selected.push_back(static_cast<std::size_t>(k));
    out.deviations[k] = d[k] == d_max ? max_dev : max_dev * (d[k] / d_max);
  }
  return out;
}

geometry::ManipulatedKeySet scenario_patch(const geometry::KeyPointSet& keys, const geometry::Mesh& mesh,
                                           const Box& box, double dev, bool pin_others) {
  geometry::validate(keys, mesh);
  if (!std::isfinite(dev)) fail(ErrorCode::domain, "patch deviation must be finite");
  if (!box.min.allFinite() || !box.max.allFinite() || !(box.min.array() <= box.max.array()).all())
    fail(ErrorCode::domain, "patch box must have min <= max on every axis");
  const Eigen::MatrixX3d Xk = geometry::key_coordinates(mesh, keys);

  std::vector<std::size_t> sel;
  std::vector<double> val;
  std::size_t inside = 0;
  for (Eigen::Index k = 0; k < Xk.rows(); ++k) {
    const Eigen::Vector3d x = Xk.row(k).transpose();
    const bool in = (x.array() >= box.min.array()).all() && (x.array() <= box.max.array()).all();
    if (in) ++inside;
    if (in || pin_others) {
      sel.push_back(static_cast<std::size_t>(k));
      val.push_back(in ? dev : 0.0);
    }
  }
  if (inside == 0) fail(ErrorCode::empty_selection, "patch box contains no key point");

  geometry::ManipulatedKeySet out;
  out.selected = std::move(sel);
  out.deviations = Eigen::Map<const Eigen::VectorXd>(val.data(), static_cast<Eigen::Index>(val.size()));
  return out;
}

geometry::ManipulatedKeySet scenario_form_only(const geometry::KeyPointSet& keys) {
  geometry::ManipulatedKeySet out;
  for (std::size_t k = 0; k < keys.size(); ++k) out.selected.push_back(k);
  out.deviations = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keys.size()));
  return out;
}

}  // namespace shapemorph::simulation
