#pragma once

#include <Eigen/Core>

#include "shapemorph/geometry/keypoints.hpp"

namespace shapemorph::simulation {

struct Axis {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
};

struct Box {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
};

/// Bend about an axis line: every key is manipulated, with deviation
/// max_dev * d_k / d_max where d_k is the key's distance from the line.
/// Throws Error(degenerate_axis) when every key lies on the line.
geometry::ManipulatedKeySet scenario_bend(const geometry::KeyPointSet& keys, const geometry::Mesh& mesh,
                                          const Axis& axis, double max_dev);

/// Keys inside the closed box get `dev`. With pin_others the remaining keys
/// are manipulated too, held at 0, which confines the deformation.
/// Throws Error(empty_selection) when the box holds no key.
geometry::ManipulatedKeySet scenario_patch(const geometry::KeyPointSet& keys, const geometry::Mesh& mesh,
                                           const Box& box, double dev, bool pin_others = false);

/// Every key pinned at 0: pure form error about the nominal shape.
geometry::ManipulatedKeySet scenario_form_only(const geometry::KeyPointSet& keys);

}  // namespace shapemorph::simulation
