#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "shapemorph/geometry/mesh.hpp"

namespace shapemorph::geometry {

enum class FieldRole { measured, mean, unconditional, instance };

const char* to_string(FieldRole role);

/// Signed deviation (mm) of every mesh node along its surface normal.
struct DeviationField {
  std::string mesh_id;
  Eigen::VectorXd values;
  FieldRole role = FieldRole::measured;
  // Nodes that had no CoP point within range; empty unless from a CoP.
  std::vector<std::uint8_t> missing;

  std::size_t missing_count() const;
};

struct FieldStats {
  double min = 0.0;
  double max = 0.0;
  double rms = 0.0;
};

FieldStats field_stats(const Eigen::VectorXd& values);

/// values[i] = dot(q - x_i, n_i) with q the CoP point nearest to node i.
/// Nodes with no CoP point within max_dist are marked missing and take the
/// value of the nearest non-missing node (lowest index on ties).
DeviationField deviation_from_cop(const Mesh& mesh, const PointCloud& cop, double max_dist);

/// values[i] = dot(disp_i, n_i).
DeviationField deviation_from_displacement(const Mesh& mesh, const Eigen::MatrixX3d& disp);

/// Index of the point nearest to each query (lowest index on ties) found
/// through a uniform hash grid; -1 where nothing lies within max_dist.
std::vector<Eigen::Index> nearest_within(const Eigen::MatrixX3d& points,
                                         const Eigen::MatrixX3d& queries, double max_dist);

}  // namespace shapemorph::geometry
