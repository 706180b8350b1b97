#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "shapemorph/geometry/mesh.hpp"

namespace shapemorph::geometry {

/// Key nodes X_k: strictly increasing node indices of the owning mesh.
struct KeyPointSet {
  std::string mesh_id;
  std::vector<Eigen::Index> indices;
  double voxel_size = 0.0;

  std::size_t size() const { return indices.size(); }
};

/// Designer-set subset of the key set and the deviations (mm) it must pass
/// through. `selected` holds positions into KeyPointSet::indices.
struct ManipulatedKeySet {
  std::vector<std::size_t> selected;
  Eigen::VectorXd deviations;

  std::size_t size() const { return selected.size(); }
};

/// Partitions the bounding box into cubic voxels of edge voxel_size anchored
/// at the box minimum (the last voxel along each axis is closed so the box
/// max belongs to it). Each occupied voxel contributes the node nearest its
/// centre, lowest index on ties. Result sorted by node index.
KeyPointSet select_key_points(const Mesh& mesh, double voxel_size);

void validate(const KeyPointSet& keys, const Mesh& mesh);
void validate(const ManipulatedKeySet& manipulated, const KeyPointSet& keys);

/// Coordinates of the given node indices, one row each.
Eigen::MatrixX3d rows_of(const Eigen::MatrixX3d& points, const std::vector<Eigen::Index>& indices);

Eigen::MatrixX3d key_coordinates(const Mesh& mesh, const KeyPointSet& keys);

/// Node indices of the manipulated key points.
std::vector<Eigen::Index> manipulated_nodes(const KeyPointSet& keys, const ManipulatedKeySet& manipulated);

}  // namespace shapemorph::geometry
