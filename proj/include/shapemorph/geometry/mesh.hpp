#pragma once

#include <Eigen/Core>
#include <string>

namespace shapemorph::geometry {

using Elements = Eigen::Matrix<int, Eigen::Dynamic, 3>;

struct BoundingBox {
  Eigen::Vector3d min;
  Eigen::Vector3d max;

  Eigen::Vector3d extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
};

BoundingBox bounding_box(const Eigen::MatrixX3d& points);

/// Nominal part geometry: node coordinates (mm), triangles and per-node unit
/// normals. Immutable after construction; the constructor validates the
/// topology and computes angle-weighted vertex normals.
class Mesh {
 public:
  Mesh(Eigen::MatrixX3d nodes, Elements elements);

  const Eigen::MatrixX3d& nodes() const { return nodes_; }
  const Elements& elements() const { return elements_; }
  const Eigen::MatrixX3d& normals() const { return normals_; }

  Eigen::Index node_count() const { return nodes_.rows(); }
  Eigen::Index element_count() const { return elements_.rows(); }

  /// Set when some edge is shared by more than two triangles.
  bool non_manifold() const { return non_manifold_; }

  /// FNV-1a digest of the coordinates and connectivity; doubles as mesh id.
  const std::string& checksum() const { return checksum_; }

  BoundingBox bbox() const { return bounding_box(nodes_); }

 private:
  Eigen::MatrixX3d nodes_;
  Elements elements_;
  Eigen::MatrixX3d normals_;
  bool non_manifold_ = false;
  std::string checksum_;
};

/// Angle-weighted average of incident face normals, normalised.
Eigen::MatrixX3d angle_weighted_normals(const Eigen::MatrixX3d& nodes,
                                        const Elements& elements);

std::string mesh_checksum(const Eigen::MatrixX3d& nodes, const Elements& elements);

/// Measured cloud of points, already aligned with the mesh frame.
struct PointCloud {
  Eigen::MatrixX3d points;

  explicit PointCloud(Eigen::MatrixX3d pts);
  Eigen::Index size() const { return points.rows(); }
};

/// Regular triangulated plate on the z = 0 plane (nx x ny nodes); quads are
/// split along their (0,2) diagonal. Used by examples, tools and tests.
Mesh make_plate(int nx, int ny, double spacing_x, double spacing_y);

/// Same grid with z displaced by height(x, y).
template <class HeightFn>
Mesh make_surface(int nx, int ny, double spacing_x, double spacing_y, HeightFn height);

}  // namespace shapemorph::geometry

#include "shapemorph/geometry/mesh_impl.hpp"
