#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "shapemorph/geometry/mesh.hpp"

namespace shapemorph::service {

inline constexpr std::size_t kPreviewTriangles = 50000;

/// Decimated copy of a mesh for the browser. Every preview vertex is an
/// original node (half-edge collapses never move a vertex), so deviation
/// values are sampled exactly through `nodes`.
struct Preview {
  std::vector<std::int32_t> nodes;  // preview vertex -> mesh node
  std::vector<std::uint32_t> triangles;  // 3 per triangle, preview vertex ids
  Eigen::MatrixX3d normals;              // recomputed on the preview

  std::size_t vertex_count() const { return nodes.size(); }
  std::size_t triangle_count() const { return triangles.size() / 3; }
};

/// Collapses the shortest edges first (kept endpoint fixed) until at most
/// max_triangles remain. A collapse is skipped when it would break the
/// link condition, flip a neighbouring triangle or eat into the boundary.
/// Meshes already under the target are returned unchanged.
Preview decimate(const geometry::Mesh& mesh, std::size_t max_triangles = kPreviewTriangles);

/// Binary layout, all little-endian:
///   char[4] "SMPV", uint32 version (1), uint32 n_vertices, uint32 n_triangles,
///   float32 positions[3 n_vertices], uint32 indices[3 n_triangles],
///   float32 normals[3 n_vertices]
std::string encode_preview(const Preview& preview, const geometry::Mesh& mesh);

/// Values at the preview vertices as little-endian float32 bytes.
std::string sample_float32(const Preview& preview, const Eigen::VectorXd& node_values);

}  // namespace shapemorph::service
