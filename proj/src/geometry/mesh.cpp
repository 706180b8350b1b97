#include "shapemorph/geometry/mesh.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <unordered_map>

#include "shapemorph/error.hpp"

namespace shapemorph::geometry {
namespace {

constexpr double kMinTriangleArea = 1e-12;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate(const Eigen::MatrixX3d& nodes, const Elements& elements) {
  const Eigen::Index n = nodes.rows();
  if (n < 3) fail(ErrorCode::format, "mesh needs at least 3 nodes, got " + std::to_string(n));
  if (elements.rows() < 1) fail(ErrorCode::format, "mesh has no triangles");
  if (!nodes.allFinite()) fail(ErrorCode::format, "mesh has non-finite coordinates");
  for (Eigen::Index e = 0; e < elements.rows(); ++e) {
    for (int c = 0; c < 3; ++c) {
      const int v = elements(e, c);
      if (v < 0 || v >= n)
        fail(ErrorCode::format, "triangle " + std::to_string(e) + " references node " +
                                    std::to_string(v) + " of " + std::to_string(n));
    }
    const Eigen::Vector3d a = nodes.row(elements(e, 0));
    const Eigen::Vector3d b = nodes.row(elements(e, 1));
    const Eigen::Vector3d c = nodes.row(elements(e, 2));
    const double area = 0.5 * (b - a).cross(c - a).norm();
    if (!(area > kMinTriangleArea))
      fail(ErrorCode::format, "triangle " + std::to_string(e) + " is degenerate (area " +
                                  std::to_string(area) + " mm^2)");
  }
}

bool has_non_manifold_edge(const Elements& elements) {
  std::unordered_map<std::uint64_t, int> uses;
  uses.reserve(static_cast<std::size_t>(elements.rows()) * 3);
  for (Eigen::Index e = 0; e < elements.rows(); ++e) {
    for (int c = 0; c < 3; ++c) {
      auto a = static_cast<std::uint32_t>(elements(e, c));
      auto b = static_cast<std::uint32_t>(elements(e, (c + 1) % 3));
      if (a > b) std::swap(a, b);
      if (++uses[(std::uint64_t{a} << 32) | b] > 2) return true;
    }
  }
  return false;
}

}  // namespace

BoundingBox bounding_box(const Eigen::MatrixX3d& points) {
  return {points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
}

Eigen::MatrixX3d angle_weighted_normals(const Eigen::MatrixX3d& nodes,
                                        const Elements& elements) {
  Eigen::MatrixX3d acc = Eigen::MatrixX3d::Zero(nodes.rows(), 3);
  for (Eigen::Index e = 0; e < elements.rows(); ++e) {
    const int idx[3] = {elements(e, 0), elements(e, 1), elements(e, 2)};
    const Eigen::Vector3d p[3] = {nodes.row(idx[0]), nodes.row(idx[1]), nodes.row(idx[2])};
    const Eigen::Vector3d face = (p[1] - p[0]).cross(p[2] - p[0]).normalized();
    for (int c = 0; c < 3; ++c) {
      const Eigen::Vector3d u = p[(c + 1) % 3] - p[c];
      const Eigen::Vector3d v = p[(c + 2) % 3] - p[c];
      const double angle = std::atan2(u.cross(v).norm(), u.dot(v));
      acc.row(idx[c]) += angle * face.transpose();
    }
  }
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double len = acc.row(i).norm();
    if (!(len > 0.0))
      fail(ErrorCode::format, "node " + std::to_string(i) +
                                  " has no well-defined normal (unreferenced or folded)");
    acc.row(i) /= len;
  }
  return acc;
}

std::string mesh_checksum(const Eigen::MatrixX3d& nodes, const Elements& elements) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    for (int d = 0; d < 3; ++d) {
      const double v = nodes(i, d);
      h = fnv1a(h, &v, sizeof v);
    }
  }
  for (Eigen::Index e = 0; e < elements.rows(); ++e) {
    for (int c = 0; c < 3; ++c) {
      const std::int32_t v = elements(e, c);
      h = fnv1a(h, &v, sizeof v);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Mesh::Mesh(Eigen::MatrixX3d nodes, Elements elements)
    : nodes_(std::move(nodes)), elements_(std::move(elements)) {
  validate(nodes_, elements_);
  normals_ = angle_weighted_normals(nodes_, elements_);
  non_manifold_ = has_non_manifold_edge(elements_);
  checksum_ = mesh_checksum(nodes_, elements_);
}

PointCloud::PointCloud(Eigen::MatrixX3d pts) : points(std::move(pts)) {
  if (points.rows() < 1) fail(ErrorCode::format, "point cloud is empty");
  if (!points.allFinite()) fail(ErrorCode::format, "point cloud has non-finite coordinates");
}

Elements grid_elements(int nx, int ny) {
  if (nx < 2 || ny < 2) fail(ErrorCode::domain, "grid needs at least 2 x 2 nodes");
  Elements el(2 * static_cast<Eigen::Index>(nx - 1) * (ny - 1), 3);
  Eigen::Index t = 0;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int q0 = j * nx + i;
      const int q1 = q0 + 1;
      const int q2 = q1 + nx;
      const int q3 = q0 + nx;
      el.row(t++) << q0, q1, q2;
      el.row(t++) << q0, q2, q3;
    }
  }
  return el;
}

Mesh make_plate(int nx, int ny, double spacing_x, double spacing_y) {
  return make_surface(nx, ny, spacing_x, spacing_y, [](double, double) { return 0.0; });
}

}  // namespace shapemorph::geometry
