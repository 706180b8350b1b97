#include "shapemorph/geometry/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "shapemorph/error.hpp"

namespace shapemorph::geometry {

KeyPointSet select_key_points(const Mesh& mesh, double voxel_size) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size))
    fail(ErrorCode::domain, "voxel size must be positive, got " + std::to_string(voxel_size));

  const auto& X = mesh.nodes();
  const BoundingBox box = mesh.bbox();
  long long per_axis[3];
  for (int d = 0; d < 3; ++d)
    per_axis[d] = std::max(1LL, static_cast<long long>(std::ceil(box.extent()[d] / voxel_size)));

  struct Best {
    Eigen::Index node;
    double d2;
  };
  std::map<std::tuple<long long, long long, long long>, Best> voxels;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    long long v[3];
    double d2 = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double rel = (X(i, d) - box.min[d]) / voxel_size;
      v[d] = std::min(static_cast<long long>(std::floor(rel)), per_axis[d] - 1);
      const double centre = box.min[d] + (static_cast<double>(v[d]) + 0.5) * voxel_size;
      d2 += (X(i, d) - centre) * (X(i, d) - centre);
    }
    auto [it, inserted] = voxels.try_emplace({v[0], v[1], v[2]}, Best{i, d2});
    if (!inserted && d2 < it->second.d2) it->second = {i, d2};
  }

  KeyPointSet keys;
  keys.mesh_id = mesh.checksum();
  keys.voxel_size = voxel_size;
  keys.indices.reserve(voxels.size());
  for (const auto& [_, best] : voxels) keys.indices.push_back(best.node);
  std::sort(keys.indices.begin(), keys.indices.end());
  return keys;
}

void validate(const KeyPointSet& keys, const Mesh& mesh) {
  if (keys.indices.empty()) fail(ErrorCode::domain, "key point set is empty");
  if (!keys.mesh_id.empty() && keys.mesh_id != mesh.checksum())
    fail(ErrorCode::checksum_mismatch, "key points belong to mesh " + keys.mesh_id + ", not " + mesh.checksum());
  for (std::size_t k = 0; k < keys.indices.size(); ++k) {
    const Eigen::Index v = keys.indices[k];
    if (v < 0 || v >= mesh.node_count())
      fail(ErrorCode::domain, "key index " + std::to_string(v) + " out of range");
    if (k > 0 && v <= keys.indices[k - 1])
      fail(ErrorCode::domain, "key indices must be strictly increasing");
  }
}

void validate(const ManipulatedKeySet& manipulated, const KeyPointSet& keys) {
  if (static_cast<Eigen::Index>(manipulated.selected.size()) != manipulated.deviations.size())
    fail(ErrorCode::shape, "manipulated set has " + std::to_string(manipulated.selected.size()) +
                               " keys but " + std::to_string(manipulated.deviations.size()) + " deviations");
  if (manipulated.selected.size() > keys.size())
    fail(ErrorCode::domain, "more manipulated keys than key points");
  if (!manipulated.deviations.allFinite()) fail(ErrorCode::domain, "manipulated deviations must be finite");
  std::set<std::size_t> seen;
  for (std::size_t s : manipulated.selected) {
    if (s >= keys.size())
      fail(ErrorCode::domain, "manipulated key position " + std::to_string(s) + " outside key set of " +
                                  std::to_string(keys.size()));
    if (!seen.insert(s).second) fail(ErrorCode::domain, "key position " + std::to_string(s) + " manipulated twice");
  }
}

Eigen::MatrixX3d rows_of(const Eigen::MatrixX3d& points, const std::vector<Eigen::Index>& indices) {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t k = 0; k < indices.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = points.row(indices[k]);
  return out;
}

Eigen::MatrixX3d key_coordinates(const Mesh& mesh, const KeyPointSet& keys) {
  return rows_of(mesh.nodes(), keys.indices);
}

std::vector<Eigen::Index> manipulated_nodes(const KeyPointSet& keys, const ManipulatedKeySet& manipulated) {
  std::vector<Eigen::Index> nodes;
  nodes.reserve(manipulated.selected.size());
  for (std::size_t s : manipulated.selected) nodes.push_back(keys.indices.at(s));
  return nodes;
}

}  // namespace shapemorph::geometry
