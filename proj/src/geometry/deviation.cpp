#include "shapemorph/geometry/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "shapemorph/error.hpp"
#include "shapemorph/simd/kernels.hpp"

namespace shapemorph::geometry {
namespace {

struct Cell {
  long long x, y, z;
  bool operator==(const Cell&) const = default;
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(c.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

// Uniform hash grid. Points are re-packed cell by cell (stable, so original
// order survives inside a cell) into SoA arrays that the SIMD nearest kernel
// can scan directly.
class HashGrid {
 public:
  HashGrid(const Eigen::MatrixX3d& points, double cell) : cell_(cell), origin_(points.colwise().minCoeff()) {
    const Eigen::Index n = points.rows();
    std::vector<Cell> cells(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) cells[static_cast<std::size_t>(i)] = cell_of(points.row(i));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const Cell& ca = cells[static_cast<std::size_t>(a)];
      const Cell& cb = cells[static_cast<std::size_t>(b)];
      if (ca.x != cb.x) return ca.x < cb.x;
      if (ca.y != cb.y) return ca.y < cb.y;
      return ca.z < cb.z;
    });
    packed_.resize(n, 3);
    index_ = order;
    for (Eigen::Index k = 0; k < n; ++k) packed_.row(k) = points.row(order[static_cast<std::size_t>(k)]);
    std::size_t begin = 0;
    for (std::size_t k = 1; k <= order.size(); ++k) {
      if (k == order.size() || !(cells[static_cast<std::size_t>(order[k])] == cells[static_cast<std::size_t>(order[begin])])) {
        ranges_.emplace(cells[static_cast<std::size_t>(order[begin])], std::make_pair(begin, k));
        begin = k;
      }
    }
  }

  // Nearest point within radius (== cell size), lowest original index on ties.
  Eigen::Index nearest(const Eigen::RowVector3d& q, double radius) const {
    const auto& k = simd::kernels();
    const Cell c = cell_of(q);
    const double* cols[3] = {packed_.col(0).data(), packed_.col(1).data(), packed_.col(2).data()};
    const double qv[3] = {q[0], q[1], q[2]};
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_idx = -1;
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          const auto it = ranges_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == ranges_.end()) continue;
          const auto [b, e] = it->second;
          const double* sub[3] = {cols[0] + b, cols[1] + b, cols[2] + b};
          double d2 = 0.0;
          const std::size_t local = k.nearest(qv, sub, 3, e - b, &d2);
          const Eigen::Index orig = index_[b + local];
          if (d2 < best || (d2 == best && orig < best_idx)) {
            best = d2;
            best_idx = orig;
          }
        }
    if (best_idx >= 0 && std::sqrt(best) > radius) return -1;
    return best_idx;
  }

 private:
  Cell cell_of(const Eigen::RowVector3d& p) const {
    return {static_cast<long long>(std::floor((p[0] - origin_[0]) / cell_)),
            static_cast<long long>(std::floor((p[1] - origin_[1]) / cell_)),
            static_cast<long long>(std::floor((p[2] - origin_[2]) / cell_))};
  }

  double cell_;
  Eigen::RowVector3d origin_;
  Eigen::MatrixX3d packed_;
  std::vector<Eigen::Index> index_;
  std::unordered_map<Cell, std::pair<std::size_t, std::size_t>, CellHash> ranges_;
};

Eigen::VectorXd project_onto_normals(const Eigen::MatrixX3d& vectors, const Eigen::MatrixX3d& normals) {
  Eigen::VectorXd out(vectors.rows());
  const double* a[3] = {vectors.col(0).data(), vectors.col(1).data(), vectors.col(2).data()};
  const double* b[3] = {normals.col(0).data(), normals.col(1).data(), normals.col(2).data()};
  simd::kernels().dot_rows(a, b, 3, static_cast<std::size_t>(vectors.rows()), out.data());
  return out;
}

}  // namespace

const char* to_string(FieldRole role) {
  switch (role) {
    case FieldRole::measured: return "measured";
    case FieldRole::mean: return "mean";
    case FieldRole::unconditional: return "unconditional";
    case FieldRole::instance: return "instance";
  }
  return "unknown";
}

std::size_t DeviationField::missing_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), std::uint8_t{1}));
}

FieldStats field_stats(const Eigen::VectorXd& values) {
  if (values.size() == 0) return {};
  return {values.minCoeff(), values.maxCoeff(), std::sqrt(values.squaredNorm() / static_cast<double>(values.size()))};
}

std::vector<Eigen::Index> nearest_within(const Eigen::MatrixX3d& points,
                                         const Eigen::MatrixX3d& queries, double max_dist) {
  if (!(max_dist > 0.0) || !std::isfinite(max_dist))
    fail(ErrorCode::domain, "max_dist must be positive and finite");
  std::vector<Eigen::Index> out(static_cast<std::size_t>(queries.rows()), -1);
  if (points.rows() == 0) return out;
  const HashGrid grid(points, max_dist);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    out[static_cast<std::size_t>(i)] = grid.nearest(queries.row(i), max_dist);
  return out;
}

DeviationField deviation_from_cop(const Mesh& mesh, const PointCloud& cop, double max_dist) {
  const auto& X = mesh.nodes();
  const Eigen::Index n = X.rows();
  const auto nearest = nearest_within(cop.points, X, max_dist);

  DeviationField field;
  field.mesh_id = mesh.checksum();
  field.role = FieldRole::measured;
  field.missing.assign(static_cast<std::size_t>(n), 0);

  Eigen::MatrixX3d offset = Eigen::MatrixX3d::Zero(n, 3);
  std::vector<Eigen::Index> present;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index q = nearest[static_cast<std::size_t>(i)];
    if (q < 0) {
      field.missing[static_cast<std::size_t>(i)] = 1;
    } else {
      offset.row(i) = cop.points.row(q) - X.row(i);
      present.push_back(i);
    }
  }
  if (present.empty())
    fail(ErrorCode::empty_overlap, "no mesh node has a CoP point within " + std::to_string(max_dist) + " mm");

  field.values = project_onto_normals(offset, mesh.normals());

  if (present.size() < static_cast<std::size_t>(n)) {
    Eigen::MatrixX3d ok(static_cast<Eigen::Index>(present.size()), 3);
    for (std::size_t k = 0; k < present.size(); ++k) ok.row(static_cast<Eigen::Index>(k)) = X.row(present[k]);
    const double* cols[3] = {ok.col(0).data(), ok.col(1).data(), ok.col(2).data()};
    const auto& kern = simd::kernels();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!field.missing[static_cast<std::size_t>(i)]) continue;
      const double q[3] = {X(i, 0), X(i, 1), X(i, 2)};
      const std::size_t k = kern.nearest(q, cols, 3, present.size(), nullptr);
      field.values[i] = field.values[present[k]];
    }
  }
  return field;
}

DeviationField deviation_from_displacement(const Mesh& mesh, const Eigen::MatrixX3d& disp) {
  if (disp.rows() != mesh.node_count())
    fail(ErrorCode::shape, "displacement has " + std::to_string(disp.rows()) + " rows for " +
                               std::to_string(mesh.node_count()) + " nodes");
  if (!disp.allFinite()) fail(ErrorCode::domain, "displacement has non-finite values");
  DeviationField field;
  field.mesh_id = mesh.checksum();
  field.role = FieldRole::measured;
  field.values = project_onto_normals(disp, mesh.normals());
  return field;
}

}  // namespace shapemorph::geometry
