#include "shapemorph/geometry/laplacian.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <map>
#include <numeric>

namespace shapemorph::geometry {
namespace {

double cot_at(const Eigen::Vector3d& apex, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d u = a - apex, v = b - apex;
  return u.dot(v) / u.cross(v).norm();
}

int find(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

}  // namespace

Eigen::SparseMatrix<double> cotangent_laplacian(const Mesh& mesh) {
  const auto& X = mesh.nodes();
  const auto& F = mesh.elements();
  std::map<std::pair<int, int>, double> w;
  for (Eigen::Index f = 0; f < F.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int i = F(f, (k + 1) % 3), j = F(f, (k + 2) % 3), o = F(f, k);
      const double c = 0.5 * cot_at(X.row(o).transpose(), X.row(i).transpose(), X.row(j).transpose());
      w[{std::min(i, j), std::max(i, j)}] += c;
    }
  }
  double pos_sum = 0.0;
  std::size_t pos_n = 0;
  for (const auto& [_, v] : w)
    if (v > 0.0) pos_sum += v, ++pos_n;
  const double floor = pos_n ? 1e-6 * pos_sum / static_cast<double>(pos_n) : 1e-6;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * w.size());
  for (const auto& [e, v] : w) {
    const double c = std::max(v, floor);
    trip.emplace_back(e.first, e.second, -c);
    trip.emplace_back(e.second, e.first, -c);
    trip.emplace_back(e.first, e.first, c);
    trip.emplace_back(e.second, e.second, c);
  }
  Eigen::SparseMatrix<double> L(X.rows(), X.rows());
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

std::vector<int> connected_components(const Mesh& mesh) {
  const auto n = static_cast<int>(mesh.node_count());
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  const auto& F = mesh.elements();
  for (Eigen::Index f = 0; f < F.rows(); ++f)
    for (int k = 1; k < 3; ++k) {
      const int a = find(parent, F(f, 0)), b = find(parent, F(f, k));
      if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<int> root_label(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(parent, i);
    if (root_label[static_cast<std::size_t>(r)] < 0) root_label[static_cast<std::size_t>(r)] = next++;
    label[static_cast<std::size_t>(i)] = root_label[static_cast<std::size_t>(r)];
  }
  return label;
}

}  // namespace shapemorph::geometry
