#include "shapemorph/service/preview.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <queue>
#include <set>

#include "shapemorph/error.hpp"

namespace shapemorph::service {
namespace {

static_assert(std::endian::native == std::endian::little, "preview encoding assumes a little-endian host");

struct Edge {
  double len;
  int a, b;
  bool operator>(const Edge& o) const { return std::tie(len, a, b) > std::tie(o.len, o.a, o.b); }
};

class Decimator {
 public:
  explicit Decimator(const geometry::Mesh& mesh) : X_(mesh.nodes()) {
    const auto& E = mesh.elements();
    faces_.resize(static_cast<std::size_t>(E.rows()));
    vf_.resize(static_cast<std::size_t>(X_.rows()));
    for (Eigen::Index f = 0; f < E.rows(); ++f) {
      faces_[static_cast<std::size_t>(f)] = {E(f, 0), E(f, 1), E(f, 2)};
      for (int k = 0; k < 3; ++k) vf_[static_cast<std::size_t>(E(f, k))].insert(static_cast<int>(f));
    }
    alive_faces_ = faces_.size();
    face_alive_.assign(faces_.size(), true);
    std::set<std::pair<int, int>> edges;
    for (const auto& t : faces_)
      for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
    for (const auto& [a, b] : edges) push(a, b);
  }

  void run(std::size_t target) {
    while (alive_faces_ > target && !queue_.empty()) {
      const Edge e = queue_.top();
      queue_.pop();
      if (!adjacent(e.a, e.b)) continue;
      if (!try_collapse(e.b, e.a) && !try_collapse(e.a, e.b)) continue;
    }
  }

  Preview result() const {
    Preview p;
    // surviving nodes keep their relative order
    std::vector<std::int32_t> remap(static_cast<std::size_t>(X_.rows()), -1);
    for (std::size_t f = 0; f < faces_.size(); ++f)
      if (face_alive_[f])
        for (int v : faces_[f]) remap[static_cast<std::size_t>(v)] = 0;
    for (std::size_t v = 0; v < remap.size(); ++v)
      if (remap[v] == 0) {
        remap[v] = static_cast<std::int32_t>(p.nodes.size());
        p.nodes.push_back(static_cast<std::int32_t>(v));
      }
    for (std::size_t f = 0; f < faces_.size(); ++f)
      if (face_alive_[f])
        for (int v : faces_[f]) p.triangles.push_back(static_cast<std::uint32_t>(remap[static_cast<std::size_t>(v)]));
    Eigen::MatrixX3d V(static_cast<Eigen::Index>(p.nodes.size()), 3);
    for (std::size_t i = 0; i < p.nodes.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = X_.row(p.nodes[i]);
    geometry::Elements T(static_cast<Eigen::Index>(p.triangle_count()), 3);
    for (std::size_t t = 0; t < p.triangle_count(); ++t)
      for (int k = 0; k < 3; ++k) T(static_cast<Eigen::Index>(t), k) = static_cast<int>(p.triangles[3 * t + static_cast<std::size_t>(k)]);
    p.normals = geometry::angle_weighted_normals(V, T);
    return p;
  }

 private:
  void push(int a, int b) { queue_.push({(X_.row(a) - X_.row(b)).norm(), a, b}); }

  std::set<int> neighbours(int v) const {
    std::set<int> n;
    for (int f : vf_[static_cast<std::size_t>(v)])
      for (int w : faces_[static_cast<std::size_t>(f)])
        if (w != v) n.insert(w);
    return n;
  }

  bool adjacent(int a, int b) const {
    for (int f : vf_[static_cast<std::size_t>(a)])
      for (int w : faces_[static_cast<std::size_t>(f)])
        if (w == b) return true;
    return false;
  }

  int shared_faces(int a, int b) const {
    int n = 0;
    for (int f : vf_[static_cast<std::size_t>(a)])
      if (vf_[static_cast<std::size_t>(b)].count(f)) ++n;
    return n;
  }

  bool on_boundary(int v) const {
    for (int w : neighbours(v))
      if (shared_faces(v, w) == 1) return true;
    return false;
  }

  Eigen::Vector3d normal(const std::array<int, 3>& t) const {
    const Eigen::Vector3d a = X_.row(t[0]), b = X_.row(t[1]), c = X_.row(t[2]);
    return (b - a).cross(c - a);
  }

  // removes v, attaching its faces to u
  bool try_collapse(int v, int u) {
    const int shared = shared_faces(u, v);
    // link condition: common neighbours are exactly the opposite vertices
    const auto nu = neighbours(u), nv = neighbours(v);
    int common = 0;
    for (int w : nv)
      if (nu.count(w)) ++common;
    if (common != shared) return false;
    const bool bv = on_boundary(v), bu = on_boundary(u);
    if (bv && !(bu && shared == 1)) return false;  // only slide along a boundary edge

    for (int f : vf_[static_cast<std::size_t>(v)]) {
      const auto& t = faces_[static_cast<std::size_t>(f)];
      if (std::find(t.begin(), t.end(), u) != t.end()) continue;
      auto moved = t;
      std::replace(moved.begin(), moved.end(), v, u);
      const Eigen::Vector3d n0 = normal(t), n1 = normal(moved);
      if (n1.squaredNorm() == 0.0 || n0.dot(n1) <= 0.0) return false;
    }

    const std::vector<int> vfaces(vf_[static_cast<std::size_t>(v)].begin(), vf_[static_cast<std::size_t>(v)].end());
    for (int f : vfaces) {
      auto& t = faces_[static_cast<std::size_t>(f)];
      if (std::find(t.begin(), t.end(), u) != t.end()) {
        for (int w : t) vf_[static_cast<std::size_t>(w)].erase(f);
        face_alive_[static_cast<std::size_t>(f)] = false;
        --alive_faces_;
      } else {
        std::replace(t.begin(), t.end(), v, u);
        vf_[static_cast<std::size_t>(u)].insert(f);
      }
    }
    vf_[static_cast<std::size_t>(v)].clear();
    for (int w : nv)
      if (w != u && !nu.count(w)) push(std::min(u, w), std::max(u, w));
    return true;
  }

  const Eigen::MatrixX3d& X_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<bool> face_alive_;
  std::vector<std::set<int>> vf_;
  std::size_t alive_faces_ = 0;
  std::priority_queue<Edge, std::vector<Edge>, std::greater<>> queue_;
};

template <class T>
void append(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

Preview decimate(const geometry::Mesh& mesh, std::size_t max_triangles) {
  if (max_triangles < 1) fail(ErrorCode::domain, "preview needs at least one triangle");
  Decimator d(mesh);
  if (static_cast<std::size_t>(mesh.element_count()) > max_triangles) d.run(max_triangles);
  return d.result();
}

std::string encode_preview(const Preview& p, const geometry::Mesh& mesh) {
  std::string out;
  out.reserve(16 + 4 * (6 * p.vertex_count() + p.triangles.size()));
  out.append("SMPV", 4);
  append(out, std::uint32_t{1});
  append(out, static_cast<std::uint32_t>(p.vertex_count()));
  append(out, static_cast<std::uint32_t>(p.triangle_count()));
  for (std::int32_t n : p.nodes)
    for (int d = 0; d < 3; ++d) append(out, static_cast<float>(mesh.nodes()(n, d)));
  for (std::uint32_t i : p.triangles) append(out, i);
  for (Eigen::Index v = 0; v < p.normals.rows(); ++v)
    for (int d = 0; d < 3; ++d) append(out, static_cast<float>(p.normals(v, d)));
  return out;
}

std::string sample_float32(const Preview& p, const Eigen::VectorXd& values) {
  std::string out;
  out.reserve(4 * p.vertex_count());
  for (std::int32_t n : p.nodes) append(out, static_cast<float>(values[n]));
  return out;
}

}  // namespace shapemorph::service
