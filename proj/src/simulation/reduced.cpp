#include "shapemorph/simulation/reduced.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <string>
#include <vector>

#include "shapemorph/error.hpp"
#include "shapemorph/geometry/laplacian.hpp"
#include "shapemorph/kernels/covariance.hpp"
#include "shapemorph/simulation/samplers.hpp"

namespace shapemorph::simulation {
namespace {

void check_coverage(const geometry::Mesh& mesh, const std::vector<bool>& is_key) {
  const std::vector<int> label = geometry::connected_components(mesh);
  int n_comp = 0;
  for (int l : label) n_comp = std::max(n_comp, l + 1);
  std::vector<bool> covered(static_cast<std::size_t>(n_comp), false);
  std::vector<Eigen::Index> first(static_cast<std::size_t>(n_comp), -1), count(static_cast<std::size_t>(n_comp), 0);
  for (std::size_t i = 0; i < label.size(); ++i) {
    const auto c = static_cast<std::size_t>(label[i]);
    if (is_key[i]) covered[c] = true;
    if (first[c] < 0) first[c] = static_cast<Eigen::Index>(i);
    ++count[c];
  }
  std::string bad;
  for (std::size_t c = 0; c < covered.size(); ++c)
    if (!covered[c])
      bad += " [component " + std::to_string(c) + ": " + std::to_string(count[c]) + " nodes from node " +
             std::to_string(first[c]) + "]";
  if (!bad.empty()) fail(ErrorCode::coverage, "mesh components without key nodes:" + bad);
}

}  // namespace

EigenBasis reduced_basis(const kernels::KernelSpec& spec, const geometry::Mesh& mesh,
                         const geometry::KeyPointSet& keys, double energy) {
  if (!(energy > 0.0 && energy <= 1.0)) fail(ErrorCode::domain, "energy must lie in (0, 1]");
  geometry::validate(keys, mesh);
  const Eigen::Index N = mesh.node_count();
  const auto K = static_cast<Eigen::Index>(keys.size());

  std::vector<bool> is_key(static_cast<std::size_t>(N), false);
  for (Eigen::Index k : keys.indices) is_key[static_cast<std::size_t>(k)] = true;
  check_coverage(mesh, is_key);

  const Eigen::MatrixXd Xk = kernels::as_points(geometry::key_coordinates(mesh, keys), spec.dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernels::cov_matrix(spec, Xk));
  if (es.info() != Eigen::Success) fail(ErrorCode::non_psd, "key covariance eigendecomposition did not converge");
  const Eigen::VectorXd lam_asc = clamp_spectrum(es.eigenvalues());

  // descending order; the cumulative sum and the total share one summation
  // order so energy = 1 stops exactly at the last nonzero eigenvalue
  Eigen::VectorXd lam = lam_asc.reverse();
  double total = 0.0;
  for (double v : lam) total += v;
  Eigen::Index R = 0;
  double cum = 0.0;
  if (total > 0.0) {
    while (R < K) {
      cum += lam[R++];
      if (cum >= energy * total) break;
    }
  }

  EigenBasis basis;
  basis.eigenvalues = lam.head(R);
  basis.key_basis = es.eigenvectors().rowwise().reverse().leftCols(R);
  basis.energy = total > 0.0 ? cum / total : 1.0;

  basis.full_basis.resize(N, R);
  for (Eigen::Index k = 0; k < K; ++k) basis.full_basis.row(keys.indices[static_cast<std::size_t>(k)]) = basis.key_basis.row(k);
  if (K == N || R == 0) {
    if (R == 0) basis.full_basis.setZero();
    return basis;
  }

  // interior numbering
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(N), -1);
  Eigen::Index n_free = 0;
  for (Eigen::Index i = 0; i < N; ++i)
    if (!is_key[static_cast<std::size_t>(i)]) slot[static_cast<std::size_t>(i)] = n_free++;
  std::vector<Eigen::Index> key_slot(static_cast<std::size_t>(N), -1);
  for (Eigen::Index k = 0; k < K; ++k) key_slot[static_cast<std::size_t>(keys.indices[static_cast<std::size_t>(k)])] = k;

  const Eigen::SparseMatrix<double> L = geometry::cotangent_laplacian(mesh);
  std::vector<Eigen::Triplet<double>> uu, uk;
  for (Eigen::Index c = 0; c < L.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, c); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      if (slot[r] < 0) continue;
      const auto cc = static_cast<std::size_t>(c);
      if (slot[cc] >= 0)
        uu.emplace_back(slot[r], slot[cc], it.value());
      else
        uk.emplace_back(slot[r], key_slot[cc], it.value());
    }
  Eigen::SparseMatrix<double> Luu(n_free, n_free), Luk(n_free, K);
  Luu.setFromTriplets(uu.begin(), uu.end());
  Luk.setFromTriplets(uk.begin(), uk.end());
  const Eigen::MatrixXd rhs = -(Luk * basis.key_basis);

  Eigen::MatrixXd interior(n_free, R);
  bool ok = true;
#pragma omp parallel
  {
    // solver state (iterations, info) is per instance, so one per thread
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * n_free));
    cg.compute(Luu);
#pragma omp for schedule(dynamic) reduction(&& : ok)
    for (Eigen::Index r = 0; r < R; ++r) {
      interior.col(r) = cg.solve(rhs.col(r));
      ok = ok && cg.info() == Eigen::Success;
    }
  }
  if (!ok) fail(ErrorCode::non_psd, "harmonic interpolation did not converge");

  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::Index s = slot[static_cast<std::size_t>(i)];
    if (s >= 0) basis.full_basis.row(i) = interior.row(s);
  }
  return basis;
}

Eigen::VectorXd sample_reduced(const EigenBasis& basis, RandomSource& rng) {
  const Eigen::VectorXd u = rng.normals(basis.rank());
  return basis.full_basis * (basis.eigenvalues.cwiseSqrt().cwiseProduct(u));
}

}  // namespace shapemorph::simulation
