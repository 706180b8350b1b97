#include "shapemorph/simulation/conditional.hpp"

#include <optional>
#include <string>

#include "shapemorph/error.hpp"
#include "shapemorph/kernels/covariance.hpp"
#include "shapemorph/simulation/gpr.hpp"
#include "shapemorph/simulation/reduced.hpp"

namespace shapemorph::simulation {

const char* to_string(Method method) {
  switch (method) {
    case Method::cholesky: return "cholesky";
    case Method::eigen: return "eigen";
    case Method::reduced: return "reduced";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "cholesky") return Method::cholesky;
  if (name == "eigen") return Method::eigen;
  if (name == "reduced") return Method::reduced;
  fail(ErrorCode::domain, "unknown simulation method '" + std::string(name) + "'");
}

Ensemble conditional_simulate(const kernels::KernelSpec& spec, const geometry::Mesh& mesh,
                              const geometry::KeyPointSet& keys, const geometry::ManipulatedKeySet& manipulated,
                              const ToleranceSpec& tol, std::size_t count, std::uint64_t seed,
                              const SimulationOptions& options) {
  if (count < 1) fail(ErrorCode::domain, "instance count must be at least 1");
  kernels::validate(spec);
  geometry::validate(keys, mesh);
  geometry::validate(manipulated, keys);
  const ToleranceSpec t = make_tolerance(tol.usl, tol.p, tol.lsl);
  if (!(options.rel_jitter >= 0.0)) fail(ErrorCode::domain, "jitter must be non-negative");

  const double var_t = t.sigma_t * t.sigma_t;
  const kernels::KernelSpec scaled = spec.scaled_to(var_t);
  const double jitter = options.rel_jitter * var_t;
  const Eigen::Index N = mesh.node_count();
  const auto M = static_cast<Eigen::Index>(count);
  const Eigen::MatrixXd X = kernels::as_points(mesh.nodes(), scaled.dim);

  Ensemble ens;
  ens.mesh_id = mesh.checksum();
  ens.tolerance = t;
  ens.manipulated = manipulated;
  ens.provenance.spec = scaled;
  ens.provenance.seed = seed;
  ens.provenance.method = options.method;
  for (std::size_t i = 0; i < count; ++i) ens.provenance.streams.push_back(i);

  // unconditional draws, one column per instance
  std::function<Eigen::VectorXd(RandomSource&)> draw;
  std::optional<CholeskySampler> chol;
  std::optional<EigenSampler> eig;
  std::optional<EigenBasis> basis;
  switch (options.method) {
    case Method::cholesky:
      chol.emplace(scaled, X, jitter, options.dense_limit);
      draw = [&](RandomSource& r) { return chol->sample(r); };
      break;
    case Method::eigen:
      eig.emplace(scaled, X, options.dense_limit);
      draw = [&](RandomSource& r) { return eig->sample(r); };
      break;
    case Method::reduced:
      basis = reduced_basis(scaled, mesh, keys, options.energy);
      ens.provenance.basis_rank = basis->rank();
      ens.provenance.basis_energy = basis->energy;
      draw = [&](RandomSource& r) { return sample_reduced(*basis, r); };
      break;
  }

  Eigen::MatrixXd xi(N, M);
  std::size_t done = 0;
  bool cancelled = false;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < M; ++i) {
    bool skip;
#pragma omp atomic read
    skip = cancelled;
    if (skip) continue;
    RandomSource rng(seed, static_cast<std::uint64_t>(i));
    xi.col(i) = draw(rng);
    if (options.progress) {
#pragma omp critical(shapemorph_progress)
      {
        ++done;
        if (!cancelled && !options.progress(done, count)) {
#pragma omp atomic write
          cancelled = true;
        }
      }
    }
  }
  if (cancelled) fail(ErrorCode::cancelled, "simulation cancelled");

  ens.mean_field.mesh_id = ens.mesh_id;
  ens.mean_field.role = geometry::FieldRole::mean;
  Eigen::MatrixXd Z;
  if (manipulated.size() == 0) {
    ens.mean_field.values = Eigen::VectorXd::Zero(N);
    Z = std::move(xi);
  } else {
    const std::vector<Eigen::Index> nodes = geometry::manipulated_nodes(keys, manipulated);
    const GprPredictor gpr(scaled, kernels::as_points(geometry::rows_of(mesh.nodes(), nodes), scaled.dim), jitter);
    const auto Kt = static_cast<Eigen::Index>(nodes.size());
    // one solve for [Z~ | xi(X~_k) per instance]
    Eigen::MatrixXd R(Kt, M + 1);
    R.col(0) = manipulated.deviations;
    for (Eigen::Index k = 0; k < Kt; ++k) R.row(k).tail(M) = xi.row(nodes[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd P = gpr.condition(X, R);
    ens.mean_field.values = P.col(0);
    Z = (P.rightCols(M) - xi).colwise() + P.col(0);
  }

  ens.instances.resize(count);
  for (Eigen::Index i = 0; i < M; ++i) {
    auto& f = ens.instances[static_cast<std::size_t>(i)];
    f.mesh_id = ens.mesh_id;
    f.role = geometry::FieldRole::instance;
    f.values = Z.col(i);
  }
  return ens;
}

}  // namespace shapemorph::simulation
