#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "shapemorph/geometry/deviation.hpp"
#include "shapemorph/geometry/keypoints.hpp"
#include "shapemorph/kernels/kernel_spec.hpp"
#include "shapemorph/simulation/samplers.hpp"
#include "shapemorph/simulation/tolerance.hpp"

namespace shapemorph::simulation {

enum class Method { cholesky, eigen, reduced };

const char* to_string(Method method);
Method parse_method(std::string_view name);

/// Return false to abort; called with (instances done, total).
using ProgressFn = std::function<bool(std::size_t, std::size_t)>;

struct SimulationOptions {
  Method method = Method::cholesky;
  std::size_t dense_limit = kDefaultDenseLimit;
  double energy = 0.99;         // reduced method only
  double rel_jitter = 1e-8;     // x sigma_T^2, on every factorised matrix
  ProgressFn progress;
};

struct Provenance {
  kernels::KernelSpec spec;  // as sampled, i.e. scaled to sigma_T^2
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> streams;  // one per instance
  Method method = Method::cholesky;
  Eigen::Index basis_rank = 0;         // reduced method only
  double basis_energy = 0.0;
};

struct Ensemble {
  std::string mesh_id;
  std::vector<geometry::DeviationField> instances;
  geometry::DeviationField mean_field;
  ToleranceSpec tolerance;
  geometry::ManipulatedKeySet manipulated;
  Provenance provenance;
};

/// Conditional simulation of non-ideal parts. The covariance is rescaled to
/// total variance sigma_T^2 (term ratios and correlation lengths kept).
///   mean Z_bar    = GPR of the manipulated deviations over all nodes
///   instance i    : xi_u from stream i, Z_bar_k = GPR of xi_u read at the
///                   manipulated keys, Z = Z_bar + Z_bar_k - xi_u
/// With no manipulated keys the instance is the unconditional draw xi_u.
/// Instances are generated in parallel; output depends only on
/// (inputs, seed, method).
Ensemble conditional_simulate(const kernels::KernelSpec& spec, const geometry::Mesh& mesh,
                              const geometry::KeyPointSet& keys, const geometry::ManipulatedKeySet& manipulated,
                              const ToleranceSpec& tol, std::size_t count, std::uint64_t seed,
                              const SimulationOptions& options = {});

}  // namespace shapemorph::simulation
