#pragma once

#include <Eigen/Core>

#include "shapemorph/geometry/keypoints.hpp"
#include "shapemorph/kernels/kernel_spec.hpp"
#include "shapemorph/random.hpp"

namespace shapemorph::simulation {

struct EigenBasis {
  Eigen::MatrixXd key_basis;    // K x R, orthonormal columns
  Eigen::VectorXd eigenvalues;  // R, descending, >= 0
  Eigen::MatrixXd full_basis;   // N x R, harmonic extension of key_basis
  double energy = 0.0;          // retained fraction of the eigenvalue sum

  Eigen::Index rank() const { return eigenvalues.size(); }
};

/// Truncated eigenbasis of C(X_k, X_k), extended to every mesh node by
/// harmonic interpolation: L_uu Phi_u = -L_uk Phi_k on the cotangent
/// Laplacian with key rows held fixed, solved per column by conjugate
/// gradients (tol 1e-10). Keeps the smallest R whose cumulative eigenvalue
/// fraction reaches `energy`; eigenvalues at round-off level count as zero,
/// so energy = 1 keeps the numerical rank.
///
/// Throws Error(coverage) if a connected mesh component holds no key node.
EigenBasis reduced_basis(const kernels::KernelSpec& spec, const geometry::Mesh& mesh,
                         const geometry::KeyPointSet& keys, double energy = 0.99);

/// xi = Phi_R Lambda_R^1/2 U_R over all mesh nodes.
Eigen::VectorXd sample_reduced(const EigenBasis& basis, RandomSource& rng);

}  // namespace shapemorph::simulation
