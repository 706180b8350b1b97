#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "shapemorph/geometry/mesh.hpp"

namespace shapemorph::geometry {

/// Positive semi-definite cotangent Laplacian: off-diagonal -w_ij with
/// w_ij = (cot a + cot b) / 2 over the angles opposite edge ij, diagonal the
/// row sum. Weights are clamped to at least 1e-6 x the mean positive weight
/// so obtuse triangles cannot make the operator indefinite.
Eigen::SparseMatrix<double> cotangent_laplacian(const Mesh& mesh);

/// Connected-component label per node (labels 0..n-1 in order of each
/// component's lowest node index).
std::vector<int> connected_components(const Mesh& mesh);

}  // namespace shapemorph::geometry
