#pragma once

namespace shapemorph::geometry {

Elements grid_elements(int nx, int ny);

template <class HeightFn>
Mesh make_surface(int nx, int ny, double spacing_x, double spacing_y, HeightFn height) {
  Eigen::MatrixX3d nodes(static_cast<Eigen::Index>(nx) * ny, 3);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(j) * nx + i;
      const double x = i * spacing_x;
      const double y = j * spacing_y;
      nodes(k, 0) = x;
      nodes(k, 1) = y;
      nodes(k, 2) = height(x, y);
    }
  }
  return Mesh(std::move(nodes), grid_elements(nx, ny));
}

}  // namespace shapemorph::geometry
