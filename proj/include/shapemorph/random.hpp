#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace shapemorph {

/// Reproducible stream of normal / uniform variates. Each (seed, stream)
/// pair gives an independent sequence, so per-instance draws do not depend
/// on how instances are spread over threads.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Eigen::VectorXd normals(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace shapemorph
