#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

namespace shapemorph::kernels {

enum class Family { squared_exponential, periodic, matern32, matern52 };

const char* to_string(Family family);
Family parse_family(std::string_view name);

struct KernelTerm {
  Family family = Family::matern52;
  double sigma_f2 = 1.0;    // variance, mm^2
  Eigen::VectorXd lengths;  // per-axis correlation lengths, mm
  Eigen::VectorXd periods;  // per-axis periods, mm (periodic only)

  // 1 variance + D lengths (+ D periods for the periodic family).
  int param_count() const;
};

/// Sum of covariance terms over a D-dimensional input space.
struct KernelSpec {
  int dim = 3;
  std::vector<KernelTerm> terms;

  int param_count() const;
  double total_variance() const;

  /// Flattened log-hyperparameters, per term:
  /// [log sigma_f2, log l_0..l_{D-1}, (log p_0..p_{D-1})].
  Eigen::VectorXd log_params() const;
  KernelSpec with_log_params(const Eigen::VectorXd& log_params) const;

  /// Copy with every term's variance scaled so the total equals `variance`
  /// (term ratios preserved).
  KernelSpec scaled_to(double variance) const;

  /// Copy with the first term's correlation lengths replaced.
  KernelSpec with_lengths(const Eigen::VectorXd& lengths) const;
};

/// Throws Error(domain) unless terms are nonempty and all variances,
/// lengths and periods are positive, finite and sized to dim.
void validate(const KernelSpec& spec);

KernelSpec single_term(Family family, double sigma_f2, Eigen::VectorXd lengths,
                       Eigen::VectorXd periods = {});

}  // namespace shapemorph::kernels
