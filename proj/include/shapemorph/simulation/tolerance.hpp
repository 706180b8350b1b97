#pragma once

namespace shapemorph::simulation {

/// Symmetric tolerance band |LSL| = |USL| held with probability p.
struct ToleranceSpec {
  double usl = 0.0;      // mm
  double lsl = 0.0;      // mm, magnitude; must equal usl
  double p = 0.0;        // in (0, 1)
  double s_z = 0.0;      // Phi^-1((1 + p) / 2)
  double sigma_t = 0.0;  // usl / s_z, mm
};

/// Phi^-1(q) for q in (0, 1): Acklam's rational approximation polished by
/// one Halley step, |error| well below 1e-9.
double inverse_normal_cdf(double q);

double normal_cdf(double x);

/// Fills s_z and sigma_t; throws Error(domain) unless usl > 0, lsl == usl
/// and 0 < p < 1.
ToleranceSpec make_tolerance(double usl, double p, double lsl);
inline ToleranceSpec make_tolerance(double usl, double p) { return make_tolerance(usl, p, usl); }

/// sigma_T = usl / Phi^-1((1 + p) / 2).
double sigma_from_tolerance(double usl, double p);

}  // namespace shapemorph::simulation
