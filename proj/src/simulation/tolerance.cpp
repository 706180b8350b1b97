#include "shapemorph/simulation/tolerance.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "shapemorph/error.hpp"

namespace shapemorph::simulation {
namespace {

// Acklam's coefficients.
constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                        1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                        6.680131188771972e+01,  -1.328068155288572e+01};
constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                        -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                        3.754408661907416e+00};
constexpr double kLow = 0.02425;

double acklam(double q) {
  if (q < kLow) {
    const double s = std::sqrt(-2.0 * std::log(q));
    return (((((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4]) * s + c[5]) /
           ((((d[0] * s + d[1]) * s + d[2]) * s + d[3]) * s + 1.0);
  }
  if (q > 1.0 - kLow) return -acklam(1.0 - q);
  const double s = q - 0.5, r = s * s;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double q) {
  if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::domain, "probability must lie in (0, 1), got " + std::to_string(q));
  // work in the lower tail, where 1 - q is exact and erfc keeps full
  // relative precision
  if (q > 0.5) return -inverse_normal_cdf(1.0 - q);
  double x = acklam(q);
  // Halley refinement.
  const double e = normal_cdf(x) - q;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

ToleranceSpec make_tolerance(double usl, double p, double lsl) {
  if (!(usl > 0.0) || !std::isfinite(usl)) fail(ErrorCode::domain, "usl must be positive");
  if (lsl != usl) fail(ErrorCode::domain, "only symmetric tolerances are supported (|lsl| must equal usl)");
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::domain, "p must lie in (0, 1), got " + std::to_string(p));
  ToleranceSpec t;
  t.usl = usl;
  t.lsl = lsl;
  t.p = p;
  t.s_z = inverse_normal_cdf(0.5 * (1.0 + p));
  t.sigma_t = usl / t.s_z;
  if (!(t.sigma_t > 0.0) || !std::isfinite(t.sigma_t)) fail(ErrorCode::domain, "tolerance gives no finite sigma");
  return t;
}

double sigma_from_tolerance(double usl, double p) { return make_tolerance(usl, p).sigma_t; }

}  // namespace shapemorph::simulation
