#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include "shapemorph/simulation/tolerance.hpp"
#include "support/test_util.hpp"

using namespace shapemorph;
using namespace shapemorph::simulation;

namespace {

double quantile_oracle(double q) { return boost::math::quantile(boost::math::normal(), q); }

}  // namespace

TEST(Tolerance, InverseCdfMatchesBoostQuantile) {
  for (double q : {1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.985, 0.999999})
    EXPECT_NEAR(inverse_normal_cdf(q), quantile_oracle(q), 1e-9 * std::max(1.0, std::abs(quantile_oracle(q)))) << q;
}

TEST(Tolerance, TwoMillimetresAt97Percent) {
  const ToleranceSpec t = make_tolerance(2.0, 0.97);
  EXPECT_NEAR(t.s_z, quantile_oracle(0.985), 1e-9);
  EXPECT_NEAR(t.s_z, 2.170090, 1e-6);
  EXPECT_NEAR(t.sigma_t, 0.921621, 1e-5);
  EXPECT_NEAR(sigma_from_tolerance(2.0, 0.97), 2.0 / quantile_oracle(0.985), 1e-9);
}

TEST(Tolerance, OneMillimetreAt95Percent) {
  EXPECT_NEAR(sigma_from_tolerance(1.0, 0.95), 0.510213, 1e-5);
  EXPECT_NEAR(make_tolerance(1.0, 0.95).s_z, 1.959964, 1e-6);
}

TEST(Tolerance, Monotone) {
  double prev = sigma_from_tolerance(1.0, 0.5);
  for (double p = 0.55; p < 0.999; p += 0.05) {
    const double s = sigma_from_tolerance(1.0, p);
    EXPECT_LT(s, prev);
    prev = s;
  }
  EXPECT_LT(sigma_from_tolerance(1.0, 1.0 - 1e-12), 0.15);
  EXPECT_LT(sigma_from_tolerance(1.0, 0.9), sigma_from_tolerance(1.5, 0.9));
}

TEST(Tolerance, RoundTrip) {
  for (double usl : {0.1, 1.0, 2.0, 7.5})
    for (double p : {0.5, 0.9, 0.95, 0.97, 0.999}) {
      const double s = sigma_from_tolerance(usl, p);
      EXPECT_NEAR(2.0 * normal_cdf(usl / s) - 1.0, p, 1e-8);
    }
}

TEST(Tolerance, RejectsBadInput) {
  EXPECT_ERROR_CODE(make_tolerance(2.0, 0.0), ErrorCode::domain);
  EXPECT_ERROR_CODE(make_tolerance(2.0, 1.0), ErrorCode::domain);
  EXPECT_ERROR_CODE(make_tolerance(-1.0, 0.9), ErrorCode::domain);
  EXPECT_ERROR_CODE(make_tolerance(2.0, 0.9, 1.0), ErrorCode::domain);
  EXPECT_ERROR_CODE(inverse_normal_cdf(1.5), ErrorCode::domain);
}
