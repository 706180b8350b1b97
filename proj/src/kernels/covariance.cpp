#include "shapemorph/kernels/covariance.hpp"

#include <cmath>
#include <numbers>

#include "shapemorph/error.hpp"
#include "shapemorph/simd/kernels.hpp"

namespace shapemorph::kernels {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.2360679774997896;

bool stationary(Family f) { return f != Family::periodic; }

double stationary_value(Family f, double s2, double r2) {
  switch (f) {
    case Family::squared_exponential:
      return s2 * std::exp(-0.5 * r2);
    case Family::matern32: {
      const double a = kSqrt3 * std::sqrt(r2);
      return s2 * (1.0 + a) * std::exp(-a);
    }
    case Family::matern52: {
      const double a = kSqrt5 * std::sqrt(r2);
      return s2 * (1.0 + a + (5.0 / 3.0) * r2) * std::exp(-a);
    }
    case Family::periodic:
      break;
  }
  return 0.0;
}

double periodic_exponent(const KernelTerm& t, const double* x, const double* y, int dim) {
  double acc = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double s = std::sin(std::numbers::pi * (x[d] - y[d]) / t.periods[d]) / t.lengths[d];
    acc = acc + s * s;
  }
  return acc;
}

void check_points(const KernelSpec& spec, const PointsRef& P, const char* what) {
  if (P.cols() != spec.dim)
    fail(ErrorCode::shape, std::string(what) + " has dimension " + std::to_string(P.cols()) +
                               ", kernel expects " + std::to_string(spec.dim));
}

// Coordinates divided by the term's lengths, one contiguous array per axis.
struct Scaled {
  Eigen::MatrixXd pts;
  const double* cols[simd::kMaxDim] = {nullptr, nullptr, nullptr};

  Scaled() = default;
  Scaled(const PointsRef& P, const Eigen::VectorXd& lengths) : pts(P.rows(), P.cols()) {
    for (Eigen::Index d = 0; d < P.cols(); ++d) pts.col(d) = P.col(d).array() / lengths[d];
    for (Eigen::Index d = 0; d < P.cols(); ++d) cols[d] = pts.col(d).data();
  }
  Scaled(const Scaled&) = delete;
  Scaled& operator=(const Scaled&) = delete;
  Scaled(Scaled&& o) noexcept : pts(std::move(o.pts)) {
    for (Eigen::Index d = 0; d < pts.cols(); ++d) cols[d] = pts.col(d).data();
  }
};

std::vector<Scaled> scale_terms(const KernelSpec& spec, const PointsRef& P) {
  std::vector<Scaled> out;
  out.reserve(spec.terms.size());
  for (const auto& t : spec.terms) out.push_back(stationary(t.family) ? Scaled(P, t.lengths) : Scaled());
  return out;
}

// Accumulates column j of C(A, B) for rows [0, m) into `col`.
void fill_column(const KernelSpec& spec, const std::vector<Scaled>& sa, const std::vector<Scaled>& sb,
                 const PointsRef& A, const PointsRef& B, Eigen::Index j, Eigen::Index m, double* col,
                 std::vector<double>& scratch) {
  const int D = spec.dim;
  const auto& k = simd::kernels();
  for (Eigen::Index i = 0; i < m; ++i) col[i] = 0.0;
  scratch.resize(static_cast<std::size_t>(m));
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const auto& term = spec.terms[t];
    if (stationary(term.family)) {
      double q[simd::kMaxDim];
      for (int d = 0; d < D; ++d) q[d] = sb[t].pts(j, d);
      k.sq_dist(q, sa[t].cols, D, static_cast<std::size_t>(m), scratch.data());
      for (Eigen::Index i = 0; i < m; ++i) col[i] = col[i] + stationary_value(term.family, term.sigma_f2, scratch[i]);
    } else {
      double y[simd::kMaxDim];
      double x[simd::kMaxDim];
      for (int d = 0; d < D; ++d) y[d] = B(j, d);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (int d = 0; d < D; ++d) x[d] = A(i, d);
        col[i] = col[i] + term.sigma_f2 * std::exp(-0.5 * periodic_exponent(term, x, y, D));
      }
    }
  }
}

// Per-pair derivatives of C(A_i, A_j), i in [0, m), w.r.t. every flattened
// log-parameter, written to dC (m x P, one column per parameter).
void column_derivatives(const KernelSpec& spec, const std::vector<Scaled>& sa, const PointsRef& A,
                        Eigen::Index j, Eigen::Index m, Eigen::MatrixXd& dC,
                        std::vector<std::vector<double>>& axis) {
  const int D = spec.dim;
  const auto& k = simd::kernels();
  dC.resize(m, spec.param_count());
  axis.resize(static_cast<std::size_t>(D));
  for (auto& a : axis) a.resize(static_cast<std::size_t>(m));

  Eigen::Index p0 = 0;
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const auto& term = spec.terms[t];
    const double s2 = term.sigma_f2;
    if (stationary(term.family)) {
      for (int d = 0; d < D; ++d) {
        const double q = sa[t].pts(j, d);
        const double* col = sa[t].cols[d];
        k.sq_dist(&q, &col, 1, static_cast<std::size_t>(m), axis[static_cast<std::size_t>(d)].data());
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        double r2 = 0.0;
        for (int d = 0; d < D; ++d) r2 = r2 + axis[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
        double value = 0.0;
        double per_axis = 0.0;  // dC/dlog l_d = per_axis * (dx_d/l_d)^2
        switch (term.family) {
          case Family::squared_exponential:
            value = s2 * std::exp(-0.5 * r2);
            per_axis = value;
            break;
          case Family::matern32: {
            const double a = kSqrt3 * std::sqrt(r2);
            const double e = std::exp(-a);
            value = s2 * (1.0 + a) * e;
            per_axis = s2 * 3.0 * e;
            break;
          }
          case Family::matern52: {
            const double a = kSqrt5 * std::sqrt(r2);
            const double e = std::exp(-a);
            value = s2 * (1.0 + a + (5.0 / 3.0) * r2) * e;
            per_axis = s2 * (5.0 / 3.0) * (1.0 + a) * e;
            break;
          }
          case Family::periodic:
            break;
        }
        dC(i, p0) = value;
        for (int d = 0; d < D; ++d) dC(i, p0 + 1 + d) = per_axis * axis[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
      }
    } else {
      for (Eigen::Index i = 0; i < m; ++i) {
        double acc = 0.0;
        double u2[simd::kMaxDim];
        double sc[simd::kMaxDim];
        for (int d = 0; d < D; ++d) {
          const double arg = std::numbers::pi * (A(i, d) - A(j, d)) / term.periods[d];
          const double s = std::sin(arg);
          const double u = s / term.lengths[d];
          u2[d] = u * u;
          sc[d] = s * std::cos(arg) * arg / (term.lengths[d] * term.lengths[d]);
          acc = acc + u2[d];
        }
        const double value = s2 * std::exp(-0.5 * acc);
        dC(i, p0) = value;
        for (int d = 0; d < D; ++d) {
          dC(i, p0 + 1 + d) = value * u2[d];
          dC(i, p0 + 1 + D + d) = value * sc[d];
        }
      }
    }
    p0 += term.param_count();
  }
}

}  // namespace

double eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != spec.dim || y.size() != spec.dim)
    fail(ErrorCode::shape, "kernel expects " + std::to_string(spec.dim) + "-dimensional inputs, got " +
                               std::to_string(x.size()) + " and " + std::to_string(y.size()));
  const int D = spec.dim;
  double acc = 0.0;
  for (const auto& term : spec.terms) {
    if (stationary(term.family)) {
      double r2 = 0.0;
      for (int d = 0; d < D; ++d) {
        const double diff = y[d] / term.lengths[d] - x[d] / term.lengths[d];
        r2 = r2 + diff * diff;
      }
      acc = acc + stationary_value(term.family, term.sigma_f2, r2);
    } else {
      acc = acc + term.sigma_f2 * std::exp(-0.5 * periodic_exponent(term, x.data(), y.data(), D));
    }
  }
  return acc;
}

Eigen::MatrixXd cov_matrix(const KernelSpec& spec, const PointsRef& A, const PointsRef& B) {
  check_points(spec, A, "A");
  check_points(spec, B, "B");
  const auto sa = scale_terms(spec, A);
  const auto sb = scale_terms(spec, B);
  Eigen::MatrixXd C(A.rows(), B.rows());
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(dynamic, 16)
    for (Eigen::Index j = 0; j < B.rows(); ++j) fill_column(spec, sa, sb, A, B, j, A.rows(), C.col(j).data(), scratch);
  }
  return C;
}

Eigen::MatrixXd cov_matrix(const KernelSpec& spec, const PointsRef& A) {
  check_points(spec, A, "A");
  const auto sa = scale_terms(spec, A);
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd C(n, n);
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(dynamic, 16)
    for (Eigen::Index j = 0; j < n; ++j) {
      fill_column(spec, sa, sa, A, A, j, j + 1, C.col(j).data(), scratch);
      for (Eigen::Index i = 0; i < j; ++i) C(j, i) = C(i, j);
    }
  }
  return C;
}

std::vector<Eigen::MatrixXd> grad_log_params(const KernelSpec& spec, const PointsRef& A) {
  check_points(spec, A, "A");
  const auto sa = scale_terms(spec, A);
  const Eigen::Index n = A.rows();
  const int P = spec.param_count();
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(P), Eigen::MatrixXd(n, n));
#pragma omp parallel
  {
    Eigen::MatrixXd dC;
    std::vector<std::vector<double>> axis;
#pragma omp for schedule(dynamic, 16)
    for (Eigen::Index j = 0; j < n; ++j) {
      column_derivatives(spec, sa, A, j, j + 1, dC, axis);
      for (int p = 0; p < P; ++p)
        for (Eigen::Index i = 0; i <= j; ++i) {
          out[static_cast<std::size_t>(p)](i, j) = dC(i, p);
          out[static_cast<std::size_t>(p)](j, i) = dC(i, p);
        }
    }
  }
  return out;
}

Eigen::VectorXd weighted_grad_log_params(const KernelSpec& spec, const PointsRef& A, const Eigen::MatrixXd& W) {
  check_points(spec, A, "A");
  if (W.rows() != A.rows() || W.cols() != A.rows()) fail(ErrorCode::shape, "weight matrix must be A x A");
  const auto sa = scale_terms(spec, A);
  const Eigen::Index n = A.rows();
  const int P = spec.param_count();
  // Per-column partial sums, reduced in column order so the result does not
  // depend on the thread count.
  Eigen::MatrixXd partial(P, n);
#pragma omp parallel
  {
    Eigen::MatrixXd dC;
    std::vector<std::vector<double>> axis;
    Eigen::VectorXd w;
#pragma omp for schedule(dynamic, 16)
    for (Eigen::Index j = 0; j < n; ++j) {
      column_derivatives(spec, sa, A, j, j + 1, dC, axis);
      w = 2.0 * W.col(j).head(j + 1);
      w[j] = W(j, j);
      partial.col(j) = dC.transpose() * w;
    }
  }
  return partial.rowwise().sum();
}

Eigen::MatrixXd as_points(const Eigen::MatrixX3d& xyz, int dim) {
  if (dim < 1 || dim > 3) fail(ErrorCode::domain, "point dimension must be 1, 2 or 3");
  return xyz.leftCols(dim);
}

}  // namespace shapemorph::kernels
