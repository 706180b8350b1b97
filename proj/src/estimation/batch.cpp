#include "shapemorph/estimation/batch.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "shapemorph/error.hpp"
#include "shapemorph/random.hpp"

namespace shapemorph::estimation {
namespace {

constexpr int kMaxDraws = 1000;

Eigen::MatrixXd length_matrix(const std::vector<FitResult>& fits, const char* what) {
  if (fits.size() < 2)
    fail(ErrorCode::insufficient_data, std::string(what) + " needs at least 2 fits, got " + std::to_string(fits.size()));
  const auto& first = fits.front().spec;
  if (first.terms.empty()) fail(ErrorCode::domain, "fit has no kernel terms");
  Eigen::MatrixXd L(static_cast<Eigen::Index>(fits.size()), first.dim);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& s = fits[i].spec;
    if (s.dim != first.dim || s.terms.size() != first.terms.size())
      fail(ErrorCode::shape, "fit " + std::to_string(i) + " has a different dimension or term count");
    for (std::size_t t = 0; t < s.terms.size(); ++t)
      if (s.terms[t].family != first.terms[t].family)
        fail(ErrorCode::domain, "fit " + std::to_string(i) + " uses a different covariance family");
    L.row(static_cast<Eigen::Index>(i)) = s.terms.front().lengths.transpose();
  }
  return L;
}

}  // namespace

void validate(const BatchModel& m) {
  if (m.count < 2) fail(ErrorCode::insufficient_data, "batch model needs a count of at least 2");
  if (m.mean.size() < 1 || m.mean.size() > 3) fail(ErrorCode::shape, "batch mean must have 1 to 3 entries");
  if (m.cov.rows() != m.mean.size() || m.cov.cols() != m.mean.size())
    fail(ErrorCode::shape, "batch covariance must be D x D");
  if (!m.mean.allFinite() || !m.cov.allFinite()) fail(ErrorCode::domain, "batch model has non-finite entries");
  if ((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cov.cwiseAbs().maxCoeff()))
    fail(ErrorCode::domain, "batch covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.cov);
  if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
    fail(ErrorCode::domain, "batch covariance is not positive semi-definite");
}

BatchModel characterize_batch(const std::vector<FitResult>& fits) {
  const Eigen::MatrixXd L = length_matrix(fits, "batch characterization");
  BatchModel m;
  m.count = static_cast<int>(L.rows());
  m.mean = L.colwise().mean().transpose();
  const Eigen::MatrixXd centred = L.rowwise() - m.mean.transpose();
  m.cov = centred.transpose() * centred / static_cast<double>(L.rows() - 1);
  return m;
}

AxisTest welch_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorCode::insufficient_data, "t-test needs at least 2 samples per side");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = a.mean(), mb = b.mean();
  const double va = (a.array() - ma).square().sum() / (na - 1.0);
  const double vb = (b.array() - mb).square().sum() / (nb - 1.0);
  if (va == 0.0 && vb == 0.0) fail(ErrorCode::undefined_test, "both batches have zero variance");
  const double sa = va / na, sb = vb / nb;
  AxisTest r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

std::vector<AxisTest> compare_batches(const std::vector<FitResult>& a, const std::vector<FitResult>& b) {
  const Eigen::MatrixXd La = length_matrix(a, "batch comparison");
  const Eigen::MatrixXd Lb = length_matrix(b, "batch comparison");
  if (La.cols() != Lb.cols()) fail(ErrorCode::shape, "batches have different dimensions");
  std::vector<AxisTest> out;
  for (Eigen::Index d = 0; d < La.cols(); ++d) out.push_back(welch_test(La.col(d), Lb.col(d)));
  return out;
}

kernels::KernelSpec sample_batch_params(const BatchModel& model, const kernels::KernelSpec& tmpl, std::uint64_t seed) {
  validate(model);
  if (tmpl.dim != model.mean.size())
    fail(ErrorCode::shape, "template dimension " + std::to_string(tmpl.dim) + " does not match batch dimension " +
                               std::to_string(model.mean.size()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.cov);
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  RandomSource rng(seed);
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    const Eigen::VectorXd l = model.mean + root * rng.normals(model.mean.size());
    if ((l.array() > 0.0).all()) {
      auto out = tmpl.with_lengths(l);
      kernels::validate(out);
      return out;
    }
  }
  fail(ErrorCode::sampling, "no positive correlation lengths in " + std::to_string(kMaxDraws) + " draws");
}

}  // namespace shapemorph::estimation
