#include "shapemorph/estimation/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "shapemorph/error.hpp"
#include "shapemorph/estimation/likelihood.hpp"
#include "shapemorph/random.hpp"

namespace shapemorph::estimation {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxBacktracks = 40;
constexpr double kFtol = 1e-10;

Eigen::VectorXd axis_extents(const kernels::PointsRef& points) {
  Eigen::VectorXd e = points.colwise().maxCoeff() - points.colwise().minCoeff();
  const double widest = e.maxCoeff() > 0.0 ? e.maxCoeff() : 1.0;
  for (Eigen::Index d = 0; d < e.size(); ++d)
    if (!(e[d] > 0.0)) e[d] = widest;
  return e;
}

double variance_scale(const Eigen::VectorXd& z) {
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / static_cast<double>(z.size());
  if (var > 0.0) return var;
  const double ms = z.squaredNorm() / static_cast<double>(z.size());
  return ms > 0.0 ? ms : 1e-12;
}

class Objective {
 public:
  Objective(const kernels::KernelSpec& tmpl, const kernels::PointsRef& points, const Eigen::VectorXd& z,
            double rel_jitter)
      : tmpl_(tmpl), points_(points), z_(z), rel_jitter_(rel_jitter) {}

  std::optional<double> value(const Eigen::VectorXd& x) const {
    try {
      const auto spec = tmpl_.with_log_params(x);
      const double f = evaluate_likelihood(spec, points_, z_, rel_jitter_ * spec.total_variance(), false).nll;
      if (std::isfinite(f)) return f;
    } catch (const Error&) {
    }
    return std::nullopt;
  }

  // The jitter follows the total variance, so its slope feeds into every
  // variance parameter.
  std::optional<double> value_grad(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    try {
      const auto spec = tmpl_.with_log_params(x);
      const double total = spec.total_variance();
      const auto ev = evaluate_likelihood(spec, points_, z_, rel_jitter_ * total, true);
      if (!std::isfinite(ev.nll) || !ev.gradient.allFinite()) return std::nullopt;
      g = ev.gradient;
      Eigen::Index p = 0;
      for (const auto& t : spec.terms) {
        g[p] += ev.jitter_slope * ev.jitter * (t.sigma_f2 / total);
        p += t.param_count();
      }
      return ev.nll;
    } catch (const Error&) {
    }
    return std::nullopt;
  }

 private:
  const kernels::KernelSpec& tmpl_;
  const kernels::PointsRef& points_;
  const Eigen::VectorXd& z_;
  double rel_jitter_;
};

struct RestartOutcome {
  Eigen::VectorXd x;
  double initial = std::numeric_limits<double>::quiet_NaN();
  double nll = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
  std::string failure;
};

// Gradient with components that push against an active bound removed.
Eigen::VectorXd projected(const Eigen::VectorXd& g, const Eigen::VectorXd& x, const ParamBounds& b) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (x[i] <= b.lower[i] && g[i] > 0.0) pg[i] = 0.0;
    if (x[i] >= b.upper[i] && g[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

RestartOutcome run_restart(const Objective& obj, Eigen::VectorXd x, const ParamBounds& b, const FitConfig& cfg) {
  RestartOutcome out;
  auto clamp = [&](Eigen::VectorXd v) { return v.cwiseMax(b.lower).cwiseMin(b.upper).eval(); };
  x = clamp(std::move(x));
  Eigen::VectorXd g;
  auto f0 = obj.value_grad(x, g);
  if (!f0) {
    out.failure = "likelihood not finite at the starting point";
    return out;
  }
  double f = *f0;
  out.initial = f;
  Eigen::VectorXd pg = projected(g, x, b);
  Eigen::VectorXd d = -pg;
  double prev_step = 0.0, prev_slope = 0.0;

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (pg.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      out.converged = true;
      break;
    }
    if (d.dot(pg) >= 0.0) d = -pg;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if ((x[i] <= b.lower[i] && d[i] < 0.0) || (x[i] >= b.upper[i] && d[i] > 0.0)) d[i] = 0.0;

    // First trial step: at most one unit in log-space, otherwise the previous
    // step rescaled by the ratio of directional derivatives.
    const double slope = g.dot(d);
    const double cap = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300));
    double t = prev_step > 0.0 ? std::min(cap, 4.0 * prev_step * prev_slope / slope) : cap;
    if (!(t > 0.0)) t = cap;
    bool accepted = false;
    Eigen::VectorXd xn;
    double fn = f;
    for (int ls = 0; ls < kMaxBacktracks; ++ls, t *= kShrink) {
      xn = clamp(x + t * d);
      const Eigen::VectorXd step = xn - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      const auto trial = obj.value(xn);
      if (trial && *trial <= f + kArmijo * g.dot(step)) {
        fn = *trial;
        accepted = true;
        prev_step = t;
        prev_slope = slope;
        break;
      }
    }
    if (!accepted) {
      if (d != -pg) {
        d = -pg;
        prev_step = 0.0;
        continue;
      }
      // Steepest descent cannot lower f any further at this resolution.
      out.converged = true;
      break;
    }

    Eigen::VectorXd gn;
    const auto fchk = obj.value_grad(xn, gn);
    if (!fchk) {
      out.failure = "gradient not finite after an accepted step";
      break;
    }
    const double decrease = f - fn;
    const Eigen::VectorXd pgn = projected(gn, xn, b);
    const double beta = std::max(0.0, pgn.dot(pgn - pg) / std::max(pg.squaredNorm(), 1e-300));
    d = -pgn + beta * d;
    x = std::move(xn);
    f = *fchk;
    g = std::move(gn);
    pg = pgn;
    if (decrease <= kFtol * std::max(1.0, std::abs(f))) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.x = x;
  out.nll = f;
  out.iterations = it;
  return out;
}

}  // namespace

void validate(const FitConfig& c) {
  if (c.max_iters < 1) fail(ErrorCode::domain, "max_iters must be at least 1");
  if (!(c.grad_tol > 0.0)) fail(ErrorCode::domain, "grad_tol must be positive");
  if (c.restarts < 1) fail(ErrorCode::domain, "restarts must be at least 1");
  if (!(c.jitter >= 0.0) || !std::isfinite(c.jitter)) fail(ErrorCode::domain, "jitter must be non-negative");
}

ParamBounds param_bounds(const kernels::KernelSpec& tmpl, const kernels::PointsRef& points, const Eigen::VectorXd& z) {
  const Eigen::VectorXd ext = axis_extents(points);
  const double v = variance_scale(z);
  ParamBounds b;
  b.lower.resize(tmpl.param_count());
  b.upper.resize(tmpl.param_count());
  Eigen::Index p = 0;
  for (const auto& t : tmpl.terms) {
    b.lower[p] = std::log(v * 1e-6);
    b.upper[p] = std::log(v * 1e4);
    ++p;
    for (int d = 0; d < tmpl.dim; ++d, ++p) {
      b.lower[p] = std::log(ext[d] * 1e-3);
      b.upper[p] = std::log(ext[d] * 1e2);
    }
    if (t.family == kernels::Family::periodic)
      for (int d = 0; d < tmpl.dim; ++d, ++p) {
        b.lower[p] = std::log(ext[d] * 1e-2);
        b.upper[p] = std::log(ext[d] * 1e1);
      }
  }
  return b;
}

FitResult fit_params(const kernels::PointsRef& points, const Eigen::VectorXd& z,
                     const kernels::KernelSpec& family_template, const FitConfig& config) {
  validate(config);
  if (family_template.terms.empty()) fail(ErrorCode::domain, "kernel template has no terms");
  if (points.cols() != family_template.dim)
    fail(ErrorCode::shape, "points have dimension " + std::to_string(points.cols()) + ", template expects " +
                               std::to_string(family_template.dim));
  if (z.size() != points.rows())
    fail(ErrorCode::shape, "got " + std::to_string(z.size()) + " deviations for " + std::to_string(points.rows()) +
                               " points");
  if (points.rows() < 1) fail(ErrorCode::shape, "no points to fit");
  if (!z.allFinite() || !points.allFinite()) fail(ErrorCode::domain, "fit input contains non-finite values");

  // Sized placeholders so with_log_params can rebuild every term.
  kernels::KernelSpec tmpl = family_template;
  for (auto& t : tmpl.terms) {
    t.lengths = Eigen::VectorXd::Ones(tmpl.dim);
    t.periods = t.family == kernels::Family::periodic ? Eigen::VectorXd::Ones(tmpl.dim) : Eigen::VectorXd();
  }

  FitResult result;
  const int P = tmpl.param_count();
  if (points.rows() < 2 * P)
    result.warnings.push_back("only " + std::to_string(points.rows()) + " key points for " + std::to_string(P) +
                              " hyperparameters; the fit may be poorly determined");

  const ParamBounds bounds = param_bounds(tmpl, points, z);
  const Eigen::VectorXd ext = axis_extents(points);
  const double v = variance_scale(z);
  const double nterms = static_cast<double>(tmpl.terms.size());

  std::vector<Eigen::VectorXd> starts;
  RandomSource rng(config.seed);
  for (int r = 0; r < config.restarts; ++r) {
    Eigen::VectorXd x(P);
    Eigen::Index p = 0;
    for (const auto& t : tmpl.terms) {
      x[p++] = std::log(v / nterms);
      for (int d = 0; d < tmpl.dim; ++d)
        x[p++] = std::log(ext[d]) + std::log(0.1) + rng.uniform() * (std::log(2.0) - std::log(0.1));
      if (t.family == kernels::Family::periodic)
        for (int d = 0; d < tmpl.dim; ++d) x[p++] = std::log(ext[d]);
    }
    starts.push_back(std::move(x));
  }

  const Objective obj(tmpl, points, z, config.jitter);
  std::vector<RestartOutcome> outcomes(starts.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t r = 0; r < starts.size(); ++r) outcomes[r] = run_restart(obj, starts[r], bounds, config);

  int best = -1;
  std::string diagnostics;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const auto& o = outcomes[r];
    result.restart_nlls.push_back(o.nll);
    result.initial_nlls.push_back(o.initial);
    if (!o.failure.empty()) diagnostics += " restart " + std::to_string(r) + ": " + o.failure + ";";
    if (std::isfinite(o.nll) && (best < 0 || o.nll < outcomes[static_cast<std::size_t>(best)].nll))
      best = static_cast<int>(r);
  }
  if (best < 0) fail(ErrorCode::fit_failure, "every optimizer restart diverged:" + diagnostics);

  const auto& o = outcomes[static_cast<std::size_t>(best)];
  result.spec = tmpl.with_log_params(o.x);
  kernels::validate(result.spec);
  result.nll = o.nll;
  result.iterations = o.iterations;
  result.converged = o.converged;
  return result;
}

}  // namespace shapemorph::estimation
