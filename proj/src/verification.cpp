#include "hardsum/verification.hpp"

#include "hardsum/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hardsum {

using nlohmann::ordered_json;

std::string to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    case CheckStatus::Skipped:
      return "skipped";
  }
  return "unknown";
}

CheckStatus combine(const std::vector<CheckStatus>& parts) {
  bool any_pass = false;
  for (CheckStatus s : parts) {
    if (s == CheckStatus::Fail) return CheckStatus::Fail;
    if (s == CheckStatus::Pass) any_pass = true;
  }
  return any_pass ? CheckStatus::Pass : CheckStatus::Skipped;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Index uniform_index(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

// Per-coordinate features of these functions sit at unit scale (the kink of Psi at
// 1/2), so the step follows the largest coordinate rather than the Euclidean norm,
// which grows like sqrt(d) and inflates the truncation error in high dimension.
// Psi has a steep fourth derivative around |x| = 0.65; at 1e-5 the O(h^2) error of
// the Hessian difference reaches 1.5e-6 there, at 1e-6 it is about 1e-8 while
// rounding stays near 1e-10.
double check_step(const Vector& x) { return 1e-6 * std::max(1.0, x.lpNorm<Eigen::Infinity>()); }

double scalar_rel(double a, double ref) { return std::abs(a - ref) / std::max(1.0, std::abs(ref)); }

void note_worst(DerivativeReport& r, double gerr, double herr, Index component, const Vector& x) {
  if (gerr > r.worst_gradient_error || herr > r.worst_hessian_error) {
    if (std::max(gerr, herr) >= std::max(r.worst_gradient_error, r.worst_hessian_error)) {
      r.worst_component = component;
      r.worst_point = x;
    }
  }
  r.worst_gradient_error = std::max(r.worst_gradient_error, gerr);
  r.worst_hessian_error = std::max(r.worst_hessian_error, herr);
}

void finish(DerivativeReport& r) {
  if (r.points == 0) {
    r.status = CheckStatus::Skipped;
    return;
  }
  const bool ok = r.worst_gradient_error <= r.tolerance && r.worst_hessian_error <= r.tolerance &&
                  std::isfinite(r.worst_gradient_error) && std::isfinite(r.worst_hessian_error);
  r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ScalarPrimitive> default_scalar_primitives() {
  return {
      {"psi", [](double x, int order) { return psi(x, order); }, 0.3, 3.0},
      {"phi", [](double x, int order) { return phi(x, order); }, -8.0, 8.0},
  };
}

DerivativeReport check_scalar_derivatives(const ScalarPrimitive& f, Index num_points, double tol, Rng& rng) {
  DerivativeReport r;
  r.target = f.name;
  r.tolerance = tol;
  for (Index k = 0; k < num_points; ++k) {
    const double x = uniform(rng, f.lo, f.hi);
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    const double d1 = (f.eval(x + h, 0) - f.eval(x - h, 0)) / (2.0 * h);
    const double d2 = (f.eval(x + h, 1) - f.eval(x - h, 1)) / (2.0 * h);
    note_worst(r, scalar_rel(f.eval(x, 1), d1), scalar_rel(f.eval(x, 2), d2), -1, Vector::Constant(1, x));
    ++r.points;
  }
  finish(r);
  return r;
}

DerivativeReport check_field_derivatives(const std::string& name, const ScalarField& value,
                                         const VectorField& gradient, const HessianField& hessian,
                                         const PointSampler& sampler, Index num_points, double tol, Rng& rng) {
  DerivativeReport r;
  r.target = name;
  r.tolerance = tol;
  for (Index k = 0; k < num_points; ++k) {
    const Vector x = sampler(rng);
    const double h = check_step(x);
    const double gerr = relative_error(gradient(x), finite_diff_gradient(value, x, h));
    const double herr = relative_error(hessian(x), finite_diff_hessian(gradient, x, h));
    note_worst(r, gerr, herr, -1, x);
    ++r.points;
  }
  finish(r);
  return r;
}

DerivativeReport check_derivatives(const std::string& name, const FiniteSumFunction& f, Index num_points,
                                   double tol, Rng& rng, const PointSampler& sampler) {
  DerivativeReport r;
  r.target = name;
  r.tolerance = tol;
  for (Index k = 0; k < num_points; ++k) {
    const Vector x = sampler(rng);
    const double h = check_step(x);
    for (Index i = 0; i < f.num_components(); ++i) {
      const Derivatives d = f.component(i, x, 2);
      const ScalarField value = [&](const Vector& y) { return f.component(i, y, 0).value; };
      const VectorField grad = [&](const Vector& y) { return f.component(i, y, 1).gradient; };
      const double gerr = relative_error(d.gradient, finite_diff_gradient(value, x, h));
      const double herr = relative_error(d.hessian, finite_diff_hessian(grad, x, h));
      note_worst(r, gerr, herr, i, x);
    }
    ++r.points;
  }
  finish(r);
  return r;
}

DerivativeReport check_soft_clamp(Index dim, const SoftClampParams& params, Index num_points, double tol, Rng& rng) {
  DerivativeReport r;
  r.target = "soft_clamp";
  r.tolerance = tol;
  for (Index k = 0; k < num_points; ++k) {
    // Radii from well inside to well outside R, where the clamp bends.
    const Vector g = gaussian_vector(dim, rng);
    const Vector y = g.normalized() * params.radius * std::exp(uniform(rng, std::log(0.05), std::log(5.0)));
    const Vector w = gaussian_vector(dim, rng);
    const double h = default_fd_step(y);

    const SoftClamp c = soft_clamp(y, params, 1);
    Matrix fd(dim, dim);
    for (Index j = 0; j < dim; ++j) {
      Vector yp = y, ym = y;
      yp(j) += h;
      ym(j) -= h;
      fd.col(j) = (soft_clamp(yp, params, 0).value - soft_clamp(ym, params, 0).value) / (2.0 * h);
    }
    const double jerr = relative_error(c.jacobian, fd);

    const VectorField wgrad = [&](const Vector& z) {
      return Vector(soft_clamp(z, params, 1).jacobian.transpose() * w);
    };
    const double cerr = relative_error(soft_clamp_curvature(y, params, w), finite_diff_hessian(wgrad, y, h));
    note_worst(r, jerr, cerr, -1, y);
    ++r.points;
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------

ZeroChainPoint check_zero_chain_point(const Vector& x, double tol) {
  const Index k = x.size();
  ZeroChainPoint out;
  Index i = k + 1;  // 1-based
  while (i > 1 && std::abs(x(i - 2)) < 0.5) --i;
  out.prefix = i;
  if (i >= k) return out;  // no coordinate beyond the prefix

  const ChainMask ones = ChainMask::all_ones(k);
  const Derivatives d = chain_eval(ones, x, 1);
  for (Index j = i; j < k; ++j) out.max_tail_partial = std::max(out.max_tail_partial, std::abs(d.gradient(j)));
  Vector cut = x;
  cut.tail(k - i).setZero();
  out.value_change = std::abs(chain_eval(ones, cut, 0).value - d.value);
  out.status = (out.max_tail_partial <= tol && out.value_change <= tol) ? CheckStatus::Pass : CheckStatus::Fail;
  return out;
}

ZeroChainReport check_zero_chain(Index k, Index num_samples, Rng& rng, double tol) {
  if (k < 2) throw std::invalid_argument("check_zero_chain: need K >= 2");
  ZeroChainReport r;
  r.chain_length = k;
  std::vector<CheckStatus> parts;
  for (Index s = 0; s < num_samples; ++s) {
    const Index i = uniform_index(rng, 1, k - 1);
    Vector x(k);
    for (Index j = 1; j <= k; ++j) x(j - 1) = j < i ? uniform(rng, -3.0, 3.0) : uniform(rng, -0.4999, 0.4999);
    const ZeroChainPoint p = check_zero_chain_point(x, tol);
    ++r.samples;
    if (p.status == CheckStatus::Skipped) ++r.skipped;
    r.max_tail_partial = std::max(r.max_tail_partial, p.max_tail_partial);
    r.max_value_change = std::max(r.max_value_change, p.value_change);
    parts.push_back(p.status);
  }
  r.status = combine(parts);
  return r;
}

// ---------------------------------------------------------------------------

std::string to_string(SmoothnessMode mode) {
  switch (mode) {
    case SmoothnessMode::IndividualGradient:
      return "individual-gradient";
    case SmoothnessMode::IndividualHessian:
      return "individual-hessian";
    case SmoothnessMode::MeanSquared:
      return "mean-squared";
    case SmoothnessMode::ThirdMoment:
      return "third-moment";
  }
  return "unknown";
}

SmoothnessReport estimate_smoothness(const FiniteSumFunction& f, SmoothnessMode mode, Index num_pairs, Rng& rng,
                                     const SmoothnessSampling& sampling) {
  if (num_pairs < 1) throw std::invalid_argument("estimate_smoothness: need at least one pair");
  const Index d = f.dimension();
  const Index n = f.num_components();
  const Vector center = sampling.center.size() == 0 ? Vector::Zero(d) : sampling.center;
  if (center.size() != d) throw std::invalid_argument("estimate_smoothness: center has the wrong dimension");
  const double spread = sampling.radius / std::sqrt(static_cast<double>(d));
  const bool second = mode == SmoothnessMode::IndividualHessian || mode == SmoothnessMode::ThirdMoment;
  constexpr double separations[] = {1e-3, 1e-1, 1.0};

  SmoothnessReport r;
  r.mode = mode;
  r.scheme = "mixed: global pairs around the center (radius " + std::to_string(sampling.radius) +
             ") and local pairs at separations 1e-3, 1e-1, 1";
  for (Index s = 0; s < num_pairs; ++s) {
    const Vector x = center + spread * gaussian_vector(d, rng);
    Vector y;
    if (s % 4 == 0) {
      y = center + spread * gaussian_vector(d, rng);
    } else {
      y = x + separations[s % 4 - 1] * gaussian_vector(d, rng).normalized();
    }
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Derivatives a = f.component(i, x, second ? 2 : 1);
      const Derivatives b = f.component(i, y, second ? 2 : 1);
      const double diff = second ? sym_operator_norm(a.hessian - b.hessian) : (a.gradient - b.gradient).norm();
      switch (mode) {
        case SmoothnessMode::IndividualGradient:
        case SmoothnessMode::IndividualHessian:
          acc = std::max(acc, diff);
          break;
        case SmoothnessMode::MeanSquared:
          acc += diff * diff;
          break;
        case SmoothnessMode::ThirdMoment:
          acc += diff * diff * diff;
          break;
      }
    }
    const double nn = static_cast<double>(n);
    if (mode == SmoothnessMode::MeanSquared) acc = std::sqrt(acc / nn);
    if (mode == SmoothnessMode::ThirdMoment) acc = std::cbrt(acc / nn);
    r.constant = std::max(r.constant, acc / dist);
    ++r.samples;
  }
  return r;
}

// ---------------------------------------------------------------------------

EstimatorBoundReport verify_estimator_bounds(const FiniteSumFunction& f, const Vector& x_hat, const Vector& x,
                                             Index grad_batch, Index hess_batch, double smoothness, Index trials,
                                             Rng& rng, double slack) {
  EstimatorBoundReport r;
  r.grad_batch = grad_batch;
  r.hess_batch = hess_batch;
  r.smoothness = smoothness;
  if (trials == 0) return r;
  if (trials < 1000) throw std::invalid_argument("verify_estimator_bounds: need at least 1000 trials");
  if (grad_batch < 1 || hess_batch < 1) throw std::invalid_argument("verify_estimator_bounds: empty batch");

  const Index n = f.num_components();
  const Index d = f.dimension();
  const PointCachedFunction cached(f, x);
  CountingOracle oracle(cached);
  const Snapshot snap = take_snapshot(oracle, x_hat);

  // Exact values summed in the same order as the snapshot, so x = x_hat gives exact zeros.
  Vector grad = Vector::Zero(d);
  Matrix hess = Matrix::Zero(d, d);
  for (Index i = 0; i < n; ++i) {
    const Derivatives di = cached.component(i, x, 2);
    grad += di.gradient;
    hess += di.hessian;
  }
  grad /= static_cast<double>(n);
  hess /= static_cast<double>(n);
  hess = SymMatrix(hess).matrix();

  double gsum = 0.0;
  double hsum = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const Batch ig = sample_batch(n, grad_batch, BatchMode::WithReplacement, rng);
    const Batch ih = sample_batch(n, hess_batch, BatchMode::WithReplacement, rng);
    const Vector v = svrc_gradient_estimator(oracle, snap, x, ig);
    const SymMatrix u = svrc_hessian_estimator(oracle, snap, x, ih);
    gsum += std::pow((grad - v).norm(), 1.5);
    const double herr = sym_operator_norm(hess - u.matrix());
    hsum += herr * herr * herr;
  }
  const double tt = static_cast<double>(trials);
  r.trials = static_cast<std::size_t>(trials);
  r.distance = (x - x_hat).norm();
  const double dist3 = r.distance * r.distance * r.distance;
  r.grad_mean = gsum / tt;
  r.hess_mean = hsum / tt;
  r.grad_bound = 2.0 * std::pow(smoothness, 1.5) / std::pow(static_cast<double>(grad_batch), 0.75) * dist3;
  r.hess_bound = 15000.0 * std::pow(smoothness, 3.0) *
                 std::pow(std::log(static_cast<double>(d)) / static_cast<double>(hess_batch), 1.5) * dist3;
  r.grad_ok = r.grad_mean <= r.grad_bound * (1.0 + slack);
  r.hess_ok = r.hess_mean <= r.hess_bound * (1.0 + slack);
  r.status = r.grad_ok && r.hess_ok ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

// ---------------------------------------------------------------------------

LargeGradientReport verify_large_gradient(const RandomizedHardInstance& instance, Index num_points, Rng& rng) {
  const RandomizedHardInstance f = instance.unscaled();
  const Index n = f.num_components();
  const Index k = f.spec().chain_length;
  const Index m = f.block_dim();
  const double radius = f.hat(0).clamp().radius;

  LargeGradientReport r;
  r.source = "constructed points";
  r.bound = 1.0 / (4.0 * std::sqrt(static_cast<double>(n)));
  r.min_norm = std::numeric_limits<double>::infinity();
  auto check = [&](const Vector& x) {
    const double norm = f.full(x, 1).gradient.norm();
    r.min_norm = std::min(r.min_norm, norm);
    ++r.points;
    return norm > r.bound;
  };

  bool ok = check(Vector::Zero(f.dimension()));
  std::vector<Index> order(static_cast<size_t>(n));
  for (Index p = 0; p < num_points; ++p) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const Index full_blocks = uniform_index(rng, 0, n / 2);
    Vector x = Vector::Zero(f.dimension());
    for (Index slot = 0; slot < n; ++slot) {
      const Index i = order[static_cast<size_t>(slot)];
      const Matrix& b = f.hat(i).basis().matrix();
      const Index discovered = slot < full_blocks ? k : uniform_index(rng, 0, k - 1);
      // Target z = rho(y) directly, then invert the clamp.
      Vector z = Vector::Zero(m);
      for (Index c = 0; c < k; ++c) {
        const double coef = c < discovered ? uniform(rng, -3.0, 3.0) : uniform(rng, -0.45, 0.45);
        z += coef * b.col(c);
      }
      Vector extra = gaussian_vector(m, rng);
      extra -= b * (b.transpose() * extra);
      if (extra.norm() > 0.0) z += uniform(rng, 0.0, 2.0) * extra.normalized();
      const double a = z.squaredNorm() / (radius * radius);
      const Vector y = z / std::sqrt(1.0 - a);
      x += f.from_block(i, y);
    }
    if (!check(x)) ok = false;
  }
  r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

LargeGradientReport verify_large_gradient(const ResistingOracle& oracle) {
  const ResistingCertificate cert = resisting_certificate(oracle);
  LargeGradientReport r;
  r.source = "resisting certificate";
  r.bound = cert.bound;
  r.points = cert.gradient_norms.size();
  r.min_norm = cert.min_norm;
  r.status = cert.all_exceed ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

SuboptimalityReport verify_suboptimality(const ChainMask& mask, Index starts, Rng& rng) {
  const Index k = mask.size();
  SuboptimalityReport r;
  r.chain_length = k;
  r.bound = 12.0 * static_cast<double>(k);
  if (starts == 0) return r;
  r.value_at_zero = chain_eval(mask, Vector::Zero(k), 0).value;
  r.best_found = std::numeric_limits<double>::infinity();
  r.lowest_sampled = std::numeric_limits<double>::infinity();

  for (Index s = 0; s < starts; ++s) {
    Vector x(k);
    for (Index j = 0; j < k; ++j) x(j) = uniform(rng, -3.0, 3.0);
    Derivatives cur = chain_eval(mask, x, 1);
    double t = 1.0;
    for (int it = 0; it < 3000; ++it) {
      const double g2 = cur.gradient.squaredNorm();
      if (g2 < 1e-20) break;
      t = std::min(4.0 * t, 100.0);
      Vector trial = x - t * cur.gradient;
      Derivatives next = chain_eval(mask, trial, 1);
      while (next.value > cur.value - 1e-4 * t * g2 && t > 1e-14) {
        t *= 0.5;
        trial = x - t * cur.gradient;
        next = chain_eval(mask, trial, 1);
      }
      if (t <= 1e-14) break;
      x = trial;
      cur = next;
    }
    r.best_found = std::min(r.best_found, cur.value);
    ++r.starts;
  }
  for (Index s = 0; s < 10 * starts; ++s) {
    Vector x(k);
    for (Index j = 0; j < k; ++j) x(j) = uniform(rng, -10.0, 10.0);
    r.lowest_sampled = std::min(r.lowest_sampled, chain_eval(mask, x, 0).value);
  }
  const bool ok = r.value_at_zero - r.best_found <= r.bound && r.best_found > -r.bound && r.lowest_sampled > -r.bound;
  r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

// ---------------------------------------------------------------------------

ResistingRunReport verify_resisting_run(int p, Index n, Index k, FullBaseline optimizer, Rng& rng) {
  if (p < 1 || p > 2) throw std::invalid_argument("verify_resisting_run: p must be 1 or 2");
  ResistingRunReport r;
  r.p = p;
  r.n = n;
  r.chain_length = k;
  r.optimizer = optimizer == FullBaseline::GradientDescent ? "full-gd" : "full-cubic";

  const double ell = chain_smoothness_constant(p);
  const auto budget = static_cast<std::uint64_t>(n * (k + 3));
  const HardInstanceSpec spec =
      deterministic_params(p, n, 192.0 * static_cast<double>(k + 1), ell, 1.0, static_cast<Index>(budget));
  if (spec.chain_length != k) throw std::logic_error("verify_resisting_run: calculator produced a different K");

  ResistingOracle oracle(spec, Rng(rng()), spec.epsilon);
  const Vector x0 = Vector::Zero(spec.d);
  // Curvature of one component is about scale / sigma^2 (gradient) and scale / sigma^3 (Hessian).
  const double s2 = spec.sigma * spec.sigma;
  RunMonitor monitor;
  monitor.mu_smoothness = spec.scale / (s2 * spec.sigma);
  if (optimizer == FullBaseline::GradientDescent) {
    baseline_full_gd(oracle, x0, s2 / (20.0 * spec.scale), budget, monitor);
  } else {
    baseline_full_cubic(oracle, x0, 20.0 * spec.scale / (s2 * spec.sigma), budget, monitor);
  }
  r.rounds_closed_by_queries = oracle.round() - 2;
  oracle.finalize();

  const ReplayReport replay = replay_archive(oracle);
  const ResistingCertificate cert = resisting_certificate(oracle);
  r.archived = replay.checked;
  r.max_final_overlap = replay.max_final_overlap;
  r.max_late_overlap = replay.max_late_overlap;
  r.max_replay_error = replay.max_relative_error;
  r.all_exceed = cert.all_exceed;
  r.min_norm = cert.min_norm;
  r.bound = cert.bound;
  const bool ok = r.max_final_overlap <= 1e-10 && r.max_late_overlap <= 1e-10 && r.max_replay_error <= 1e-10 &&
                  r.all_exceed;
  r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

// ---------------------------------------------------------------------------

double grid_search_cubic(const CubicModel& model, double step) {
  const Index d = model.dim();
  if (d < 1 || d > 3) throw std::invalid_argument("grid_search_cubic: only d <= 3");
  const double box = 2.0 * std::sqrt(2.0 * model.v.norm() / model.penalty) + 2.0;
  const auto count = static_cast<Index>(std::floor(2.0 * box / step)) + 1;
  const Matrix& u = model.u.matrix();
  const double m6 = model.penalty / 6.0;
  double best = std::numeric_limits<double>::infinity();
  // Pad to three coordinates; unused ones stay at zero.
  double vv[3] = {0, 0, 0};
  double uu[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  for (Index a = 0; a < d; ++a) {
    vv[a] = model.v(a);
    for (Index b = 0; b < d; ++b) uu[a][b] = u(a, b);
  }
  const Index c1 = d >= 2 ? count : 1;
  const Index c2 = d >= 3 ? count : 1;
  for (Index i0 = 0; i0 < count; ++i0) {
    const double h0 = -box + step * static_cast<double>(i0);
    for (Index i1 = 0; i1 < c1; ++i1) {
      const double h1 = d >= 2 ? -box + step * static_cast<double>(i1) : 0.0;
      const double base = vv[0] * h0 + vv[1] * h1 + 0.5 * (uu[0][0] * h0 * h0 + 2.0 * uu[0][1] * h0 * h1 + uu[1][1] * h1 * h1);
      const double r01 = h0 * h0 + h1 * h1;
      const double lin2 = vv[2] + uu[0][2] * h0 + uu[1][2] * h1;
      for (Index i2 = 0; i2 < c2; ++i2) {
        const double h2 = d >= 3 ? -box + step * static_cast<double>(i2) : 0.0;
        const double r = std::sqrt(r01 + h2 * h2);
        const double val = base + lin2 * h2 + 0.5 * uu[2][2] * h2 * h2 + m6 * r * r * r;
        best = std::min(best, val);
      }
    }
  }
  return best;
}

namespace {

struct RandomModel {
  CubicModel model;
  bool hard;
};

RandomModel random_cubic_model(Index d, int kind, Rng& rng) {
  const double penalty = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
  if (kind == 0) {
    const double scale = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
    Matrix g(d, d);
    for (Index c = 0; c < d; ++c) g.col(c) = gaussian_vector(d, rng);
    const Matrix u = scale * 0.5 * (g + g.transpose());
    const Vector v = std::exp(uniform(rng, std::log(0.01), std::log(10.0))) * gaussian_vector(d, rng);
    return {CubicModel(v, SymMatrix(u), penalty), false};
  }
  // Prescribed spectrum with a negative bottom eigenvalue, v orthogonal to its
  // eigenspace (kind 1) or with a 1e-9 component along it (kind 2).
  const Matrix q = sample_orthonormal_columns(d, d, rng).matrix();
  const double bottom = -uniform(rng, 0.5, 5.0);
  const Index multiplicity = d >= 3 ? uniform_index(rng, 1, 2) : 1;
  Vector lambda(d);
  for (Index j = 0; j < d; ++j) lambda(j) = j < multiplicity ? bottom : uniform(rng, bottom + 0.5, 5.0);
  Vector c = 0.1 * gaussian_vector(d, rng);
  c.head(multiplicity).setZero();
  const double s_lo = -2.0 * bottom / penalty;
  auto rest_norm = [&]() {
    double acc = 0.0;
    for (Index j = multiplicity; j < d; ++j) acc += std::pow(c(j) / (lambda(j) - bottom), 2);
    return std::sqrt(acc);
  };
  while (rest_norm() >= 0.9 * s_lo) c *= 0.5;
  if (kind == 2) c(0) = 1e-9;
  const Matrix u = q * lambda.asDiagonal() * q.transpose();
  return {CubicModel(q * c, SymMatrix(Matrix(0.5 * (u + u.transpose()))), penalty), true};
}

double violation(const CubicModel& model, const CubicSolution& s) {
  const double scale = 1.0 + model.v.norm();
  return std::max({s.first_order_residual, -s.curvature_slack, s.decrease_slack, 0.0}) / scale;
}

}  // namespace

CubicBatteryReport verify_cubic_solver(Index num_models, Index max_dim, Index grid_models, Rng& rng, double tol) {
  CubicBatteryReport r;
  if (num_models == 0 && grid_models == 0) return r;
  bool ok = true;
  for (Index m = 0; m < num_models; ++m) {
    const Index d = uniform_index(rng, 1, max_dim);
    const RandomModel rm = random_cubic_model(d, static_cast<int>(m % 3), rng);
    if (rm.hard) ++r.hard_cases;
    try {
      const CubicSolution s = solve_cubic(rm.model, tol);
      r.worst_violation = std::max(r.worst_violation, violation(rm.model, s));
    } catch (const NumericalFailure&) {
      ok = false;
      r.worst_violation = std::numeric_limits<double>::infinity();
    }
    ++r.models;
  }
  for (Index m = 0; m < grid_models; ++m) {
    const Index d = m % 3 + 1;
    RandomModel rm = random_cubic_model(d, static_cast<int>(m % 2), rng);
    // Keep the grid box small enough to enumerate.
    CubicModel small(rm.model.v.normalized() * std::min(rm.model.v.norm(), 1.0), rm.model.u,
                     std::max(rm.model.penalty, 1.0));
    if (rm.model.v.norm() == 0.0) small = CubicModel(rm.model.v, rm.model.u, std::max(rm.model.penalty, 1.0));
    try {
      const CubicSolution s = solve_cubic(small, tol);
      r.worst_violation = std::max(r.worst_violation, violation(small, s));
      r.worst_grid_excess = std::max(r.worst_grid_excess, s.value - grid_search_cubic(small));
    } catch (const NumericalFailure&) {
      ok = false;
      r.worst_violation = std::numeric_limits<double>::infinity();
    }
    ++r.grid_checked;
    ++r.models;
  }
  ok = ok && r.worst_violation <= tol && r.worst_grid_excess <= 1e-6;
  r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

ordered_json vec_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

double finite_or_zero(double x) { return std::isfinite(x) ? x : 0.0; }

}  // namespace

ordered_json to_json(const DerivativeReport& r) {
  ordered_json j;
  j["target"] = r.target;
  j["status"] = to_string(r.status);
  j["points"] = r.points;
  j["tolerance"] = r.tolerance;
  j["worst_gradient_error"] = r.worst_gradient_error;
  j["worst_hessian_error"] = r.worst_hessian_error;
  if (r.status == CheckStatus::Fail) {
    j["worst_component"] = r.worst_component;
    j["worst_point"] = vec_json(r.worst_point);
  }
  return j;
}

ordered_json to_json(const ZeroChainReport& r) {
  ordered_json j;
  j["chain_length"] = r.chain_length;
  j["status"] = to_string(r.status);
  j["samples"] = r.samples;
  j["skipped"] = r.skipped;
  j["max_tail_partial"] = r.max_tail_partial;
  j["max_value_change"] = r.max_value_change;
  return j;
}

ordered_json to_json(const SmoothnessReport& r) {
  ordered_json j;
  j["mode"] = to_string(r.mode);
  j["constant"] = r.constant;
  j["samples"] = r.samples;
  j["scheme"] = r.scheme;
  j["note"] = "largest sampled ratio; a lower estimate of the true constant";
  return j;
}

ordered_json to_json(const EstimatorBoundReport& r) {
  ordered_json j;
  j["status"] = to_string(r.status);
  j["trials"] = r.trials;
  j["grad_batch"] = r.grad_batch;
  j["hess_batch"] = r.hess_batch;
  j["smoothness"] = r.smoothness;
  j["distance"] = r.distance;
  j["grad_mean"] = r.grad_mean;
  j["grad_bound"] = r.grad_bound;
  j["hess_mean"] = r.hess_mean;
  j["hess_bound"] = r.hess_bound;
  return j;
}

ordered_json to_json(const LargeGradientReport& r) {
  ordered_json j;
  j["source"] = r.source;
  j["status"] = to_string(r.status);
  j["bound"] = r.bound;
  j["points"] = r.points;
  j["min_norm"] = finite_or_zero(r.min_norm);
  return j;
}

ordered_json to_json(const SuboptimalityReport& r) {
  ordered_json j;
  j["chain_length"] = r.chain_length;
  j["status"] = to_string(r.status);
  j["starts"] = r.starts;
  j["value_at_zero"] = r.value_at_zero;
  j["best_found"] = finite_or_zero(r.best_found);
  j["lowest_sampled"] = finite_or_zero(r.lowest_sampled);
  j["bound"] = r.bound;
  return j;
}

ordered_json to_json(const ResistingRunReport& r) {
  ordered_json j;
  j["p"] = r.p;
  j["n"] = r.n;
  j["chain_length"] = r.chain_length;
  j["optimizer"] = r.optimizer;
  j["status"] = to_string(r.status);
  j["archived"] = r.archived;
  j["rounds_closed_by_queries"] = r.rounds_closed_by_queries;
  j["max_final_overlap"] = r.max_final_overlap;
  j["max_late_overlap"] = r.max_late_overlap;
  j["max_replay_error"] = r.max_replay_error;
  j["all_exceed"] = r.all_exceed;
  j["min_norm"] = r.min_norm;
  j["bound"] = r.bound;
  return j;
}

ordered_json to_json(const CubicBatteryReport& r) {
  ordered_json j;
  j["status"] = to_string(r.status);
  j["models"] = r.models;
  j["hard_cases"] = r.hard_cases;
  j["worst_violation"] = finite_or_zero(r.worst_violation);
  j["grid_checked"] = r.grid_checked;
  j["worst_grid_excess"] = r.worst_grid_excess;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

struct Section {
  explicit Section(std::string section_name) : name(std::move(section_name)) {}

  std::string name;
  ordered_json checks = ordered_json::array();
  std::vector<CheckStatus> statuses;

  template <typename Report>
  void add(const Report& r) {
    checks.push_back(to_json(r));
    statuses.push_back(r.status);
  }
};

PointSampler box_sampler(Index d, double half_width) {
  return [d, half_width](Rng& rng) {
    Vector x(d);
    for (Index j = 0; j < d; ++j) x(j) = uniform(rng, -half_width, half_width);
    return x;
  };
}

PointSampler gaussian_sampler(Index d, double spread) {
  return [d, spread](Rng& rng) { return Vector(spread * gaussian_vector(d, rng)); };
}

HardInstanceSpec individual_spec(Index n, Index k, std::optional<Index> d = std::nullopt) {
  const double ell = default_hat_ell(1);
  return randomized_params(InstanceMode::RandomizedIndividual, 1, n, 192.0 * static_cast<double>(n * k), ell, 1.0, ell,
                           1.0, d);
}

}  // namespace

BatteryResult run_verification_battery(const VerifySettings& st, std::uint64_t seed, const VerifyHooks& hooks) {
  Rng master(seed);
  auto sub = [&master]() { return Rng(master()); };
  std::vector<Section> sections;

  {
    Section s("check_derivatives");
    Rng rng = sub();
    const auto prims = hooks.primitives.empty() ? default_scalar_primitives() : hooks.primitives;
    for (const ScalarPrimitive& prim : prims) s.add(check_scalar_derivatives(prim, st.derivative_points, st.derivative_tol, rng));
    for (Index k = 1; k <= 8; k *= 2) {
      std::vector<bool> bits(static_cast<size_t>(k));
      for (auto&& b : bits) b = uniform(rng, 0.0, 1.0) < 0.7;
      const ChainMask mask(bits);
      s.add(check_field_derivatives(
          "chain K=" + std::to_string(k), [&](const Vector& x) { return chain_eval(mask, x, 0).value; },
          [&](const Vector& x) { return chain_eval(mask, x, 1).gradient; },
          [&](const Vector& x) { return chain_eval(mask, x, 2).hessian; }, box_sampler(k, 2.5), st.derivative_points,
          st.derivative_tol, rng));
    }
    s.add(check_soft_clamp(5, SoftClampParams(3.0), st.derivative_points, st.derivative_tol, rng));
    for (const auto& [n, d] : {std::pair<Index, Index>{2, 12}, std::pair<Index, Index>{4, 64}}) {
      Rng draw = sub();
      const RandomizedHardInstance inst = sample_randomized_instance(individual_spec(n, 2, d), draw).unscaled();
      s.add(check_derivatives("hat_f n=" + std::to_string(n) + " d=" + std::to_string(d), inst, st.derivative_points,
                              st.derivative_tol, rng, gaussian_sampler(d, 1.5)));
    }
    sections.push_back(std::move(s));
  }

  {
    Section s("check_zero_chain");
    Rng rng = sub();
    for (Index k : {2, 4, 8}) s.add(check_zero_chain(k, st.zero_chain_samples, rng));
    sections.push_back(std::move(s));
  }

  {
    Section s("estimate_smoothness");
    Rng rng = sub();
    if (st.smoothness_pairs > 0) {
      Rng draw = sub();
      const CubicFiniteSum syn = make_cubic_finite_sum(16, 5, draw);
      const SmoothnessReport ind = estimate_smoothness(syn, SmoothnessMode::IndividualHessian, st.smoothness_pairs, rng);
      Rng again = rng;
      const SmoothnessReport third = estimate_smoothness(syn, SmoothnessMode::ThirdMoment, st.smoothness_pairs, again);
      s.checks.push_back(to_json(ind));
      s.checks.push_back(to_json(third));
      ordered_json bound;
      bound["check"] = "synthetic: third-moment <= individual <= max c_i";
      const bool ok = third.constant <= ind.constant * (1.0 + 1e-12) && ind.constant <= syn.max_cubic_weight() * (1.0 + 1e-6);
      bound["status"] = ok ? "pass" : "fail";
      bound["max_cubic_weight"] = syn.max_cubic_weight();
      s.checks.push_back(bound);
      s.statuses.push_back(ok ? CheckStatus::Pass : CheckStatus::Fail);

      // Scaled third-moment instance: the cube-root-of-mean-cubes ratio stays
      // below L_2 while single components may reach n^{1/3} lambda hat-l_2.
      const double ell2 = default_hat_ell(2);
      const Index n = 4;
      const double gap = 96.0 * std::pow(4.0, 7.0 / 12.0) * 2.0;
      const HardInstanceSpec spec = randomized_params(InstanceMode::RandomizedThirdMoment, 2, n, gap, ell2, 1.0, ell2);
      Rng draw2 = sub();
      const RandomizedHardInstance inst = sample_randomized_instance(spec, draw2);
      SmoothnessSampling sampling;
      sampling.radius = 2.0 * spec.sigma * std::sqrt(static_cast<double>(spec.chain_length));
      Rng a = sub();
      Rng b = a;
      const SmoothnessReport hard_third = estimate_smoothness(inst, SmoothnessMode::ThirdMoment, st.smoothness_pairs, a, sampling);
      const SmoothnessReport hard_ind =
          estimate_smoothness(inst, SmoothnessMode::IndividualHessian, st.smoothness_pairs, b, sampling);
      s.checks.push_back(to_json(hard_third));
      s.checks.push_back(to_json(hard_ind));
      ordered_json hb;
      hb["check"] = "third-moment instance: third-moment <= 1.05 L_2, individual <= 1.05 n^{1/3} lambda hat-l_2";
      const double l2 = spec.smoothness;
      const double ind_cap = std::cbrt(static_cast<double>(n)) * spec.lambda * spec.ell;
      const bool hok = hard_third.constant <= 1.05 * l2 && hard_ind.constant <= 1.05 * ind_cap &&
                       hard_third.constant <= hard_ind.constant * (1.0 + 1e-12);
      hb["status"] = hok ? "pass" : "fail";
      hb["third_moment_cap"] = 1.05 * l2;
      hb["individual_cap"] = 1.05 * ind_cap;
      s.checks.push_back(hb);
      s.statuses.push_back(hok ? CheckStatus::Pass : CheckStatus::Fail);
    }
    sections.push_back(std::move(s));
  }

  {
    Section s("verify_estimator_bounds");
    Rng rng = sub();
    if (st.estimator_trials > 0) {
      Rng draw = sub();
      const Index n = 64;
      const Index d = 8;
      const CubicFiniteSum syn = make_cubic_finite_sum(n, d, draw);
      Rng pairs = sub();
      const double l2 = estimate_smoothness(syn, SmoothnessMode::ThirdMoment, std::max<Index>(st.smoothness_pairs, 400), pairs)
                            .constant;
      const Vector x_hat = gaussian_vector(d, rng);
      const Vector x = x_hat + 0.5 * gaussian_vector(d, rng).normalized();
      const double log_d = std::log(static_cast<double>(d));
      const Index hess_batch = ceil_count(12000.0 * log_d * log_d * log_d);
      s.add(verify_estimator_bounds(syn, x_hat, x, 16, hess_batch, l2, st.estimator_trials, rng));
    }
    sections.push_back(std::move(s));
  }

  {
    Section s("verify_large_gradient");
    Rng rng = sub();
    if (st.large_gradient_points > 0) {
      for (Index n : {1, 4, 16}) {
        for (Index k : {1, 4}) {
          Rng draw = sub();
          const RandomizedHardInstance inst = sample_randomized_instance(individual_spec(n, k), draw);
          LargeGradientReport rep = verify_large_gradient(inst, st.large_gradient_points, rng);
          rep.source += " n=" + std::to_string(n) + " K=" + std::to_string(k);
          s.add(rep);
        }
      }
    }
    sections.push_back(std::move(s));
  }

  {
    Section s("verify_suboptimality");
    Rng rng = sub();
    if (st.multistart_starts > 0) {
      for (Index k : {1, 2, 4, 8}) {
        s.add(verify_suboptimality(ChainMask::all_ones(k), st.multistart_starts, rng));
        std::vector<bool> bits(static_cast<size_t>(k));
        for (auto&& b : bits) b = uniform(rng, 0.0, 1.0) < 0.5;
        s.add(verify_suboptimality(ChainMask(bits), st.multistart_starts, rng));
      }
    }
    sections.push_back(std::move(s));
  }

  {
    Section s("resisting_construction");
    Rng rng = sub();
    if (st.resisting_max_k > 0) {
      for (int p : {1, 2}) {
        for (Index n : {4, 10}) {
          for (FullBaseline opt : {FullBaseline::GradientDescent, FullBaseline::CubicRegularization}) {
            s.add(verify_resisting_run(p, n, st.resisting_max_k, opt, rng));
          }
        }
      }
    }
    sections.push_back(std::move(s));
  }

  {
    Section s("cubic_solver");
    Rng rng = sub();
    s.add(verify_cubic_solver(st.cubic_models, 20, st.cubic_grid_models, rng));
    sections.push_back(std::move(s));
  }

  BatteryResult out;
  out.report["seed"] = seed;
  ordered_json body;
  for (Section& s : sections) {
    const CheckStatus status = combine(s.statuses);
    if (status == CheckStatus::Fail) {
      out.passed = false;
      out.failed_sections.push_back(s.name);
    }
    ordered_json j;
    j["status"] = to_string(status);
    j["checks"] = std::move(s.checks);
    body[s.name] = std::move(j);
  }
  out.report["passed"] = out.passed;
  out.report["sections"] = std::move(body);
  return out;
}

}  // namespace hardsum
