#include "hardsum/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hardsum {

std::string to_string(BatchMode mode) {
  return mode == BatchMode::FullPass ? "full-pass" : "with-replacement";
}

BatchMode batch_mode_from_string(const std::string& name) {
  if (name == "with-replacement") return BatchMode::WithReplacement;
  if (name == "full-pass") return BatchMode::FullPass;
  throw std::invalid_argument("unknown batch mode '" + name + "' (expected with-replacement or full-pass)");
}

Index ceil_count(double x) {
  if (std::isnan(x)) throw std::invalid_argument("ceil_count: NaN");
  if (x <= 0.0) return 0;
  constexpr double cap = 1e15;
  if (x >= cap) return static_cast<Index>(cap);
  return static_cast<Index>(std::ceil(x * (1.0 - 1e-12)));
}

SvrcParams svrc_default_params(Index n, Index d, double gap, double smoothness, double epsilon) {
  if (n < 1 || d < 1) throw std::invalid_argument("svrc_default_params: need n, d >= 1");
  if (!(gap > 0.0) || !(smoothness > 0.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("svrc_default_params: gap, smoothness and epsilon must be positive");
  }
  const double nn = static_cast<double>(n);
  const double cm = kSvrcPenaltyFactor;
  const double log_d = std::log(static_cast<double>(d));
  SvrcParams p;
  p.penalty = cm * smoothness;
  p.steps = ceil_count(std::max(2.0, std::pow(nn, 0.2)));
  p.epochs = ceil_count(
      std::max(1.0, 240.0 * cm * cm * std::sqrt(smoothness) * gap * std::pow(nn, -0.2) * std::pow(epsilon, -1.5)));
  p.grad_batch = ceil_count(5.0 * std::max(std::pow(nn, 0.8), 16.0));
  p.hess_batch = std::max<Index>(1, ceil_count(3000.0 * std::max(4.0, std::pow(nn, 0.4)) * log_d * log_d * log_d));
  p.epsilon = epsilon;
  p.gap = gap;
  p.smoothness = smoothness;
  return p;
}

Batch sample_batch(Index n, Index size, BatchMode mode, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_batch: need n >= 1");
  Batch batch;
  if (mode == BatchMode::FullPass) {
    batch.reserve(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) batch.emplace_back(i, 1);
    return batch;
  }
  if (size < 1) throw std::invalid_argument("sample_batch: empty batch");
  std::vector<std::uint64_t> counts(static_cast<size_t>(n), 0);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  for (Index k = 0; k < size; ++k) ++counts[static_cast<size_t>(pick(rng))];
  for (Index i = 0; i < n; ++i) {
    if (counts[static_cast<size_t>(i)] > 0) batch.emplace_back(i, counts[static_cast<size_t>(i)]);
  }
  return batch;
}

std::uint64_t batch_size(const Batch& batch) {
  std::uint64_t b = 0;
  for (const auto& entry : batch) b += entry.second;
  return b;
}

Snapshot take_snapshot(Oracle& oracle, const Vector& x_hat) {
  const Index n = oracle.num_components();
  const Index d = x_hat.size();
  Snapshot snap;
  snap.point = x_hat;
  snap.gradient = Vector::Zero(d);
  Matrix h = Matrix::Zero(d, d);
  snap.component_gradients.reserve(static_cast<size_t>(n));
  snap.component_hessians.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Derivatives di = oracle.query(i, x_hat, 2);
    snap.gradient += di.gradient;
    h += di.hessian;
    snap.component_gradients.push_back(std::move(di.gradient));
    snap.component_hessians.push_back(std::move(di.hessian));
  }
  snap.gradient /= static_cast<double>(n);
  h /= static_cast<double>(n);
  snap.hessian = SymMatrix(std::move(h));
  return snap;
}

Vector svrc_gradient_estimator(Oracle& oracle, const Snapshot& snap, const Vector& x, const Batch& batch) {
  const std::uint64_t b = batch_size(batch);
  if (b == 0) throw std::invalid_argument("svrc_gradient_estimator: empty batch");
  const Vector dx = x - snap.point;
  Vector acc = Vector::Zero(x.size());
  for (const auto& [i, times] : batch) {
    const Derivatives at_x = oracle.query(i, x, 1, times);
    const auto k = static_cast<size_t>(i);
    acc += static_cast<double>(times) *
           (at_x.gradient - snap.component_gradients[k] - snap.component_hessians[k] * dx);
    oracle.ledger().cached_lookups += times;
  }
  return acc / static_cast<double>(b) + snap.gradient + snap.hessian.matrix() * dx;
}

SymMatrix svrc_hessian_estimator(Oracle& oracle, const Snapshot& snap, const Vector& x, const Batch& batch) {
  const std::uint64_t b = batch_size(batch);
  if (b == 0) throw std::invalid_argument("svrc_hessian_estimator: empty batch");
  Matrix acc = Matrix::Zero(x.size(), x.size());
  for (const auto& [i, times] : batch) {
    const Derivatives at_x = oracle.query(i, x, 2, times);
    acc += static_cast<double>(times) * (at_x.hessian - snap.component_hessians[static_cast<size_t>(i)]);
    oracle.ledger().cached_lookups += times;
  }
  Matrix u = acc / static_cast<double>(b) + snap.hessian.matrix();
  return SymMatrix(Matrix(0.5 * (u + u.transpose())));
}

double mu(const Vector& gradient, const SymMatrix& hessian, double smoothness) {
  if (!(smoothness > 0.0)) throw std::invalid_argument("mu: smoothness must be positive");
  const double g = std::pow(gradient.norm(), 1.5);
  const double lmin = lambda_min(hessian);
  return std::max(g, -lmin * lmin * lmin / std::pow(smoothness, 1.5));
}

double mu(const FiniteSumFunction& f, const Vector& x, double smoothness) {
  const Derivatives full = f.full(x, 2);
  return mu(full.gradient, SymMatrix(full.hessian), smoothness);
}

namespace {

class Recorder {
 public:
  Recorder(Oracle& oracle, double mu_smoothness, RunResult& out)
      : oracle_(oracle), mu_smoothness_(mu_smoothness), out_(out), seen_(oracle.ledger().per_index) {}

  void record(const Vector& x, Index epoch, Index step, double h_norm) {
    const Derivatives full = oracle_.measure(x, 2);
    TrajectoryRecord r;
    r.iter = out_.trajectory.size();
    r.epoch = epoch;
    r.step = step;
    r.f = full.value;
    r.grad_norm = full.gradient.norm();
    r.mu = mu(full.gradient, SymMatrix(Matrix(0.5 * (full.hessian + full.hessian.transpose()))), mu_smoothness_);
    r.h_norm = h_norm;
    const OracleLedger& ledger = oracle_.ledger();
    r.q_val = ledger.value_queries;
    r.q_grad = ledger.gradient_queries;
    r.q_hess = ledger.hessian_queries;
    r.q_total = ledger.total_queries;
    r.q_cached = ledger.cached_lookups;
    for (size_t i = 0; i < seen_.size(); ++i) {
      if (ledger.per_index[i] != seen_[i]) ++r.i_queried;
    }
    seen_ = ledger.per_index;
    if (!out_.trajectory.empty() && r.f > out_.trajectory.back().f) ++out_.increases;
    oracle_.ledger().record_iterate(r.grad_norm, r.iter);
    out_.trajectory.push_back(r);
    out_.iterates.push_back(x);
  }

 private:
  Oracle& oracle_;
  double mu_smoothness_;
  RunResult& out_;
  std::vector<std::uint64_t> seen_;
};

bool over_budget(const Oracle& oracle, std::optional<std::uint64_t> budget, std::uint64_t cost) {
  return budget && oracle.ledger().total_queries + cost > *budget;
}

}  // namespace

RunResult svrc_run(Oracle& oracle, const Vector& x0, const SvrcParams& params, std::optional<std::uint64_t> budget) {
  if (!(params.penalty > 0.0)) throw std::invalid_argument("svrc_run: penalty M must be positive");
  if (params.grad_batch < 1 || params.hess_batch < 1 || params.epochs < 1 || params.steps < 1) {
    throw std::invalid_argument("svrc_run: batch sizes, S and T must be >= 1");
  }
  if (x0.size() != oracle.dimension()) throw std::invalid_argument("svrc_run: x0 has the wrong dimension");
  const Index n = oracle.num_components();
  Rng rng(params.seed);
  RunResult out;
  Recorder rec(oracle, params.smoothness > 0.0 ? params.smoothness : params.penalty / kSvrcPenaltyFactor, out);
  Vector x = x0;
  rec.record(x, 0, 0, 0.0);

  const bool full = params.batch_mode == BatchMode::FullPass;
  const auto step_cost = static_cast<std::uint64_t>(full ? 2 * n : params.grad_batch + params.hess_batch);
  bool stop = false;
  for (Index s = 0; s < params.epochs && !stop; ++s) {
    if (over_budget(oracle, budget, static_cast<std::uint64_t>(n) + step_cost)) break;
    const Snapshot snap = take_snapshot(oracle, x);
    for (Index t = 0; t < params.steps; ++t) {
      if (over_budget(oracle, budget, step_cost)) {
        stop = true;
        break;
      }
      const Batch ig = sample_batch(n, params.grad_batch, params.batch_mode, rng);
      const Batch ih = sample_batch(n, params.hess_batch, params.batch_mode, rng);
      Vector v = svrc_gradient_estimator(oracle, snap, x, ig);
      SymMatrix u = svrc_hessian_estimator(oracle, snap, x, ih);
      CubicSolution sol;
      try {
        sol = solve_cubic(CubicModel(std::move(v), std::move(u), params.penalty), params.cubic_tolerance);
      } catch (const NumericalFailure& e) {
        out.aborted = true;
        out.abort_reason = e.what();
        stop = true;
        break;
      }
      x += sol.h;
      rec.record(x, s + 1, t + 1, sol.step_norm);
    }
  }

  const size_t stepped = out.trajectory.size() - 1;
  if (stepped == 0) {
    out.x_out = x0;
    out.out_iter = 0;
  } else {
    std::uniform_int_distribution<size_t> pick(1, stepped);
    out.out_iter = pick(rng);
    out.x_out = out.iterates[out.out_iter];
  }
  out.ledger = oracle.ledger();
  return out;
}

namespace {

Derivatives full_query(Oracle& oracle, const Vector& x, int order) {
  const Index n = oracle.num_components();
  Derivatives sum = Derivatives::zero(x.size(), order);
  for (Index i = 0; i < n; ++i) sum += oracle.query(i, x, order);
  sum *= 1.0 / static_cast<double>(n);
  return sum;
}

}  // namespace

RunResult baseline_full_gd(Oracle& oracle, const Vector& x0, double step, std::uint64_t budget,
                           const RunMonitor& monitor) {
  if (budget == 0) throw std::invalid_argument("baseline_full_gd: budget must be positive");
  if (!(step > 0.0)) throw std::invalid_argument("baseline_full_gd: step must be positive");
  if (x0.size() != oracle.dimension()) throw std::invalid_argument("baseline_full_gd: x0 has the wrong dimension");
  const auto n = static_cast<std::uint64_t>(oracle.num_components());
  RunResult out;
  Recorder rec(oracle, monitor.mu_smoothness, out);
  Vector x = x0;
  rec.record(x, 0, 0, 0.0);
  Index k = 0;
  while (!over_budget(oracle, budget, n)) {
    const Derivatives g = full_query(oracle, x, 1);
    const Vector h = -step * g.gradient;
    x += h;
    rec.record(x, 0, ++k, h.norm());
  }
  out.x_out = x;
  out.out_iter = out.trajectory.size() - 1;
  out.ledger = oracle.ledger();
  return out;
}

RunResult baseline_full_cubic(Oracle& oracle, const Vector& x0, double penalty, std::uint64_t budget,
                              const RunMonitor& monitor, double tol) {
  if (budget == 0) throw std::invalid_argument("baseline_full_cubic: budget must be positive");
  if (x0.size() != oracle.dimension()) throw std::invalid_argument("baseline_full_cubic: x0 has the wrong dimension");
  const auto n = static_cast<std::uint64_t>(oracle.num_components());
  RunResult out;
  Recorder rec(oracle, monitor.mu_smoothness, out);
  Vector x = x0;
  rec.record(x, 0, 0, 0.0);
  Index k = 0;
  while (!over_budget(oracle, budget, n)) {
    Derivatives full = full_query(oracle, x, 2);
    CubicSolution sol;
    try {
      sol = solve_cubic(CubicModel(std::move(full.gradient), SymMatrix(Matrix(0.5 * (full.hessian + full.hessian.transpose()))),
                                   penalty),
                        tol);
    } catch (const NumericalFailure& e) {
      out.aborted = true;
      out.abort_reason = e.what();
      break;
    }
    x += sol.h;
    rec.record(x, 0, ++k, sol.step_norm);
  }
  out.x_out = x;
  out.out_iter = out.trajectory.size() - 1;
  out.ledger = oracle.ledger();
  return out;
}

}  // namespace hardsum
