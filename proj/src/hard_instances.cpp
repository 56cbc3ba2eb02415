#include "hardsum/hard_instances.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace hardsum {

namespace {

// floor() that forgives a few ulps of pow() rounding below an exact integer.
Index floor_count(double x) { return static_cast<Index>(std::floor(x * (1.0 + 1e-12))); }

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

double required_dimension(double c0, Index n, Index k) {
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  // failure probability 1/2
  return c0 * nn * nn * nn * kk * kk * std::log(2.0 * nn * nn * kk * kk);
}

constexpr std::uint32_t kBasisMagic = 0x31425348;  // "HSB1" read as little-endian bytes

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("basis file: truncated header");
    v |= static_cast<std::uint32_t>(c & 0xFF) << (8 * b);
  }
  return v;
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(v));
  for (int b = 0; b < 8; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_f64(std::istream& in) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("basis file: truncated payload");
    bits |= static_cast<std::uint64_t>(c & 0xFF) << (8 * b);
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

std::string to_string(InstanceMode mode) {
  switch (mode) {
    case InstanceMode::Deterministic:
      return "deterministic";
    case InstanceMode::RandomizedIndividual:
      return "individual";
    case InstanceMode::RandomizedThirdMoment:
      return "third-moment";
  }
  return "unknown";
}

InstanceMode instance_mode_from_string(const std::string& name) {
  if (name == "deterministic") return InstanceMode::Deterministic;
  if (name == "individual") return InstanceMode::RandomizedIndividual;
  if (name == "third-moment") return InstanceMode::RandomizedThirdMoment;
  throw std::invalid_argument("unknown instance mode '" + name + "'");
}

double chain_smoothness_constant(int p) {
  if (p < 1) throw std::invalid_argument("chain_smoothness_constant: p must be >= 1");
  const double pp = static_cast<double>(p);
  return std::pow(2.0, pp + 1.0) * std::exp(2.5 * pp + std::log(pp) + 4.0 * pp + 10.0);
}

double default_hat_ell(int p) {
  if (p == 1) return kDefaultHatEll1;
  if (p == 2) return kDefaultHatEll2;
  throw std::invalid_argument("no default hat-l_p for p = " + std::to_string(p) + "; configure it");
}

HardInstanceSpec deterministic_params(int p, Index n, double gap, double smoothness, double epsilon,
                                      Index query_budget) {
  if (p < 1) throw std::invalid_argument("deterministic_params: p must be >= 1");
  if (n < 1) throw std::invalid_argument("deterministic_params: n must be >= 1");
  require_positive(gap, "Delta");
  require_positive(smoothness, "L_p");
  require_positive(epsilon, "epsilon");
  if (query_budget < 0) throw std::invalid_argument("deterministic_params: negative query budget");

  HardInstanceSpec s;
  s.mode = InstanceMode::Deterministic;
  s.p = p;
  s.n = n;
  s.gap = gap;
  s.smoothness = smoothness;
  s.epsilon = epsilon;
  s.ell = chain_smoothness_constant(p);

  const double pp = static_cast<double>(p);
  s.lambda = smoothness / s.ell;
  s.sigma = std::pow(4.0 * epsilon * s.ell / smoothness, 1.0 / pp);
  const double per_gap = std::pow(smoothness / s.ell, 1.0 / pp) / (192.0 * std::pow(epsilon, (pp + 1.0) / pp));
  const Index links = floor_count(gap * per_gap);  // K + 1
  if (links - 1 < 1) {
    const double minimal = 2.0 / per_gap;
    throw InstanceTooSmall("deterministic instance needs K >= 1 but K+1 = " + std::to_string(links) +
                               "; increase Delta to at least " + std::to_string(minimal),
                           minimal);
  }
  s.chain_length = links - 1;
  s.d = links + query_budget;
  s.scale = s.lambda * std::pow(s.sigma, pp + 1.0);
  s.gradient_floor = s.lambda * std::pow(s.sigma, pp) / 4.0;
  return s;
}

HardInstanceSpec randomized_params(InstanceMode mode, int p, Index n, double gap, double smoothness,
                                   double epsilon, double hat_ell, double c0, std::optional<Index> d) {
  if (mode == InstanceMode::Deterministic) {
    throw std::invalid_argument("randomized_params: deterministic mode has its own calculator");
  }
  if (mode == InstanceMode::RandomizedThirdMoment && p != 2) {
    throw std::invalid_argument("third-moment instances are second order (p = 2)");
  }
  if (p < 1) throw std::invalid_argument("randomized_params: p must be >= 1");
  if (n < 1) throw std::invalid_argument("randomized_params: n must be >= 1");
  require_positive(gap, "Delta");
  require_positive(smoothness, "L");
  require_positive(epsilon, "epsilon");
  require_positive(hat_ell, "hat-l_p");
  require_positive(c0, "c0");

  HardInstanceSpec s;
  s.mode = mode;
  s.p = p;
  s.n = n;
  s.gap = gap;
  s.smoothness = smoothness;
  s.epsilon = epsilon;
  s.ell = hat_ell;
  s.c0 = c0;
  s.lambda = smoothness / hat_ell;

  const double nn = static_cast<double>(n);
  const double pp = static_cast<double>(p);
  double per_gap = 0.0;
  if (mode == InstanceMode::RandomizedIndividual) {
    s.sigma = std::pow(4.0 * std::sqrt(nn) * epsilon * hat_ell / smoothness, 1.0 / pp);
    per_gap = std::pow(smoothness / hat_ell, 1.0 / pp) /
              (192.0 * std::pow(nn, (pp + 1.0) / (2.0 * pp)) * std::pow(epsilon, (pp + 1.0) / pp));
    s.scale = s.lambda * std::pow(s.sigma, pp + 1.0);
    s.gradient_floor = s.lambda * std::pow(s.sigma, pp) / (4.0 * std::sqrt(nn));
  } else {
    s.sigma = std::sqrt(4.0 * epsilon * hat_ell * std::pow(nn, 1.0 / 6.0) / smoothness);
    per_gap = std::sqrt(smoothness / hat_ell) / (96.0 * std::pow(nn, 7.0 / 12.0) * std::pow(epsilon, 1.5));
    s.scale = std::cbrt(nn) * s.lambda * s.sigma * s.sigma * s.sigma;
    s.gradient_floor = std::cbrt(nn) * s.lambda * s.sigma * s.sigma / (4.0 * std::sqrt(nn));
  }
  const Index k = floor_count(gap * per_gap);
  if (k < 1) {
    const double minimal = 1.0 / per_gap;
    throw InstanceTooSmall("randomized instance needs K >= 1 but K = " + std::to_string(k) +
                               "; increase Delta to at least " + std::to_string(minimal),
                           minimal);
  }
  s.chain_length = k;

  const Index minimal_d = n * n * k;
  if (d) {
    if (*d % n != 0) throw std::invalid_argument("randomized instance: d must be divisible by n");
    if (*d / n < n * k) {
      throw std::invalid_argument("randomized instance: need d / n >= n K = " + std::to_string(n * k));
    }
    s.d = *d;
  } else {
    s.d = minimal_d;
  }
  s.required_dimension = required_dimension(c0, n, k);
  if (static_cast<double>(s.d) < s.required_dimension) {
    std::ostringstream msg;
    msg << "d = " << s.d << " is below the high-probability requirement " << s.required_dimension
        << " (c0 = " << c0 << "); small inner products with undiscovered columns are not guaranteed";
    s.warnings.push_back(msg.str());
  }
  return s;
}

// ---------------------------------------------------------------------------

DeterministicHardInstance::DeterministicHardInstance(Matrix directions, std::vector<ChainMask> masks,
                                                     double scale, double sigma)
    : directions_(std::move(directions)), masks_(std::move(masks)), scale_(scale), sigma_(sigma) {
  if (masks_.empty()) throw std::invalid_argument("DeterministicHardInstance: no components");
  for (const ChainMask& m : masks_) {
    if (m.size() != directions_.cols()) {
      throw std::invalid_argument("DeterministicHardInstance: mask length differs from direction count");
    }
  }
}

Derivatives DeterministicHardInstance::component(Index i, const Vector& x, int order) const {
  check_component_args(i, x, order);
  const Vector z = directions_.transpose() * x / sigma_;
  const Derivatives c = chain_eval(masks_[static_cast<size_t>(i)], z, order);
  Derivatives out;
  out.order = order;
  out.value = scale_ * c.value;
  if (order >= 1) out.gradient = (scale_ / sigma_) * (directions_ * c.gradient);
  if (order >= 2) out.hessian = (scale_ / (sigma_ * sigma_)) * (directions_ * c.hessian * directions_.transpose());
  return out;
}

Derivatives DeterministicHardInstance::full(const Vector& x, int order) const {
  check_component_args(0, x, order);
  // Average in chain coordinates, then lift once.
  const Vector z = directions_.transpose() * x / sigma_;
  const Index k = directions_.cols();
  Derivatives acc = Derivatives::zero(k, order);
  for (const ChainMask& m : masks_) acc += chain_eval(m, z, order);
  const double w = 1.0 / static_cast<double>(masks_.size());
  Derivatives out;
  out.order = order;
  out.value = w * scale_ * acc.value;
  if (order >= 1) out.gradient = (w * scale_ / sigma_) * (directions_ * acc.gradient);
  if (order >= 2) {
    out.hessian = (w * scale_ / (sigma_ * sigma_)) * (directions_ * acc.hessian * directions_.transpose());
  }
  return out;
}

// ---------------------------------------------------------------------------

ResistingOracle::ResistingOracle(const HardInstanceSpec& spec, Rng rng, double epsilon)
    : Oracle(spec.n, spec.d, epsilon), spec_(spec), rng_(std::move(rng)) {
  if (spec.mode != InstanceMode::Deterministic) {
    throw std::invalid_argument("ResistingOracle: spec is not deterministic");
  }
  if (spec.chain_length < 1) throw std::invalid_argument("ResistingOracle: K must be >= 1");
  const Index links = spec.chain_length + 1;
  if (spec.d < links) throw std::invalid_argument("ResistingOracle: d must be at least K + 1");
  required_distinct_ = (spec.n + 1) / 2;
  queried_in_round_.assign(static_cast<size_t>(spec.n), false);
  directions_ = Matrix::Zero(spec.d, links);
  deltas_.assign(static_cast<size_t>(spec.n), std::vector<bool>(static_cast<size_t>(links), false));
  for (Index i = 0; i < spec.n; ++i) deltas_[static_cast<size_t>(i)][0] = i < required_distinct_;
  span_ = Matrix(spec.d, 0);
  directions_.col(0) = draw_direction();
  absorb(directions_.col(0));
}

bool ResistingOracle::delta(Index i, Index k) const {
  if (k < 1 || k > spec_.chain_length + 1) throw std::out_of_range("delta: link index out of range");
  if (k >= round_) throw std::logic_error("delta: link not fixed yet");
  return deltas_.at(static_cast<size_t>(i))[static_cast<size_t>(k - 1)];
}

Vector ResistingOracle::draw_direction() {
  if (span_.cols() >= spec_.d) {
    throw NumericalFailure("resisting oracle: orthogonal complement exhausted; raise the query budget (d = " +
                           std::to_string(spec_.d) + ")");
  }
  for (int attempt = 0; attempt < 8; ++attempt) {
    Vector g = gaussian_vector(spec_.d, rng_);
    const double g_norm = g.norm();
    for (int pass = 0; pass < 2; ++pass) g -= span_ * (span_.transpose() * g);
    const double r = g.norm();
    if (r > 1e-8 * g_norm) return g / r;
  }
  throw NumericalFailure("resisting oracle: could not draw a direction orthogonal to the archive");
}

void ResistingOracle::absorb(const Vector& x) {
  const double x_norm = x.norm();
  if (x_norm == 0.0) return;
  Vector r = x;
  for (int pass = 0; pass < 2; ++pass) r -= span_ * (span_.transpose() * r);
  const double rn = r.norm();
  if (rn <= 1e-13 * x_norm) return;
  span_.conservativeResize(Eigen::NoChange, span_.cols() + 1);
  span_.col(span_.cols() - 1) = r / rn;
}

DeterministicHardInstance ResistingOracle::provisional() const {
  // Links 1..round-1 use directions v_1..v_{round-1}.
  const Index active = std::min(round_ - 1, spec_.chain_length + 1);
  std::vector<ChainMask> masks;
  masks.reserve(static_cast<size_t>(spec_.n));
  for (Index i = 0; i < spec_.n; ++i) {
    const auto& row = deltas_[static_cast<size_t>(i)];
    masks.emplace_back(std::vector<bool>(row.begin(), row.begin() + active));
  }
  return DeterministicHardInstance(directions_.leftCols(active), std::move(masks), spec_.scale, spec_.sigma);
}

DeterministicHardInstance ResistingOracle::final_function() const {
  if (!finalized()) throw std::logic_error("resisting oracle: instance is not finalized yet");
  return provisional();
}

Derivatives ResistingOracle::respond(Index i, const Vector& x, int order) {
  if (x.size() != spec_.d) {
    throw std::invalid_argument("resisting oracle: point has dimension " + std::to_string(x.size()) +
                                ", instance dimension is " + std::to_string(spec_.d));
  }
  if (finalized()) return provisional().component(i, x, order);

  Derivatives out = provisional().component(i, x, order);
  absorb(x);
  archive_.push_back({i, x, order, out, round_});
  if (!queried_in_round_[static_cast<size_t>(i)]) {
    queried_in_round_[static_cast<size_t>(i)] = true;
    ++distinct_in_round_;
  }
  // The closing query itself is charged right after this returns.
  if (distinct_in_round_ >= required_distinct_) close_round(ledger().total_queries + 1);
  return out;
}

void ResistingOracle::close_round(std::uint64_t queries_so_far) {
  round_close_queries_.push_back(queries_so_far);
  const Index k = round_;  // 1-based link index being fixed
  for (Index i = 0; i < spec_.n; ++i) {
    deltas_[static_cast<size_t>(i)][static_cast<size_t>(k - 1)] = !queried_in_round_[static_cast<size_t>(i)];
  }
  directions_.col(k - 1) = draw_direction();
  absorb(directions_.col(k - 1));
  std::fill(queried_in_round_.begin(), queried_in_round_.end(), false);
  distinct_in_round_ = 0;
  ++round_;
}

void ResistingOracle::finalize() {
  while (!finalized()) close_round(ledger().total_queries);
}

Derivatives ResistingOracle::measure(const Vector& x, int order) const { return provisional().full(x, order); }

ResistingCertificate resisting_certificate(const ResistingOracle& oracle) {
  if (!oracle.finalized()) throw std::logic_error("resisting_certificate: adversary not finalized");
  const DeterministicHardInstance f = oracle.final_function();
  const HardInstanceSpec& s = oracle.spec();
  ResistingCertificate cert;
  cert.bound = s.lambda * std::pow(s.sigma, static_cast<double>(s.p)) / 4.0;
  cert.min_norm = std::numeric_limits<double>::infinity();
  const Vector* last = nullptr;
  double last_norm = 0.0;
  for (const ArchivedQuery& q : oracle.archive()) {
    if (last == nullptr || !(q.point.array() == last->array()).all()) {
      last_norm = f.full(q.point, 1).gradient.norm();
      last = &q.point;
    }
    cert.gradient_norms.push_back(last_norm);
    cert.min_norm = std::min(cert.min_norm, last_norm);
    if (!(last_norm > cert.bound)) cert.all_exceed = false;
  }
  if (cert.gradient_norms.empty()) cert.min_norm = 0.0;
  return cert;
}

ReplayReport replay_archive(const ResistingOracle& oracle) {
  if (!oracle.finalized()) throw std::logic_error("replay_archive: adversary not finalized");
  const DeterministicHardInstance f = oracle.final_function();
  const Matrix& v = f.directions();
  const Index links = v.cols();
  ReplayReport report;
  for (const ArchivedQuery& q : oracle.archive()) {
    const Derivatives again = f.component(q.index, q.point, q.order);
    double err = std::abs(again.value - q.response.value) / std::max(1.0, std::abs(q.response.value));
    if (q.order >= 1) err = std::max(err, relative_error(again.gradient, q.response.gradient));
    if (q.order >= 2) err = std::max(err, relative_error(again.hessian, q.response.hessian));
    report.max_relative_error = std::max(report.max_relative_error, err);
    // v_r, ..., v_{K+1} were drawn after this query.
    for (Index k = q.round; k <= links; ++k) {
      report.max_late_overlap = std::max(report.max_late_overlap, std::abs(v.col(k - 1).dot(q.point)));
    }
    report.max_final_overlap = std::max(report.max_final_overlap, std::abs(v.col(links - 1).dot(q.point)));
    ++report.checked;
  }
  return report;
}

// ---------------------------------------------------------------------------

RandomizedHardInstance::RandomizedHardInstance(HardInstanceSpec spec, TallOrthogonal basis,
                                               std::optional<TallOrthogonal> rotation)
    : spec_(std::move(spec)), basis_(std::move(basis)), rotation_(std::move(rotation)) {
  const Index n = spec_.n;
  const Index k = spec_.chain_length;
  if (n < 1 || k < 1) throw std::invalid_argument("RandomizedHardInstance: need n, K >= 1");
  if (spec_.d % n != 0) throw std::invalid_argument("RandomizedHardInstance: d must be divisible by n");
  if (basis_.rows() != spec_.d / n || basis_.cols() != n * k) {
    throw std::invalid_argument("RandomizedHardInstance: B must be (d/n) x (nK)");
  }
  if (rotation_ && (rotation_->rows() != spec_.d || rotation_->cols() != spec_.d)) {
    throw std::invalid_argument("RandomizedHardInstance: C must be d x d");
  }
  const SoftClampParams clamp = SoftClampParams::for_chain_length(k);
  hats_.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) hats_.emplace_back(basis_.block(i * k, k), clamp);
  scale_ = spec_.scale;
  sigma_ = spec_.sigma;
}

Vector RandomizedHardInstance::to_block(Index i, const Vector& x) const {
  const Index m = block_dim();
  if (rotation_) return rotation_->matrix().middleCols(i * m, m).transpose() * x;
  return x.segment(i * m, m);
}

Vector RandomizedHardInstance::from_block(Index i, const Vector& y) const {
  const Index m = block_dim();
  if (rotation_) return rotation_->matrix().middleCols(i * m, m) * y;
  Vector x = Vector::Zero(spec_.d);
  x.segment(i * m, m) = y;
  return x;
}

Derivatives RandomizedHardInstance::component(Index i, const Vector& x, int order) const {
  check_component_args(i, x, order);
  const Index m = block_dim();
  const Derivatives h = hats_[static_cast<size_t>(i)].eval(to_block(i, x) / sigma_, order);
  Derivatives out;
  out.order = order;
  out.value = scale_ * h.value;
  if (order >= 1) out.gradient = from_block(i, (scale_ / sigma_) * h.gradient);
  if (order >= 2) {
    const double w = scale_ / (sigma_ * sigma_);
    if (rotation_) {
      const auto c = rotation_->matrix().middleCols(i * m, m);
      out.hessian = w * (c * h.hessian * c.transpose());
    } else {
      out.hessian = Matrix::Zero(spec_.d, spec_.d);
      out.hessian.block(i * m, i * m, m, m) = w * h.hessian;
    }
  }
  return out;
}

RandomizedHardInstance RandomizedHardInstance::unscaled() const {
  RandomizedHardInstance copy = *this;
  copy.scale_ = 1.0;
  copy.sigma_ = 1.0;
  return copy;
}

RandomizedHardInstance sample_randomized_instance(const HardInstanceSpec& spec, Rng& rng, bool haar_rotation) {
  if (spec.mode == InstanceMode::Deterministic) {
    throw std::invalid_argument("sample_randomized_instance: spec is deterministic");
  }
  if (spec.chain_length < 1) throw std::invalid_argument("sample_randomized_instance: K must be >= 1");
  if (spec.d % spec.n != 0) throw std::invalid_argument("sample_randomized_instance: d must be divisible by n");
  const Index m = spec.d / spec.n;
  const Index cols = spec.n * spec.chain_length;
  if (m < cols) throw std::invalid_argument("sample_randomized_instance: need d / n >= n K");
  TallOrthogonal basis = sample_orthonormal_columns(m, cols, rng);
  std::optional<TallOrthogonal> rotation;
  if (haar_rotation) rotation = sample_orthonormal_columns(spec.d, spec.d, rng);
  return RandomizedHardInstance(spec, std::move(basis), std::move(rotation));
}

void write_basis_file(const std::string& path, const RandomizedHardInstance& instance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const HardInstanceSpec& s = instance.spec();
  put_u32(out, kBasisMagic);
  put_u32(out, static_cast<std::uint32_t>(s.d));
  put_u32(out, static_cast<std::uint32_t>(s.n));
  put_u32(out, static_cast<std::uint32_t>(s.chain_length));
  const Matrix& b = instance.basis().matrix();
  for (Index r = 0; r < b.rows(); ++r)
    for (Index c = 0; c < b.cols(); ++c) put_f64(out, b(r, c));
  if (!out) throw std::runtime_error("failed writing " + path);
}

BasisFile read_basis_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (get_u32(in) != kBasisMagic) throw std::runtime_error(path + ": not a basis file");
  BasisFile f;
  f.d = get_u32(in);
  f.n = get_u32(in);
  f.k = get_u32(in);
  if (f.n == 0 || f.d % f.n != 0) throw std::runtime_error(path + ": inconsistent header");
  const Index rows = f.d / f.n;
  const Index cols = static_cast<Index>(f.n) * f.k;
  f.basis.resize(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) f.basis(r, c) = get_f64(in);
  return f;
}

}  // namespace hardsum
