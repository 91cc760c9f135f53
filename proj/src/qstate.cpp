#include "ghz/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <unordered_map>

#include "ghz/error.hpp"

namespace ghz::qstate {

namespace {

constexpr cplx kI{0.0, 1.0};

std::size_t dim_for(int n) { return std::size_t{1} << n; }

void check_mode_count(std::size_t n) {
  if (n < 1 || n > static_cast<std::size_t>(kMaxModes)) {
    throw SizeError("state needs 1.." + std::to_string(kMaxModes) + " modes, got " +
                    std::to_string(n));
  }
}

// Applies `m` to the qubit at sorted position `pos` of an n-mode vector, in place.
void apply_at(Amplitudes& v, int n, int pos, const Matrix2& m) {
  const std::size_t mask = std::size_t{1} << (n - 1 - pos);
  const auto dim = static_cast<std::size_t>(v.size());
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & mask) continue;
    const cplx a0 = v[static_cast<Eigen::Index>(i)];
    const cplx a1 = v[static_cast<Eigen::Index>(i | mask)];
    v[static_cast<Eigen::Index>(i)] = m(0, 0) * a0 + m(0, 1) * a1;
    v[static_cast<Eigen::Index>(i | mask)] = m(1, 0) * a0 + m(1, 1) * a1;
  }
}

Matrix2 rot(double a) {
  Matrix2 r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Union-find check that the links form a spanning tree over the modes they touch.
void validate_links(std::span<const std::pair<int, int>> links) {
  std::unordered_map<int, int> parent;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [a, b] : links) {
    if (a == b) throw TopologyError("PBS link joins mode " + std::to_string(a) + " to itself");
    parent.try_emplace(a, a);
    parent.try_emplace(b, b);
  }
  for (auto [a, b] : links) {
    const int ra = find(a), rb = find(b);
    if (ra == rb) {
      throw TopologyError("PBS links contain a loop through modes " + std::to_string(a) +
                          " and " + std::to_string(b));
    }
    parent[ra] = rb;
  }
  std::set<int> roots;
  for (auto& [m, _] : parent) roots.insert(find(m));
  if (roots.size() > 1) throw TopologyError("PBS network is disconnected");
}

}  // namespace

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(std::vector<int> modes, Amplitudes amps, bool normalized)
    : modes_(std::move(modes)), amps_(std::move(amps)), normalized_(normalized) {
  check_mode_count(modes_.size());
  if (static_cast<std::size_t>(amps_.size()) != dim_for(size())) {
    throw SizeError("amplitude vector has length " + std::to_string(amps_.size()) +
                    ", expected 2^" + std::to_string(size()));
  }
  // Amplitudes are given for the sorted order; only the labels need sorting.
  std::sort(modes_.begin(), modes_.end());
  if (std::adjacent_find(modes_.begin(), modes_.end()) != modes_.end()) {
    throw DomainError("duplicate mode label");
  }
  if (normalized_ && std::abs(norm_squared() - 1.0) > kNormTolerance) {
    throw DomainError("state flagged normalized but has squared norm " +
                      std::to_string(norm_squared()));
  }
}

PureState PureState::product(std::vector<int> modes, std::string_view pattern) {
  if (pattern.size() != modes.size()) throw SizeError("pattern length differs from mode count");
  check_mode_count(modes.size());
  // The pattern follows the caller's mode order; map it onto sorted order.
  std::vector<std::size_t> order(modes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return modes[l] < modes[r]; });
  std::string sorted_pattern;
  for (auto i : order) sorted_pattern += pattern[i];
  Amplitudes amps = Amplitudes::Zero(static_cast<Eigen::Index>(dim_for(static_cast<int>(modes.size()))));
  PureState tmp(modes, amps, false);
  tmp.amps_[static_cast<Eigen::Index>(tmp.index_of(sorted_pattern))] = 1.0;
  tmp.normalized_ = true;
  return tmp;
}

int PureState::position(int mode) const {
  auto it = std::lower_bound(modes_.begin(), modes_.end(), mode);
  if (it == modes_.end() || *it != mode) throw DomainError("unknown mode " + std::to_string(mode));
  return static_cast<int>(it - modes_.begin());
}

bool PureState::has_mode(int mode) const noexcept {
  return std::binary_search(modes_.begin(), modes_.end(), mode);
}

std::size_t PureState::index_of(std::string_view pattern) const {
  if (pattern.size() != modes_.size()) throw SizeError("pattern length differs from mode count");
  std::size_t idx = 0;
  for (char c : pattern) {
    idx <<= 1;
    if (c == 'V') {
      idx |= 1;
    } else if (c != 'H') {
      throw DomainError(std::string("basis pattern may only contain H/V, got '") + c + "'");
    }
  }
  return idx;
}

cplx PureState::amplitude(std::string_view pattern) const {
  return amps_[static_cast<Eigen::Index>(index_of(pattern))];
}

std::string PureState::label(std::size_t index) const {
  std::string s(modes_.size(), 'H');
  for (int j = 0; j < size(); ++j) {
    if (index & (std::size_t{1} << (size() - 1 - j))) s[static_cast<std::size_t>(j)] = 'V';
  }
  return s;
}

PureState PureState::canonical() const {
  const double nrm = std::sqrt(norm_squared());
  if (nrm == 0.0) throw NumericError("cannot normalize the zero vector");
  Amplitudes a = amps_ / nrm;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a[i]) > 1e-14) {
      a *= std::conj(a[i]) / std::abs(a[i]);
      a[i] = std::abs(a[i]);
      break;
    }
  }
  return PureState(modes_, std::move(a), true);
}

bool PureState::approx_equal(const PureState& other, double tol) const {
  if (modes_ != other.modes_) return false;
  Eigen::Index k = 0;
  amps_.cwiseAbs().maxCoeff(&k);
  if (std::abs(amps_[k]) == 0.0) return other.amps_.norm() <= tol;
  if (std::abs(other.amps_[k]) == 0.0) return false;
  const cplx ph = other.amps_[k] / amps_[k];
  const cplx unit = ph / std::abs(ph);
  return (amps_ * unit - other.amps_).cwiseAbs().maxCoeff() <= tol;
}

PureState PureState::tensor(const PureState& a, const PureState& b) {
  std::vector<int> modes = a.modes_;
  modes.insert(modes.end(), b.modes_.begin(), b.modes_.end());
  std::sort(modes.begin(), modes.end());
  if (std::adjacent_find(modes.begin(), modes.end()) != modes.end()) {
    throw DomainError("tensor product requires disjoint modes");
  }
  check_mode_count(modes.size());
  const int n = static_cast<int>(modes.size());
  // For each result position, where it comes from: (which factor, bit shift in that factor).
  std::vector<std::pair<bool, int>> src(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int m = modes[static_cast<std::size_t>(j)];
    if (a.has_mode(m)) {
      src[static_cast<std::size_t>(j)] = {true, a.size() - 1 - a.position(m)};
    } else {
      src[static_cast<std::size_t>(j)] = {false, b.size() - 1 - b.position(m)};
    }
  }
  const std::size_t dim = dim_for(n);
  Amplitudes out(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    std::size_t ia = 0, ib = 0;
    for (int j = 0; j < n; ++j) {
      if (!(i & (std::size_t{1} << (n - 1 - j)))) continue;
      auto [from_a, shift] = src[static_cast<std::size_t>(j)];
      (from_a ? ia : ib) |= std::size_t{1} << shift;
    }
    out[static_cast<Eigen::Index>(i)] =
        a.amps_[static_cast<Eigen::Index>(ia)] * b.amps_[static_cast<Eigen::Index>(ib)];
  }
  return PureState(std::move(modes), std::move(out), a.normalized_ && b.normalized_);
}

// ---------------------------------------------------------------------------
// Local operators

LocalOperator::LocalOperator(Matrix2 m, OpKind k) : matrix(std::move(m)), kind(k) {
  const Matrix2 id = Matrix2::Identity();
  switch (kind) {
    case OpKind::pauli_x:
    case OpKind::pauli_y:
    case OpKind::pauli_z:
    case OpKind::m_k:
      if (!is_hermitian() || (matrix * matrix - id).cwiseAbs().maxCoeff() > kNormTolerance) {
        throw DomainError("observable must be Hermitian and square to identity");
      }
      break;
    case OpKind::projector:
      if (!is_hermitian() || (matrix * matrix - matrix).cwiseAbs().maxCoeff() > kNormTolerance) {
        throw DomainError("projector must be Hermitian and idempotent");
      }
      break;
    case OpKind::waveplate:
    case OpKind::rotation:
      if (!is_unitary()) throw DomainError("optical element must be unitary");
      break;
  }
}

bool LocalOperator::is_hermitian(double tol) const {
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool LocalOperator::is_unitary(double tol) const {
  return (matrix * matrix.adjoint() - Matrix2::Identity()).cwiseAbs().maxCoeff() <= tol;
}

LocalOperator pauli_x() {
  Matrix2 m;
  m << 0, 1, 1, 0;
  return {m, OpKind::pauli_x};
}

LocalOperator pauli_y() {
  Matrix2 m;
  m << 0, -kI, kI, 0;
  return {m, OpKind::pauli_y};
}

LocalOperator pauli_z() {
  Matrix2 m;
  m << 1, 0, 0, -1;
  return {m, OpKind::pauli_z};
}

LocalOperator projector_h() {
  Matrix2 m;
  m << 1, 0, 0, 0;
  return {m, OpKind::projector};
}

LocalOperator projector_v() {
  Matrix2 m;
  m << 0, 0, 0, 1;
  return {m, OpKind::projector};
}

LocalOperator mk_operator(int k, int n) {
  if (n < 1) throw DomainError("M_k needs n >= 1");
  if (k < 0 || k >= n) {
    throw DomainError("M_k index k=" + std::to_string(k) + " outside [0, " + std::to_string(n - 1) + "]");
  }
  const double phi = k * std::numbers::pi / n;
  Matrix2 m;
  m << 0, std::polar(1.0, -phi), std::polar(1.0, phi), 0;
  return {m, OpKind::m_k};
}

LocalOperator waveplate(double retardance, double angle) {
  Matrix2 d = Matrix2::Zero();
  d(0, 0) = 1.0;
  d(1, 1) = std::polar(1.0, retardance);
  return {rot(angle) * d * rot(-angle), OpKind::waveplate};
}

LocalOperator half_wave_plate(double angle) { return waveplate(std::numbers::pi, angle); }

LocalOperator quarter_wave_plate(double angle) { return waveplate(std::numbers::pi / 2, angle); }

LocalOperator rotation(double angle) { return {rot(angle), OpKind::rotation}; }

LocalOperator mk_analyzer(int k, int n) {
  mk_operator(k, n);  // range check
  const double phi = k * std::numbers::pi / n;
  const cplx e = std::polar(1.0, -phi);
  Matrix2 u;
  u << 1, e, 1, -e;
  return {u / std::numbers::sqrt2, OpKind::waveplate};
}

// ---------------------------------------------------------------------------
// Global operators

GlobalOperator::GlobalOperator(int n, std::vector<Term> terms) : n_(n) {
  for (auto& t : terms) add(std::move(t));
}

void GlobalOperator::add(Term t) {
  if (static_cast<int>(t.factors.size()) != n_) {
    throw SizeError("term has " + std::to_string(t.factors.size()) + " factors, operator acts on " +
                    std::to_string(n_) + " modes");
  }
  terms_.push_back(std::move(t));
}

DenseMatrix GlobalOperator::dense() const {
  if (n_ < 1 || n_ > kMaxDenseOperatorModes) {
    throw SizeError("dense operator limited to " + std::to_string(kMaxDenseOperatorModes) + " modes");
  }
  const auto dim = static_cast<Eigen::Index>(dim_for(n_));
  DenseMatrix out = DenseMatrix::Zero(dim, dim);
  for (const auto& t : terms_) {
    DenseMatrix acc = t.factors.front().matrix;
    for (std::size_t j = 1; j < t.factors.size(); ++j) acc = kron(acc, t.factors[j].matrix);
    out += t.coefficient * acc;
  }
  return out;
}

GlobalOperator tensor_power(const LocalOperator& op, int n) {
  if (n < 1) throw SizeError("tensor power needs n >= 1");
  return GlobalOperator(n, {Term{1.0, std::vector<LocalOperator>(static_cast<std::size_t>(n), op)}});
}

double witness_coefficient(int k, int n) { return ((k % 2 == 0) ? 1.0 : -1.0) / (2.0 * n); }

GlobalOperator witness_decomposition(int n) {
  if (n < 1 || n > 64) throw SizeError("witness decomposition needs 1 <= n <= 64");
  GlobalOperator w(n);
  for (int k = 0; k < n; ++k) {
    w.add(Term{witness_coefficient(k, n),
               std::vector<LocalOperator>(static_cast<std::size_t>(n), mk_operator(k, n))});
  }
  w.add(Term{0.5, std::vector<LocalOperator>(static_cast<std::size_t>(n), projector_h())});
  w.add(Term{0.5, std::vector<LocalOperator>(static_cast<std::size_t>(n), projector_v())});
  return w;
}

PureState ghz_state(int n) {
  if (n < 1 || n > kMaxModes) {
    throw SizeError("GHZ state size must lie in [1, " + std::to_string(kMaxModes) + "], got " +
                    std::to_string(n));
  }
  std::vector<int> modes(static_cast<std::size_t>(n));
  std::iota(modes.begin(), modes.end(), 1);
  return ghz_state(std::move(modes));
}

PureState ghz_state(std::vector<int> modes) {
  check_mode_count(modes.size());
  const auto dim = static_cast<Eigen::Index>(dim_for(static_cast<int>(modes.size())));
  Amplitudes a = Amplitudes::Zero(dim);
  a[0] = (1.0 / std::numbers::sqrt2);
  a[dim - 1] = (1.0 / std::numbers::sqrt2);
  return PureState(std::move(modes), std::move(a), true);
}

double expectation(const PureState& state, const GlobalOperator& op) {
  if (op.size() != state.size()) {
    throw SizeError("operator acts on " + std::to_string(op.size()) + " modes, state has " +
                    std::to_string(state.size()));
  }
  cplx total = 0.0;
  for (const auto& t : op.terms()) {
    Amplitudes v = state.amps();
    for (int j = 0; j < state.size(); ++j) {
      apply_at(v, state.size(), j, t.factors[static_cast<std::size_t>(j)].matrix);
    }
    total += t.coefficient * state.amps().dot(v);  // dot conjugates the left side
  }
  if (std::abs(total.imag()) > 1e-10) {
    throw NumericError("expectation value has imaginary part " + std::to_string(total.imag()));
  }
  return total.real();
}

PureState apply_local(const PureState& state, int mode, const LocalOperator& op) {
  if (!op.is_unitary()) throw DomainError("apply_local requires a unitary operator");
  const int pos = state.position(mode);
  Amplitudes v = state.amps();
  apply_at(v, state.size(), pos, op.matrix);
  return PureState(state.modes(), std::move(v), state.normalized());
}

// ---------------------------------------------------------------------------
// Fusion

FusionNetwork FusionNetwork::five_source_layout(double theta, bool rotate_last_two) {
  FusionNetwork net;
  net.sources = {{1, 2, theta, false},
                 {3, 4, theta, false},
                 {5, 6, theta, false},
                 {7, 8, theta, rotate_last_two},
                 {9, 10, theta, rotate_last_two}};
  net.pbs_links = {{2, 3}, {3, 5}, {5, 7}, {7, 9}};
  return net;
}

void FusionNetwork::validate() const {
  std::set<int> all;
  for (const auto& s : sources) {
    if (s.mode_a == s.mode_b || !all.insert(s.mode_a).second || !all.insert(s.mode_b).second) {
      throw TopologyError("pair sources must occupy distinct modes");
    }
  }
  validate_links(pbs_links);
  std::set<int> linked;
  for (auto [a, b] : pbs_links) {
    linked.insert(a);
    linked.insert(b);
  }
  for (int m : linked) {
    if (!sources.empty() && !all.contains(m)) {
      throw TopologyError("PBS link references mode " + std::to_string(m) + " with no source");
    }
  }
  if (sources.size() > 1) {
    for (const auto& s : sources) {
      if (!linked.contains(s.mode_a) && !linked.contains(s.mode_b)) {
        throw TopologyError("pair on modes (" + std::to_string(s.mode_a) + "," +
                            std::to_string(s.mode_b) + ") is not joined to the network");
      }
    }
  }
}

std::vector<int> FusionNetwork::signal_modes() const {
  std::set<int> linked;
  for (auto [a, b] : pbs_links) {
    linked.insert(a);
    linked.insert(b);
  }
  return {linked.begin(), linked.end()};
}

PureState pair_state(const PairSource& src) {
  Amplitudes a = Amplitudes::Zero(4);
  a[0] = std::cos(src.theta);
  a[3] = std::sin(src.theta);
  PureState st({src.mode_a, src.mode_b}, std::move(a), true);
  if (src.rotated) {
    const auto r = rotation(std::numbers::pi / 2);
    st = apply_local(apply_local(st, src.mode_a, r), src.mode_b, r);
  }
  return st;
}

FusionResult pbs_postselect(const PureState& input, std::span<const std::pair<int, int>> links) {
  validate_links(links);
  const int n = input.size();
  std::vector<std::pair<std::size_t, std::size_t>> masks;
  for (auto [a, b] : links) {
    masks.emplace_back(std::size_t{1} << (n - 1 - input.position(a)),
                       std::size_t{1} << (n - 1 - input.position(b)));
  }
  Amplitudes out = input.amps();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    for (auto [ma, mb] : masks) {
      if (static_cast<bool>(idx & ma) != static_cast<bool>(idx & mb)) {
        out[i] = 0.0;
        break;
      }
    }
  }
  const double in_norm = input.norm_squared();
  if (in_norm == 0.0) throw NumericError("post-selection on the zero vector");
  const double p = out.squaredNorm() / in_norm;
  PureState raw(input.modes(), std::move(out), false);
  if (p == 0.0) return {std::move(raw), 0.0};
  return {raw.canonical(), p};
}

FusionResult fuse_and_postselect(const FusionNetwork& network) {
  network.validate();
  if (network.sources.empty()) throw TopologyError("fusion network has no sources");
  PureState st = pair_state(network.sources.front());
  for (std::size_t i = 1; i < network.sources.size(); ++i) {
    st = PureState::tensor(st, pair_state(network.sources[i]));
  }
  return pbs_postselect(st, network.pbs_links);
}

std::vector<double> outcome_probabilities(const PureState& state, const LocalOperator& analyzer) {
  Amplitudes v = state.amps();
  if (!analyzer.is_unitary()) throw DomainError("analyzer must be unitary");
  for (int j = 0; j < state.size(); ++j) apply_at(v, state.size(), j, analyzer.matrix);
  const double nrm = v.squaredNorm();
  if (nrm == 0.0) throw NumericError("zero state has no outcome distribution");
  std::vector<double> p(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) p[static_cast<std::size_t>(i)] = std::norm(v[i]) / nrm;
  return p;
}

}  // namespace ghz::qstate
