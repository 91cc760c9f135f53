#pragma once

// Few-photon polarization states over one-photon-per-mode Hilbert spaces.
//
// Basis convention: modes are kept sorted by path label, and a basis index is
// the big-endian bit string over that order with H = 0 and V = 1. For modes
// {2, 5, 7} the index of |H_2 V_5 V_7> is 0b011 = 3, printed as "HVV".
//
// PBS convention: a polarizing beam splitter joining paths (a, b) transmits H
// and reflects V. A reflected photon leaves through the port that carries the
// other input's transmitted light and keeps no extra phase. Post-selecting one
// photon per output path therefore keeps exactly the components where the
// photons in a and b share a polarization.

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ghz::qstate {

using cplx = std::complex<double>;
using Amplitudes = Eigen::VectorXcd;
using Matrix2 = Eigen::Matrix2cd;
using DenseMatrix = Eigen::MatrixXcd;

inline constexpr int kMaxModes = 12;
// Dense 2^n x 2^n operators above this size stop being useful for checks.
inline constexpr int kMaxDenseOperatorModes = 10;
inline constexpr double kNormTolerance = 1e-12;

class PureState {
 public:
  // `modes` may be given in any order; amplitudes must follow the sorted order.
  PureState(std::vector<int> modes, Amplitudes amps, bool normalized);

  static PureState product(std::vector<int> modes, std::string_view pattern);

  int size() const noexcept { return static_cast<int>(modes_.size()); }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(amps_.size()); }
  const std::vector<int>& modes() const noexcept { return modes_; }
  const Amplitudes& amps() const noexcept { return amps_; }
  bool normalized() const noexcept { return normalized_; }

  double norm_squared() const noexcept { return amps_.squaredNorm(); }
  // Position of `mode` in the sorted order; throws DomainError if absent.
  int position(int mode) const;
  bool has_mode(int mode) const noexcept;

  cplx amplitude(std::string_view pattern) const;
  std::string label(std::size_t index) const;
  std::size_t index_of(std::string_view pattern) const;

  // Scaled to unit norm with the first nonzero amplitude made real positive.
  PureState canonical() const;

  // Equality up to a global phase.
  bool approx_equal(const PureState& other, double tol = 1e-12) const;

  // Tensor product over disjoint mode sets; result modes are re-sorted.
  static PureState tensor(const PureState& a, const PureState& b);

 private:
  std::vector<int> modes_;
  Amplitudes amps_;
  bool normalized_;
};

enum class OpKind { pauli_x, pauli_y, pauli_z, m_k, projector, waveplate, rotation };

struct LocalOperator {
  Matrix2 matrix;
  OpKind kind;

  // Validates the invariants of `kind` (Hermitian/involutory, unitary, ...).
  LocalOperator(Matrix2 m, OpKind k);

  bool is_hermitian(double tol = kNormTolerance) const;
  bool is_unitary(double tol = kNormTolerance) const;
};

LocalOperator pauli_x();
LocalOperator pauli_y();
LocalOperator pauli_z();
LocalOperator projector_h();
LocalOperator projector_v();

// cos(k pi / n) sigma_x + sin(k pi / n) sigma_y, for 0 <= k < n.
LocalOperator mk_operator(int k, int n);

// Retarder with phase `retardance` and fast axis at `angle` from H.
LocalOperator waveplate(double retardance, double angle);
LocalOperator half_wave_plate(double angle);
LocalOperator quarter_wave_plate(double angle);
// Polarization rotator by `angle`: H -> cos H + sin V.
LocalOperator rotation(double angle);
// Unitary mapping the +1/-1 eigenvectors of M_k onto H/V, i.e. the combined
// wave-plate setting in front of an analyzer PBS measuring M_k.
LocalOperator mk_analyzer(int k, int n);

struct Term {
  double coefficient;
  std::vector<LocalOperator> factors;  // one per mode, sorted-mode order
};

class GlobalOperator {
 public:
  explicit GlobalOperator(int n) : n_(n) {}
  GlobalOperator(int n, std::vector<Term> terms);

  int size() const noexcept { return n_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  void add(Term t);

  DenseMatrix dense() const;

 private:
  int n_;
  std::vector<Term> terms_;
};

PureState ghz_state(int n);
PureState ghz_state(std::vector<int> modes);

// sum_k alpha_k M_k^{(x)n} + (|H><H|^{(x)n} + |V><V|^{(x)n}) / 2 with
// alpha_k = (-1)^k / (2n).
GlobalOperator witness_decomposition(int n);
double witness_coefficient(int k, int n);

// Product operator A^{(x)n}.
GlobalOperator tensor_power(const LocalOperator& op, int n);

double expectation(const PureState& state, const GlobalOperator& op);
PureState apply_local(const PureState& state, int mode, const LocalOperator& op);

struct PairSource {
  int mode_a;
  int mode_b;
  double theta;  // cos(theta)|HH> + sin(theta)|VV>
  bool rotated = false;  // both photons pass a 90 degree rotator
};

struct FusionNetwork {
  std::vector<PairSource> sources;
  std::vector<std::pair<int, int>> pbs_links;

  // Five pairs on paths (1,2) .. (9,10), signals 2,3,5,7,9 fused by four PBSs;
  // pairs 4 and 5 rotated when `rotate_last_two`.
  static FusionNetwork five_source_layout(double theta, bool rotate_last_two = true);

  // Throws TopologyError if links are not a tree connecting their modes.
  void validate() const;
  std::vector<int> signal_modes() const;
};

PureState pair_state(const PairSource& src);

struct FusionResult {
  PureState state;
  double success_probability;
};

// Projects `input` onto one photon per output path behind each PBS link.
FusionResult pbs_postselect(const PureState& input, std::span<const std::pair<int, int>> links);
FusionResult fuse_and_postselect(const FusionNetwork& network);

// Outcome probabilities (indexed like amplitudes) after applying `analyzer`
// to every mode.
std::vector<double> outcome_probabilities(const PureState& state, const LocalOperator& analyzer);

}  // namespace ghz::qstate
