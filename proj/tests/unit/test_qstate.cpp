#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "ghz/error.hpp"
#include "ghz/qstate.hpp"

using namespace ghz::qstate;
using C = std::complex<double>;

namespace {

// Dense matrices built from raw 2x2 arrays, independent of the library's
// operator algebra.
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXcd power(const Eigen::Matrix2cd& m, int n) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (int i = 0; i < n; ++i) out = kron(out, m);
  return out;
}

Eigen::MatrixXcd ghz_projector(int n) {
  const Eigen::Index d = Eigen::Index{1} << n;
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d);
  v[0] = v[d - 1] = 1 / std::sqrt(2.0);
  return v * v.adjoint();
}

Eigen::MatrixXcd witness_oracle(int n) {
  Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(Eigen::Index{1} << n, Eigen::Index{1} << n);
  for (int k = 0; k < n; ++k) {
    const double phi = k * std::numbers::pi / n;
    Eigen::Matrix2cd m;
    m << 0, std::cos(phi) - C(0, 1) * std::sin(phi), std::cos(phi) + C(0, 1) * std::sin(phi), 0;
    w += (k % 2 ? -1.0 : 1.0) / (2.0 * n) * power(m, n);
  }
  Eigen::Matrix2cd h = Eigen::Matrix2cd::Zero(), v = Eigen::Matrix2cd::Zero();
  h(0, 0) = 1;
  v(1, 1) = 1;
  w += 0.5 * (power(h, n) + power(v, n));
  return w;
}

// Second-quantized fusion: every term is a multiset of (path, pol) creation
// operators, a PBS permutes modes, and post-selection keeps one photon per path.
using Fock = std::vector<std::pair<int, int>>;  // sorted (path, pol)

struct FockResult {
  std::map<std::string, C> amps;  // label over sorted paths
  double probability = 0;
};

FockResult fock_fusion(const std::vector<PairSource>& sources, const std::vector<std::pair<int, int>>& links) {
  std::map<Fock, C> state{{{}, 1.0}};
  for (const auto& s : sources) {
    C hh = std::cos(s.theta), vv = std::sin(s.theta);
    if (s.rotated) std::swap(hh, vv);
    std::map<Fock, C> next;
    for (const auto& [f, a] : state) {
      for (int pol : {0, 1}) {
        Fock g = f;
        g.push_back({s.mode_a, pol});
        g.push_back({s.mode_b, pol});
        std::sort(g.begin(), g.end());
        next[g] += a * (pol == 0 ? hh : vv);
      }
    }
    state = std::move(next);
  }
  std::vector<int> paths;
  for (const auto& s : sources) {
    paths.push_back(s.mode_a);
    paths.push_back(s.mode_b);
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& [a, b] : links) {
    std::map<Fock, C> next;
    for (const auto& [key, amp] : state) {
      Fock f = key;
      for (auto& [p, pol] : f) {
        if (pol == 1 && p == a) {
          p = b;
        } else if (pol == 1 && p == b) {
          p = a;
        }
      }
      std::sort(f.begin(), f.end());
      next[f] += amp;
    }
    state = std::move(next);
  }
  FockResult r;
  for (const auto& [f, a] : state) {
    if (f.size() != paths.size()) continue;
    bool ok = true;
    for (std::size_t i = 0; i < f.size(); ++i) ok = ok && f[i].first == paths[i];
    if (!ok) continue;
    std::string label;
    for (const auto& [p, pol] : f) label += pol ? 'V' : 'H';
    r.amps[label] = a;
    r.probability += std::norm(a);
  }
  return r;
}

void check_against_fock(const FusionNetwork& net) {
  const auto lib = fuse_and_postselect(net);
  const auto ref = fock_fusion(net.sources, net.pbs_links);
  CHECK(lib.success_probability == doctest::Approx(ref.probability).epsilon(1e-12));
  const double scale = 1 / std::sqrt(ref.probability);
  for (std::size_t i = 0; i < lib.state.dimension(); ++i) {
    const auto label = lib.state.label(i);
    const auto it = ref.amps.find(label);
    const C expect = it == ref.amps.end() ? C(0) : it->second * scale;
    CHECK(std::abs(lib.state.amps()[static_cast<Eigen::Index>(i)] - expect) < 1e-12);
  }
}

}  // namespace

TEST_CASE("basis labels are big-endian over sorted modes") {
  const auto s = PureState::product({7, 2, 5}, "VHV");
  // Sorted order 2, 5, 7 carries H, V, V.
  CHECK(s.label(3) == "HVV");
  CHECK(std::abs(s.amplitude("HVV") - C(1)) < 1e-15);
  CHECK(s.modes() == std::vector<int>{2, 5, 7});
}

TEST_CASE("witness decomposition equals the GHZ projector") {
  for (int n = 2; n <= 6; ++n) {
    const Eigen::MatrixXcd lib = witness_decomposition(n).dense();
    CHECK((lib - ghz_projector(n)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((witness_oracle(n) - ghz_projector(n)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("M_k operators are Hermitian involutions") {
  for (int n : {2, 5, 10}) {
    for (int k = 0; k < n; ++k) {
      const auto m = mk_operator(k, n);
      CHECK(m.is_hermitian());
      CHECK((m.matrix * m.matrix - Matrix2::Identity()).cwiseAbs().maxCoeff() < 1e-14);
      // The analyzer diagonalizes M_k: U M U^dagger = Z.
      const auto u = mk_analyzer(k, n);
      CHECK((u.matrix * m.matrix * u.matrix.adjoint() - pauli_z().matrix).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  CHECK_THROWS_AS(mk_operator(3, 3), ghz::DomainError);
}

TEST_CASE("GHZ expectation values") {
  for (int n = 2; n <= 6; ++n) {
    const auto g = ghz_state(n);
    CHECK(expectation(g, witness_decomposition(n)) == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < n; ++k) {
      CHECK(expectation(g, tensor_power(mk_operator(k, n), n)) == doctest::Approx(k % 2 ? -1.0 : 1.0));
    }
  }
}

TEST_CASE("five-source fusion matches the second-quantized oracle") {
  const double theta = 7 * std::numbers::pi / 30;
  SUBCASE("Bell pairs") { check_against_fock(FusionNetwork::five_source_layout(std::numbers::pi / 4, false)); }
  SUBCASE("unbalanced, last two rotated") { check_against_fock(FusionNetwork::five_source_layout(theta, true)); }
  SUBCASE("unbalanced, none rotated") { check_against_fock(FusionNetwork::five_source_layout(theta, false)); }
  SUBCASE("random angles and rotations") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 1.5);
    for (int trial = 0; trial < 5; ++trial) {
      auto net = FusionNetwork::five_source_layout(0.3, false);
      for (auto& s : net.sources) {
        s.theta = u(rng);
        s.rotated = rng() & 1;
      }
      check_against_fock(net);
    }
  }
  SUBCASE("three pairs") {
    FusionNetwork net;
    net.sources = {{1, 2, 0.4, false}, {4, 3, 0.9, true}, {6, 5, 1.1, false}};
    net.pbs_links = {{2, 3}, {3, 5}};
    check_against_fock(net);
  }
}

TEST_CASE("five Bell pairs fuse into GHZ_10 with probability 1/16") {
  const auto r = fuse_and_postselect(FusionNetwork::five_source_layout(std::numbers::pi / 4, false));
  CHECK(std::abs(r.success_probability - 1.0 / 16) < 1e-12);
  std::vector<int> modes(10);
  for (int i = 0; i < 10; ++i) modes[static_cast<std::size_t>(i)] = i + 1;
  CHECK(r.state.approx_equal(ghz_state(modes), 1e-12));
}

TEST_CASE("rotated unbalanced layout gives cos/sin 7pi/30 amplitudes") {
  const double theta = 7 * std::numbers::pi / 30;
  const auto r = fuse_and_postselect(FusionNetwork::five_source_layout(theta, true));
  const auto c = r.state.canonical();
  CHECK(std::abs(std::abs(c.amplitude("HHHHHHHHHH")) - std::cos(theta)) < 1e-12);
  CHECK(std::abs(std::abs(c.amplitude("VVVVVVVVVV")) - std::sin(theta)) < 1e-12);
  CHECK(std::cos(theta) == doctest::Approx(0.74314).epsilon(1e-5));
  // <M_k^(x)10> on this state is (-1)^k sin(2 theta) from the two-amplitude form.
  for (int k = 0; k < 10; ++k) {
    const double e = expectation(r.state, tensor_power(mk_operator(k, 10), 10));
    CHECK(e == doctest::Approx((k % 2 ? -1 : 1) * std::sin(2 * theta)).epsilon(1e-12));
    CHECK(std::abs(e) < 1);
  }
}

TEST_CASE("outcome probabilities of M_k analyzers") {
  const auto g = ghz_state(3);
  for (int k = 0; k < 3; ++k) {
    const auto p = outcome_probabilities(g, mk_analyzer(k, 3));
    double parity = 0;
    for (std::size_t o = 0; o < p.size(); ++o) {
      parity += (std::popcount(o) % 2 ? -1.0 : 1.0) * p[o];
    }
    CHECK(parity == doctest::Approx(k % 2 ? -1.0 : 1.0));
  }
}

TEST_CASE("invalid networks are rejected") {
  FusionNetwork net;
  net.sources = {{1, 2, 0.5, false}, {3, 4, 0.5, false}};
  net.pbs_links = {{2, 3}, {3, 2}};
  CHECK_THROWS_AS(net.validate(), ghz::TopologyError);
  CHECK_THROWS_AS(PureState::product({1, 2}, "HHV"), ghz::SizeError);
}
