#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "ghz/error.hpp"
#include "ghz/io.hpp"
#include "ghz/witness.hpp"

using namespace ghz::witness;

namespace {

CountDataset reconstruction() {
  return ghz::io::count_file_from_json(
             ghz::io::read_json(std::filesystem::path(GHZ_REPO_DATA) / "tenfold_reconstruction.json"))
      .data;
}

// Flat view of the aggregate bins: [all_h, all_v, rest, plus_0, minus_0, ...].
std::vector<double> bins(const CountDataset& d) {
  std::vector<double> b{static_cast<double>(d.z().all_h), static_cast<double>(d.z().all_v),
                        static_cast<double>(d.z().rest)};
  for (int k = 0; k < d.n; ++k) {
    b.push_back(static_cast<double>(d.m(k).plus));
    b.push_back(static_cast<double>(d.m(k).minus));
  }
  return b;
}

// Estimator written directly from the bin counts.
double fidelity_from_bins(const std::vector<double>& b, int n) {
  double f = 0.5 * (b[0] + b[1]) / (b[0] + b[1] + b[2]);
  for (int k = 0; k < n; ++k) {
    const double p = b[3 + 2 * static_cast<std::size_t>(k)], m = b[4 + 2 * static_cast<std::size_t>(k)];
    f += (k % 2 ? -1.0 : 1.0) / (2.0 * n) * (p - m) / (p + m);
  }
  return f;
}

CountDataset dataset_for_state(int n, double theta, double total) {
  CountDataset d;
  d.n = n;
  const double c2 = std::cos(theta) * std::cos(theta);
  d.settings.push_back(SettingCounts::population(static_cast<Count>(std::llround(total * c2)),
                                                 static_cast<Count>(std::llround(total * (1 - c2))), 0));
  for (int k = 0; k < n; ++k) {
    const double e = (k % 2 ? -1 : 1) * std::sin(2 * theta);
    const auto plus = static_cast<Count>(std::llround(total * (1 + e) / 2));
    d.settings.push_back(SettingCounts::correlation(k, plus, static_cast<Count>(std::llround(total)) - plus));
  }
  return d;
}

}  // namespace

TEST_CASE("setting names parse and print") {
  CHECK(Setting::parse("Z") == Setting::z_basis());
  CHECK(Setting::parse("M7") == Setting::m_basis(7));
  CHECK(Setting::m_basis(3).name() == "M3");
  CHECK_THROWS(Setting::parse("X1"));
  CHECK_THROWS(Setting::parse("M"));
}

TEST_CASE("histograms aggregate by parity and population") {
  Histogram m{{"HHH", 5}, {"HVV", 3}, {"VHH", 2}, {"VVV", 1}};
  const auto mc = SettingCounts::from_histogram(Setting::m_basis(0), 3, m);
  // Even V count is +1.
  CHECK(mc.plus == 8);
  CHECK(mc.minus == 3);
  const auto zc = SettingCounts::from_histogram(Setting::z_basis(), 3, m);
  CHECK(zc.all_h == 5);
  CHECK(zc.all_v == 1);
  CHECK(zc.rest == 5);
  CHECK_THROWS_AS(SettingCounts::from_histogram(Setting::z_basis(), 3, {{"HXH", 1}}), ghz::DomainError);
}

TEST_CASE("expected counts of cos|H..H> + sin|V..V> give the exact overlap") {
  for (double theta : {std::numbers::pi / 4, 7 * std::numbers::pi / 30, 0.3}) {
    for (int n : {3, 6, 10}) {
      const auto est = estimate_fidelity(dataset_for_state(n, theta, 1e9));
      // |<GHZ|psi>|^2 computed from the two amplitudes.
      const double overlap = std::pow((std::cos(theta) + std::sin(theta)) / std::sqrt(2.0), 2);
      CHECK(est.value == doctest::Approx(overlap).epsilon(1e-8));
    }
  }
}

TEST_CASE("ideal GHZ data has unit fidelity and infinite significance") {
  const auto est = estimate_fidelity(dataset_for_state(4, std::numbers::pi / 4, 1000));
  CHECK(est.value == doctest::Approx(1.0));
  CHECK(est.sigma == doctest::Approx(0.0));
  const auto v = entanglement_verdict(est);
  CHECK(v.genuine);
  CHECK(std::isinf(v.sigmas));
}

TEST_CASE("uniform noise gives fidelity near 2^-n") {
  const int n = 10;
  CountDataset d;
  d.n = n;
  d.settings.push_back(SettingCounts::population(1000, 1000, 1022 * 1000));
  for (int k = 0; k < n; ++k) d.settings.push_back(SettingCounts::correlation(k, 50000, 50000));
  const auto est = estimate_fidelity(d);
  CHECK(est.value == doctest::Approx(1.0 / 1024).epsilon(1e-9));
  CHECK_FALSE(entanglement_verdict(est).genuine);
}

TEST_CASE("reconstructed dataset reproduces the published estimate") {
  const auto d = reconstruction();
  const auto est = estimate_fidelity(d);
  CHECK(est.value == doctest::Approx(0.606).epsilon(0.002 / 0.606));
  CHECK(est.sigma > 0.025);
  CHECK(est.sigma < 0.033);
  CHECK(entanglement_verdict(est).sigmas >= 3.5);
  const auto ps = population_stats(d.z());
  CHECK(ps.signal_to_noise == doctest::Approx(3.36).epsilon(0.01));
}

TEST_CASE("delta-method sigma matches bin-wise Poisson propagation") {
  const auto d = reconstruction();
  const auto b = bins(d);
  // Numerical Jacobian of the estimator, every bin Poisson with variance = count.
  double var = 0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    auto up = b, dn = b;
    const double h = 1e-4 * std::max(1.0, b[j]);
    up[j] += h;
    dn[j] -= h;
    const double g = (fidelity_from_bins(up, d.n) - fidelity_from_bins(dn, d.n)) / (2 * h);
    var += g * g * b[j];
  }
  CHECK(estimate_fidelity(d).sigma == doctest::Approx(std::sqrt(var)).epsilon(1e-6));
}

TEST_CASE("delta-method sigma matches a parametric bootstrap") {
  const auto d = reconstruction();
  const auto b = bins(d);
  std::mt19937_64 rng(2024);
  const int reps = 20000;
  double s = 0, s2 = 0;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> x(b.size());
    const double nz = b[0] + b[1] + b[2];
    std::discrete_distribution<int> zd({b[0], b[1], b[2]});
    for (int i = 0; i < static_cast<int>(nz); ++i) x[static_cast<std::size_t>(zd(rng))] += 1;
    for (int k = 0; k < d.n; ++k) {
      const std::size_t i = 3 + 2 * static_cast<std::size_t>(k);
      const double nk = b[i] + b[i + 1];
      std::binomial_distribution<int> bd(static_cast<int>(nk), b[i] / nk);
      x[i] = bd(rng);
      x[i + 1] = nk - x[i];
    }
    const double f = fidelity_from_bins(x, d.n);
    s += f;
    s2 += f * f;
  }
  const double mean = s / reps;
  const double sd = std::sqrt(s2 / reps - mean * mean);
  CHECK(estimate_fidelity(d).sigma == doctest::Approx(sd).epsilon(0.05));
}

TEST_CASE("sigma scales as 1/sqrt(N)") {
  const auto d = reconstruction();
  const auto e1 = estimate_fidelity(d);
  const auto e100 = estimate_fidelity(d.scaled(100));
  CHECK(e100.value == doctest::Approx(e1.value));
  CHECK(e100.sigma == doctest::Approx(e1.sigma / 10).epsilon(1e-12));
}

TEST_CASE("missing or empty settings are rejected") {
  auto d = reconstruction();
  auto empty = d;
  empty.settings[3] = SettingCounts::correlation(2, 0, 0);
  CHECK_THROWS_AS(estimate_fidelity(empty), ghz::InsufficientDataError);
  try {
    estimate_fidelity(empty);
  } catch (const ghz::InsufficientDataError& e) {
    CHECK(e.setting() == "M2");
  }
  auto missing = d;
  missing.settings.pop_back();
  CHECK_THROWS(missing.validate());
}
