#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ghz/error.hpp"
#include "ghz/hyptest.hpp"
#include "ghz/io.hpp"

using namespace ghz::hyptest;

namespace {

TrialLedger table_ledger() {
  return ghz::io::ledger_from_json(ghz::io::read_json(std::filesystem::path(GHZ_REPO_DATA) / "trial_ledger.json"));
}

// Composite Simpson integral of the standard normal density over [x, x + 40].
double tail_quadrature(double x) {
  const int m = 200000;
  const double h = 40.0 / m;
  auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi); };
  double s = phi(x) + phi(x + 40.0);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4 : 2) * phi(x + i * h);
  return s * h / 3;
}

// S_Nt / N_t from an explicit walk over every trial.
double materialized_s(const TrialLedger& l) {
  const double nt = static_cast<double>(l.total());
  double sum = 0;
  for (std::uint64_t i = 0; i < l.n_z; ++i) {
    const double hi = nt / (2.0 * static_cast<double>(l.n_z)), lo = 0.0;
    sum += std::pow((hi - lo) / 2, 2);
  }
  for (std::size_t k = 0; k < l.n_k.size(); ++k) {
    const double a = 1.0 / (2.0 * l.n);
    for (std::uint64_t i = 0; i < l.n_k[k]; ++i) {
      const double hi = a * nt / static_cast<double>(l.n_k[k]);
      sum += std::pow((hi + hi) / 2, 2);
    }
  }
  return std::sqrt(sum) / nt;
}

}  // namespace

TEST_CASE("normal tail against quadrature") {
  for (double x : {0.0, 0.5, 1.0, 2.0, 3.224, 5.0, 8.0}) {
    CHECK(normal_tail(x) == doctest::Approx(tail_quadrature(x)).epsilon(1e-9));
  }
}

TEST_CASE("Pinelis constant") {
  CHECK(pinelis_constant() == doctest::Approx(120.0 * std::exp(5.0) / 3125.0).epsilon(1e-14));
  CHECK(pinelis_constant() == doctest::Approx(5.699).epsilon(1e-3));
}

TEST_CASE("D(x) is a non-increasing bound below the Gaussian factor") {
  double prev = 2;
  for (double x = 0; x <= 12; x += 0.01) {
    const double d = pinelis_D(x);
    CHECK(d <= std::exp(-0.5 * x * x) + 1e-15);
    CHECK(d <= prev + 1e-15);
    prev = d;
  }
  CHECK(pinelis_D(0) == doctest::Approx(1.0));
  CHECK(pinelis_eval(0.5).branch == Branch::gaussian);
  CHECK(pinelis_eval(3.0).branch == Branch::pinelis_tail);
  CHECK_THROWS_AS(pinelis_D(-0.1), ghz::DomainError);
}

TEST_CASE("closed-form S matches the materialized trial walk") {
  const auto l = table_ledger();
  CHECK(s_total(l) == doctest::Approx(materialized_s(l)).epsilon(1e-12));
  CHECK(s_total(l) == doctest::Approx(0.0329).epsilon(0.0003 / 0.0329));
}

TEST_CASE("published ledger") {
  const auto b = p_value_bound(table_ledger());
  CHECK(b.informative);
  CHECK(b.bound >= 3.3e-3);
  CHECK(b.bound <= 4.0e-3);
  CHECK(b.branch == Branch::pinelis_tail);
  CHECK(b.x_arg == doctest::Approx((0.606 - 0.5) / s_total(table_ledger())));
}

TEST_CASE("no excess gives a trivial bound") {
  auto l = table_ledger();
  l.f_exp = 0.5;
  const auto b = p_value_bound(l);
  CHECK(b.bound == 1.0);
  CHECK_FALSE(b.informative);
  l.f_exp = 0.3;
  CHECK(p_value_bound(l).bound == 1.0);
}

TEST_CASE("bound shrinks with more trials and larger excess") {
  const auto l = table_ledger();
  CHECK(p_value_bound(l.scaled(100)).bound < 1e-20);
  double prev = 1;
  for (double f = 0.51; f < 0.8; f += 0.01) {
    auto m = l;
    m.f_exp = f;
    const double b = p_value_bound(m).bound;
    CHECK(b <= prev);
    prev = b;
  }
}

TEST_CASE("ledger validation") {
  auto l = table_ledger();
  l.n_k.pop_back();
  CHECK_THROWS(l.validate());
  auto z = table_ledger();
  z.n_z = 0;
  CHECK_THROWS(z.validate());
}
