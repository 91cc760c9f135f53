#include "ghz/hyptest.hpp"

#include <cmath>
#include <numbers>

#include "ghz/error.hpp"
#include "ghz/witness.hpp"

namespace ghz::hyptest {

std::uint64_t TrialLedger::total() const {
  std::uint64_t t = n_z;
  for (auto c : n_k) t += c;
  return t;
}

void TrialLedger::validate() const {
  if (n < 1) throw DomainError("photon number must be positive");
  if (n_k.size() != static_cast<std::size_t>(n)) {
    throw SizeError("trial ledger needs " + std::to_string(n) + " M_k totals, got " + std::to_string(n_k.size()));
  }
  if (n_z == 0) throw InsufficientDataError("Z", "no Z trials");
  for (std::size_t k = 0; k < n_k.size(); ++k) {
    if (n_k[k] == 0) throw InsufficientDataError("M" + std::to_string(k), "no M" + std::to_string(k) + " trials");
  }
  if (!std::isfinite(f_exp) || !std::isfinite(f_0)) throw DomainError("fidelity values must be finite");
}

TrialLedger TrialLedger::from_dataset(const witness::CountDataset& data, double f_exp, double f_0) {
  data.validate();
  TrialLedger l;
  l.n = data.n;
  l.n_z = data.z().total();
  for (int k = 0; k < data.n; ++k) l.n_k.push_back(data.m(k).total());
  l.f_exp = f_exp;
  l.f_0 = f_0;
  return l;
}

TrialLedger TrialLedger::scaled(std::uint64_t factor) const {
  TrialLedger l = *this;
  l.n_z *= factor;
  for (auto& c : l.n_k) c *= factor;
  return l;
}

std::string to_string(Branch b) { return b == Branch::gaussian ? "gaussian" : "pinelis_tail"; }

double pinelis_constant() { return 120.0 * std::pow(std::numbers::e / 5.0, 5); }

double s_total(const TrialLedger& ledger) {
  ledger.validate();
  double s2 = 1.0 / (16.0 * static_cast<double>(ledger.n_z));
  const double a2 = 1.0 / (4.0 * ledger.n * ledger.n);
  for (auto c : ledger.n_k) s2 += a2 / static_cast<double>(c);
  return std::sqrt(s2);
}

double normal_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

PinelisValue pinelis_eval(double x) {
  if (!(x >= 0.0)) throw DomainError("pinelis_D is one-sided; x must be >= 0");
  const double g = std::exp(-0.5 * x * x);
  const double p = pinelis_constant() * normal_tail(x);
  if (p < g) return {p, Branch::pinelis_tail};
  return {g, Branch::gaussian};
}

double pinelis_D(double x) { return pinelis_eval(x).value; }

PValueBound p_value_bound(const TrialLedger& ledger) {
  const double s = s_total(ledger);
  PValueBound r;
  r.x_arg = (ledger.f_exp - ledger.f_0) / s;
  if (ledger.f_exp <= ledger.f_0) {
    r.informative = false;
    r.bound = 1.0;
    r.branch = Branch::gaussian;
    r.note = "observed fidelity does not exceed the bi-separable bound";
    return r;
  }
  const auto v = pinelis_eval(r.x_arg);
  r.bound = std::min(1.0, v.value);
  r.branch = v.branch;
  return r;
}

}  // namespace ghz::hyptest
