#include <cmath>

#include "ghz/crystal.hpp"
#include "ghz/error.hpp"

namespace ghz::crystal {

void RateInputs::validate() const {
  if (!(n_p > 1 && n_s > 1 && n_i > 1)) throw DomainError("refractive indices must exceed 1");
  if (!(length_mm > 0)) throw DomainError("crystal length must be positive");
  if (!(d_eff > 0)) throw DomainError("d_eff must be positive");
  if (!(omega > 0)) throw DomainError("spectral integral must be positive");
  if (n_i == n_s) throw DomainError("n_i == n_s makes the rate formula singular");
}

double RateInputs::index_factor() const { return n_p * n_s * n_i * (n_i - n_s); }

double pair_state_angle(double d_eff_i, double d_eff_j) {
  if (d_eff_i < 0 || d_eff_j < 0) throw DomainError("arm nonlinearities must be non-negative");
  if (d_eff_i == 0 && d_eff_j == 0) throw DomainError("both arm nonlinearities vanish");
  return std::atan2(d_eff_i, d_eff_j);
}

double relative_pair_rate(const RateInputs& a, const RateInputs& b) {
  a.validate();
  b.validate();
  const double dr = a.d_eff / b.d_eff;
  return dr * dr * (a.length_mm / b.length_mm) * (b.index_factor() / a.index_factor()) * (a.omega / b.omega);
}

double backsolve_omega_ratio(const RateInputs& a, const RateInputs& b, double target) {
  if (!(target > 0)) throw DomainError("target rate ratio must be positive");
  RateInputs a1 = a, b1 = b;
  a1.omega = 1;
  b1.omega = 1;
  return target / relative_pair_rate(a1, b1);
}

}  // namespace ghz::crystal
