#pragma once

// Distribution-free p-value bound for the bi-separability test.
//
// Each trial contributes a value F_i whose mean under any bi-separable state
// is at most F_0. For an M_k trial F_i = +-alpha_k N_t / N_k, for a Z trial
// F_i = N_t / (2 N_z) or 0; the running sum of (F_i - F_0) is then a
// super-martingale with increments bounded by s_i = (max F_i - min F_i) / 2.
// Pinelis' tail inequality for such sequences gives
//
//   P(F_bs >= F_exp) <= D((F_exp - F_0) / (S_Nt / N_t)),
//   D(x) = min(exp(-x^2 / 2), 5! (e/5)^5 I(x)),
//
// where I is the standard normal upper tail and
// S_Nt / N_t = sqrt(1 / (16 N_z) + sum_k alpha_k^2 / N_k).
// Per-trial ledgers are never materialized; only the closed form is used.

#include <cstdint>
#include <string>
#include <vector>

namespace ghz::witness {
struct CountDataset;
}

namespace ghz::hyptest {

struct TrialLedger {
  int n = 0;
  std::uint64_t n_z = 0;
  std::vector<std::uint64_t> n_k;
  double f_exp = 0.0;
  double f_0 = 0.5;

  std::uint64_t total() const;
  void validate() const;

  static TrialLedger from_dataset(const witness::CountDataset& data, double f_exp, double f_0 = 0.5);
  TrialLedger scaled(std::uint64_t factor) const;
};

enum class Branch { gaussian, pinelis_tail };

struct PValueBound {
  double x_arg = 0.0;
  double bound = 1.0;
  Branch branch = Branch::gaussian;
  bool informative = true;  // false when F_exp <= F_0
  std::string note;
};

std::string to_string(Branch b);

// 5! (e/5)^5
double pinelis_constant();

// S_Nt / N_t.
double s_total(const TrialLedger& ledger);
// P(Z >= x) for standard normal Z.
double normal_tail(double x);

struct PinelisValue {
  double value;
  Branch branch;
};
PinelisValue pinelis_eval(double x);
double pinelis_D(double x);

PValueBound p_value_bound(const TrialLedger& ledger);

}  // namespace ghz::hyptest
