#pragma once

// GHZ fidelity from coincidence counts.
//
// The fidelity estimator combines the n correlation settings M_k^{(x)n}
// (k = 0..n-1) with the population of |H..H> and |V..V> in the Z basis:
//
//   F = sum_k alpha_k (N_k+ - N_k-) / N_k  +  (N_z0 + N_z1) / (2 N_z)
//
// with alpha_k = (-1)^k / (2n). In an M_k setting an outcome string reads 'H'
// for the +1 analyzer port and 'V' for the -1 port, and the event sign is the
// product of the per-photon eigenvalues.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ghz::witness {

using Count = std::uint64_t;
using Histogram = std::map<std::string, Count>;

struct Setting {
  enum class Kind { z, m } kind = Kind::z;
  int k = 0;

  static Setting z_basis() { return {Kind::z, 0}; }
  static Setting m_basis(int k) { return {Kind::m, k}; }
  // "Z" or "M<k>".
  static Setting parse(const std::string& name);
  std::string name() const;
  bool operator==(const Setting&) const = default;
};

struct SettingCounts {
  Setting setting;
  std::optional<Histogram> histogram;
  // M_k aggregates.
  Count plus = 0;
  Count minus = 0;
  // Z aggregates.
  Count all_h = 0;
  Count all_v = 0;
  Count rest = 0;
  double hours = 0.0;  // acquisition time metadata, 0 if unknown

  static SettingCounts correlation(int k, Count plus, Count minus);
  static SettingCounts population(Count all_h, Count all_v, Count rest);
  // Aggregates are derived from the histogram; throws DomainError on
  // malformed outcome strings.
  static SettingCounts from_histogram(Setting s, int n, Histogram h);

  Count total() const;
  // Aggregates must agree with the histogram when both are present.
  void validate(int n) const;
};

struct CountDataset {
  int n = 0;
  std::vector<SettingCounts> settings;

  const SettingCounts& z() const;
  const SettingCounts& m(int k) const;
  // Exactly one Z and one M_k per k in [0, n).
  void validate() const;
  // Multiplies every count (histograms included) by `factor`.
  CountDataset scaled(Count factor) const;
};

struct FidelityEstimate {
  double value = 0.0;
  double sigma = 0.0;
  double population_term = 0.0;
  double coherence_term = 0.0;
};

struct Verdict {
  double sigmas = 0.0;  // (value - threshold) / sigma; +-inf when sigma == 0
  bool genuine = false;
  double threshold = 0.5;
};

struct PopulationStats {
  double population_fraction = 0.0;
  double signal_to_noise = 0.0;  // +inf when no counts fall outside H..H / V..V
};

// (N+ - N-) / N for an M_k setting.
double correlation_value(const SettingCounts& m);
// Delta-method standard deviation of correlation_value: sqrt((1 - E^2) / N).
double correlation_sigma(const SettingCounts& m);

FidelityEstimate estimate_fidelity(const CountDataset& data);
double propagate_poisson(const CountDataset& data);
Verdict entanglement_verdict(const FidelityEstimate& est, double threshold = 0.5);
PopulationStats population_stats(const SettingCounts& z);

}  // namespace ghz::witness
