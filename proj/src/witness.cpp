#include "ghz/witness.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "ghz/error.hpp"

namespace ghz::witness {

namespace {

double alpha(int k, int n) { return ((k % 2 == 0) ? 1.0 : -1.0) / (2.0 * n); }

void require_counts(const SettingCounts& s) {
  if (s.total() == 0) {
    throw InsufficientDataError(s.setting.name(), "setting " + s.setting.name() + " has no counts");
  }
}

}  // namespace

Setting Setting::parse(const std::string& name) {
  if (name == "Z") return z_basis();
  if (name.size() >= 2 && name[0] == 'M') {
    std::size_t used = 0;
    int k = -1;
    try {
      k = std::stoi(name.substr(1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == name.size() - 1 && k >= 0) return m_basis(k);
  }
  throw DomainError("unknown measurement setting '" + name + "'");
}

std::string Setting::name() const { return kind == Kind::z ? "Z" : "M" + std::to_string(k); }

SettingCounts SettingCounts::correlation(int k, Count plus, Count minus) {
  SettingCounts s;
  s.setting = Setting::m_basis(k);
  s.plus = plus;
  s.minus = minus;
  return s;
}

SettingCounts SettingCounts::population(Count all_h, Count all_v, Count rest) {
  SettingCounts s;
  s.setting = Setting::z_basis();
  s.all_h = all_h;
  s.all_v = all_v;
  s.rest = rest;
  return s;
}

SettingCounts SettingCounts::from_histogram(Setting setting, int n, Histogram h) {
  SettingCounts s;
  s.setting = setting;
  const std::string all_h(static_cast<std::size_t>(n), 'H');
  const std::string all_v(static_cast<std::size_t>(n), 'V');
  for (const auto& [outcome, c] : h) {
    if (outcome.size() != static_cast<std::size_t>(n)) {
      throw DomainError("outcome '" + outcome + "' does not have " + std::to_string(n) + " photons");
    }
    int v_count = 0;
    for (char ch : outcome) {
      if (ch == 'V') {
        ++v_count;
      } else if (ch != 'H') {
        throw DomainError("outcome '" + outcome + "' may only contain H/V");
      }
    }
    if (setting.kind == Setting::Kind::z) {
      if (outcome == all_h) {
        s.all_h += c;
      } else if (outcome == all_v) {
        s.all_v += c;
      } else {
        s.rest += c;
      }
    } else {
      (v_count % 2 == 0 ? s.plus : s.minus) += c;
    }
  }
  s.histogram = std::move(h);
  return s;
}

Count SettingCounts::total() const {
  return setting.kind == Setting::Kind::z ? all_h + all_v + rest : plus + minus;
}

void SettingCounts::validate(int n) const {
  if (!histogram) return;
  const auto derived = from_histogram(setting, n, *histogram);
  const bool same = setting.kind == Setting::Kind::z
                        ? (derived.all_h == all_h && derived.all_v == all_v && derived.rest == rest)
                        : (derived.plus == plus && derived.minus == minus);
  if (!same) {
    throw DomainError("aggregated counts of " + setting.name() + " disagree with its histogram");
  }
}

const SettingCounts& CountDataset::z() const {
  for (const auto& s : settings)
    if (s.setting.kind == Setting::Kind::z) return s;
  throw InsufficientDataError("Z", "dataset has no Z setting");
}

const SettingCounts& CountDataset::m(int k) const {
  for (const auto& s : settings)
    if (s.setting == Setting::m_basis(k)) return s;
  throw InsufficientDataError("M" + std::to_string(k), "dataset has no M" + std::to_string(k) + " setting");
}

void CountDataset::validate() const {
  if (n < 1) throw DomainError("photon number must be positive");
  std::set<std::string> seen;
  for (const auto& s : settings) {
    if (s.setting.kind == Setting::Kind::m && s.setting.k >= n) {
      throw DomainError("setting " + s.setting.name() + " out of range for n=" + std::to_string(n));
    }
    if (!seen.insert(s.setting.name()).second) {
      throw DomainError("setting " + s.setting.name() + " appears more than once");
    }
    s.validate(n);
  }
  if (!seen.contains("Z")) throw DomainError("missing setting Z");
  for (int k = 0; k < n; ++k) {
    if (!seen.contains("M" + std::to_string(k))) throw DomainError("missing setting M" + std::to_string(k));
  }
}

CountDataset CountDataset::scaled(Count factor) const {
  CountDataset out = *this;
  for (auto& s : out.settings) {
    s.plus *= factor;
    s.minus *= factor;
    s.all_h *= factor;
    s.all_v *= factor;
    s.rest *= factor;
    if (s.histogram)
      for (auto& [_, c] : *s.histogram) c *= factor;
  }
  return out;
}

double correlation_value(const SettingCounts& m) {
  require_counts(m);
  return (static_cast<double>(m.plus) - static_cast<double>(m.minus)) / static_cast<double>(m.total());
}

double correlation_sigma(const SettingCounts& m) {
  const double e = correlation_value(m);
  return std::sqrt(std::max(0.0, 1.0 - e * e) / static_cast<double>(m.total()));
}

FidelityEstimate estimate_fidelity(const CountDataset& data) {
  data.validate();
  FidelityEstimate est;
  const auto& z = data.z();
  require_counts(z);
  est.population_term = 0.5 * static_cast<double>(z.all_h + z.all_v) / static_cast<double>(z.total());
  for (int k = 0; k < data.n; ++k) {
    est.coherence_term += alpha(k, data.n) * correlation_value(data.m(k));
  }
  est.value = est.population_term + est.coherence_term;
  est.sigma = propagate_poisson(data);
  return est;
}

// First-order propagation with every raw bin an independent Poisson variable.
// For a ratio S / (S + R) the bin-wise sum collapses to P (1 - P) / N, and for
// (N+ - N-) / N to (1 - E^2) / N, so aggregated counts suffice.
double propagate_poisson(const CountDataset& data) {
  data.validate();
  const auto& z = data.z();
  require_counts(z);
  const double nz = static_cast<double>(z.total());
  const double p = static_cast<double>(z.all_h + z.all_v) / nz;
  double var = 0.25 * p * (1.0 - p) / nz;
  for (int k = 0; k < data.n; ++k) {
    const auto& m = data.m(k);
    require_counts(m);
    const double a = alpha(k, data.n);
    const double e = correlation_value(m);
    var += a * a * std::max(0.0, 1.0 - e * e) / static_cast<double>(m.total());
  }
  return std::sqrt(var);
}

Verdict entanglement_verdict(const FidelityEstimate& est, double threshold) {
  if (est.sigma < 0.0 || std::isnan(est.sigma)) throw DomainError("fidelity sigma must be non-negative");
  Verdict v;
  v.threshold = threshold;
  const double excess = est.value - threshold;
  if (est.sigma > 0.0) {
    v.sigmas = excess / est.sigma;
  } else if (excess == 0.0) {
    v.sigmas = 0.0;
  } else {
    v.sigmas = std::copysign(std::numeric_limits<double>::infinity(), excess);
  }
  v.genuine = excess > 0.0;
  return v;
}

PopulationStats population_stats(const SettingCounts& z) {
  if (z.setting.kind != Setting::Kind::z) throw DomainError("population statistics need the Z setting");
  require_counts(z);
  PopulationStats s;
  const double signal = static_cast<double>(z.all_h + z.all_v);
  s.population_fraction = signal / static_cast<double>(z.total());
  s.signal_to_noise =
      z.rest == 0 ? std::numeric_limits<double>::infinity() : signal / static_cast<double>(z.rest);
  return s;
}

}  // namespace ghz::witness
