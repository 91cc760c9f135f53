#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ghz/crystal.hpp"
#include "ghz/error.hpp"

namespace ghz::crystal {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

double wave_number(double n, double lambda_nm) { return kTwoPi * n / (lambda_nm * 1e-3); }

Branch other(Branch b) { return b == Branch::fast ? Branch::slow : Branch::fast; }

template <class F>
double bisect(F&& f, double a, double b, double fa, double tol) {
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0) return m;
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// |k_p - k_1 d| - k_2(partner) - offset for a photon on rs.first along d.
double ring_mismatch(const SellmeierSet& set, const Vec3& s, double kp, const Vec3& d, const RingSettings& rs) {
  const double k1 = wave_number(eigenwaves(set, d, rs.lambda_first_nm)[rs.first].n, rs.lambda_first_nm);
  const Vec3 k2v = kp * s - k1 * d;
  const double k2n = k2v.norm();
  const double k2 = wave_number(eigenwaves(set, k2v / k2n, rs.lambda_second_nm)[other(rs.first)].n, rs.lambda_second_nm);
  return k2n - k2 - rs.delta_k_offset;
}

std::optional<double> ring_alpha_near(const SellmeierSet& set, const Vec3& s, double kp, double psi,
                                      const RingSettings& rs, double hint) {
  const auto [u, v] = transverse_basis(s);
  const Vec3 t = std::cos(psi) * u + std::sin(psi) * v;
  auto g = [&](double a) { return ring_mismatch(set, s, kp, std::cos(a) * s + std::sin(a) * t, rs); };
  constexpr double lo_limit = 1e-5;
  double step = 2e-4;
  double a_lo = std::max(lo_limit, hint - step), a_hi = std::min(rs.alpha_max, hint + step);
  double g_lo = g(a_lo), g_hi = g(a_hi);
  for (int iter = 0; iter < 40 && (g_lo < 0) == (g_hi < 0); ++iter) {
    step *= 2;
    if (a_lo > lo_limit) {
      a_lo = std::max(lo_limit, hint - step);
      g_lo = g(a_lo);
    }
    if (a_hi < rs.alpha_max) {
      a_hi = std::min(rs.alpha_max, hint + step);
      g_hi = g(a_hi);
    }
    if (a_lo <= lo_limit && a_hi >= rs.alpha_max) break;
  }
  if ((g_lo < 0) == (g_hi < 0)) return std::nullopt;
  return bisect(g, a_lo, a_hi, g_lo, 1e-13);
}

Vec3 partner_direction(const SellmeierSet& set, const Vec3& s, double kp, const Vec3& d, Branch first,
                       double lambda_first_nm) {
  const double k1 = wave_number(eigenwaves(set, d, lambda_first_nm)[first].n, lambda_first_nm);
  return (kp * s - k1 * d).normalized();
}

double gaussian_weight(double offset, double fwhm) {
  if (fwhm <= 0) return offset == 0 ? 1.0 : 0.0;
  return std::exp(-4 * std::numbers::ln2 * (offset / fwhm) * (offset / fwhm));
}

// Offsets spanning +-fwhm; a single centre sample when fwhm is zero.
std::vector<double> gaussian_offsets(double fwhm, int samples) {
  if (fwhm <= 0 || samples <= 1) return {0.0};
  std::vector<double> out;
  for (int i = 0; i < samples; ++i) out.push_back(fwhm * (-1.0 + 2.0 * i / (samples - 1)));
  return out;
}

double sinc2(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double s = std::sin(x) / x;
  return s * s;
}

double half_max_width(const std::vector<double>& x, const std::vector<double>& y) {
  const double peak = *std::max_element(y.begin(), y.end());
  if (!(peak > 0)) throw NumericError("empty spectral profile");
  const auto n = y.size();
  std::size_t first = n, last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] >= 0.5 * peak) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }
  if (first == 0 || last + 1 >= n) throw NumericError("spectral profile exceeds the sampling window");
  auto cross = [&](std::size_t a, std::size_t b) {
    return x[a] + (0.5 * peak - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
  };
  return cross(last, last + 1) - cross(first - 1, first);
}

}  // namespace

double delta_k_collinear(const SellmeierSet& set, const Vec3& dir, double lambda_pump_nm) {
  const double ls = 2 * lambda_pump_nm;
  const auto p = eigenwaves(set, dir, lambda_pump_nm);
  const auto d = eigenwaves(set, dir, ls);
  return wave_number(p.fast.n, lambda_pump_nm) - wave_number(d.fast.n, ls) - wave_number(d.slow.n, ls);
}

std::vector<double> collinear_roots(const SellmeierSet& set, double phi, double lambda_pump_nm) {
  std::vector<double> roots;
  auto f = [&](double t) { return delta_k_collinear(set, direction(t, phi), lambda_pump_nm); };
  constexpr double lo = 1e-4;
  const double hi = std::numbers::pi - 1e-4;
  const int steps = static_cast<int>(std::ceil((hi - lo) / kThetaScanStep));
  double a = lo, fa = f(a);
  for (int i = 1; i <= steps; ++i) {
    const double b = std::min(hi, lo + i * kThetaScanStep);
    const double fb = f(b);
    if (fa == 0) {
      roots.push_back(a);
    } else if ((fa < 0) != (fb < 0) && fb != 0) {
      roots.push_back(bisect(f, a, b, fa, kThetaTolerance));
    }
    a = b;
    fa = fb;
  }
  return roots;
}

CurveSample collinear_sample(const SellmeierSet& set, double theta, double phi, double lambda_pump_nm,
                             FieldVectors fv) {
  const Vec3 s = direction(theta, phi);
  const auto p = eigenwaves(set, s, lambda_pump_nm);
  const auto d = eigenwaves(set, s, 2 * lambda_pump_nm);
  CurveSample c;
  c.theta = theta;
  c.phi = phi;
  c.n_pump = p.fast.n;
  c.n_fast = d.fast.n;
  c.n_slow = d.slow.n;
  c.delta_k = wave_number(p.fast.n, lambda_pump_nm) - wave_number(d.fast.n, 2 * lambda_pump_nm) -
              wave_number(d.slow.n, 2 * lambda_pump_nm);
  c.d_eff = std::abs(d_contract(set.d, field(p.fast, fv), field(d.fast, fv), field(d.slow, fv)));
  c.walkoff_fast = d.fast.walkoff;
  c.walkoff_slow = d.slow.walkoff;
  return c;
}

CollinearCurve phase_match_collinear(const SellmeierSet& set, double lambda_pump_nm, int phi_steps,
                                     FieldVectors fv) {
  set.check_range(lambda_pump_nm);
  set.check_range(2 * lambda_pump_nm);
  if (phi_steps < 1) throw DomainError("phi_steps must be positive");
  CollinearCurve curve;
  curve.lambda_pump_nm = lambda_pump_nm;
  for (int i = 0; i < phi_steps; ++i) {
    const double phi = kTwoPi * i / phi_steps;
    const auto roots = collinear_roots(set, phi, lambda_pump_nm);
    if (roots.empty()) curve.gaps.push_back(phi);
    for (double t : roots) curve.samples.push_back(collinear_sample(set, t, phi, lambda_pump_nm, fv));
  }
  return curve;
}

const CurveSample& max_d_eff(const CollinearCurve& curve) {
  if (curve.samples.empty()) throw NumericError("collinear curve is empty");
  return *std::max_element(curve.samples.begin(), curve.samples.end(),
                           [](const auto& a, const auto& b) { return a.d_eff < b.d_eff; });
}

const CurveSample& min_walkoff(const CollinearCurve& curve) {
  if (curve.samples.empty()) throw NumericError("collinear curve is empty");
  return *std::min_element(curve.samples.begin(), curve.samples.end(), [](const auto& a, const auto& b) {
    return std::hypot(a.walkoff_fast, a.walkoff_slow) < std::hypot(b.walkoff_fast, b.walkoff_slow);
  });
}

CurveSample refine_min_walkoff(const SellmeierSet& set, const CurveSample& seed, double lambda_pump_nm,
                               double dphi, FieldVectors fv) {
  // Follow the root branch nearest the seed and golden-section search phi.
  double theta_prev = seed.theta;
  auto at = [&](double phi) -> std::optional<CurveSample> {
    const auto roots = collinear_roots(set, phi, lambda_pump_nm);
    if (roots.empty()) return std::nullopt;
    const double t = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
      return std::abs(a - theta_prev) < std::abs(b - theta_prev);
    });
    if (std::abs(t - theta_prev) > 12 * kThetaScanStep) return std::nullopt;
    return collinear_sample(set, t, phi, lambda_pump_nm, fv);
  };
  auto cost = [&](double phi) {
    const auto c = at(phi);
    return c ? std::hypot(c->walkoff_fast, c->walkoff_slow) : std::numeric_limits<double>::infinity();
  };
  // Coarse pass first; the pair walk-off need not be unimodal over the window.
  double centre = seed.phi, fc = cost(seed.phi);
  for (int i = -20; i <= 20; ++i) {
    const double phi = seed.phi + dphi * i / 20.0;
    const double f = cost(phi);
    if (f < fc) {
      fc = f;
      centre = phi;
    }
  }
  const double g = 0.5 * (std::sqrt(5.0) - 1);
  double a = centre - dphi / 20.0, b = centre + dphi / 20.0;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = cost(x1), f2 = cost(x2);
  while (b - a > 1e-10) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = cost(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = cost(x2);
    }
  }
  auto best = at(0.5 * (a + b));
  if (!best || std::hypot(best->walkoff_fast, best->walkoff_slow) > std::hypot(seed.walkoff_fast, seed.walkoff_slow)) {
    return seed;
  }
  best->phi = std::fmod(best->phi + kTwoPi, kTwoPi);
  return *best;
}

double d_eff_collinear(const SellmeierSet& set, const Vec3& dir, double lambda_pump_nm, FieldVectors fv) {
  const auto [t, p] = angles(dir);
  return collinear_sample(set, t, p, lambda_pump_nm, fv).d_eff;
}

std::optional<double> ring_alpha(const SellmeierSet& set, const Vec3& pump_dir, double psi, const RingSettings& rs) {
  const Vec3 s = pump_dir.normalized();
  const double kp = wave_number(eigenwaves(set, s, rs.lambda_pump_nm).fast.n, rs.lambda_pump_nm);
  const auto [u, v] = transverse_basis(s);
  const Vec3 t = std::cos(psi) * u + std::sin(psi) * v;
  auto g = [&](double a) { return ring_mismatch(set, s, kp, std::cos(a) * s + std::sin(a) * t, rs); };
  constexpr double lo = 1e-5;
  double a = lo, ga = g(a);
  for (int i = 1; i <= rs.alpha_scan; ++i) {
    const double b = lo + (rs.alpha_max - lo) * i / rs.alpha_scan;
    const double gb = g(b);
    if ((ga < 0) != (gb < 0)) return bisect(g, a, b, ga, 1e-13);
    a = b;
    ga = gb;
  }
  return std::nullopt;
}

NoncollinearSolution noncollinear_arms(const SellmeierSet& set, const CrystalCut& cut, double lambda_pump_nm,
                                       int psi_steps, FieldVectors fv) {
  cut.validate();
  if (psi_steps < 8) throw DomainError("psi_steps too small");
  NoncollinearSolution sol;
  sol.lambda_pump_nm = lambda_pump_nm;
  sol.pump_dir = direction(cut.theta, cut.phi);
  const Vec3& s = sol.pump_dir;
  const double kp = wave_number(eigenwaves(set, s, lambda_pump_nm).fast.n, lambda_pump_nm);

  RingSettings fast_rs{lambda_pump_nm, 2 * lambda_pump_nm, 2 * lambda_pump_nm, Branch::fast};
  RingSettings slow_rs = fast_rs;
  slow_rs.first = Branch::slow;

  auto diff = [&](double psi) -> std::optional<double> {
    const auto af = ring_alpha(set, s, psi, fast_rs);
    const auto as = ring_alpha(set, s, psi, slow_rs);
    if (!af || !as) return std::nullopt;
    return *af - *as;
  };

  std::vector<double> crossings;
  std::optional<double> prev = diff(0.0);
  double prev_psi = 0.0;
  for (int i = 1; i <= psi_steps; ++i) {
    const double psi = kTwoPi * i / psi_steps;
    const auto cur = diff(psi);
    if (prev && cur && (*prev < 0) != (*cur < 0)) {
      auto f = [&](double q) {
        const auto v = diff(q);
        if (!v) throw NumericError("ring vanished while refining an intersection");
        return *v;
      };
      crossings.push_back(bisect(f, prev_psi, psi, *prev, 1e-12));
    }
    prev = cur;
    prev_psi = psi;
  }

  for (double psi : crossings) {
    Arm arm;
    arm.psi = psi;
    arm.alpha = *ring_alpha(set, s, psi, fast_rs);
    arm.fast_dir = cone_direction(s, arm.alpha, psi);
    arm.partner_dir = partner_direction(set, s, kp, arm.fast_dir, Branch::fast, 2 * lambda_pump_nm);
    arm.pump = eigenwaves(set, s, lambda_pump_nm).fast;
    arm.fast = eigenwaves(set, arm.fast_dir, 2 * lambda_pump_nm).fast;
    arm.slow = eigenwaves(set, arm.partner_dir, 2 * lambda_pump_nm).slow;
    arm.d_eff = std::abs(d_contract(set.d, field(arm.pump, fv), field(arm.fast, fv), field(arm.slow, fv)));
    sol.arms.push_back(arm);
  }

  if (sol.arms.size() == 2) {
    const Vec3 join = sol.arms[1].fast_dir - sol.arms[0].fast_dir;
    for (auto& arm : sol.arms) {
      const Vec3& d = arm.fast_dir;
      const Vec3 c = (join - join.dot(d) * d).normalized();
      const Vec3 e = (arm.fast.D - arm.fast.D.dot(d) * d).normalized();
      arm.deflection = std::acos(std::clamp(std::abs(e.dot(c)), 0.0, 1.0));
    }
  }
  return sol;
}

std::vector<RingPoint> spdc_rings(const SellmeierSet& set, const CrystalCut& cut, const PumpSpec& pump,
                                  double filter_fwhm_nm, const RingOptions& opt) {
  cut.validate();
  if (pump.fwhm_nm < 0 || filter_fwhm_nm < 0) throw DomainError("bandwidths must be non-negative");
  if (opt.psi_steps < 1) throw DomainError("psi_steps must be positive");
  const double lp0 = pump.lambda_nm;
  const double ls0 = 2 * lp0;
  set.check_range(lp0);
  set.check_range(ls0);
  const Vec3 s = direction(cut.theta, cut.phi);

  // sinc^2(Delta k L / 2) = 1/2 at Delta k L / 2 = 1.39156.
  const double dk_half = 2 * 1.39156 / (cut.length_mm * 1e3);
  std::vector<double> dk_offsets;
  const int m = std::max(1, opt.mismatch_samples);
  for (int i = 0; i < m; ++i) dk_offsets.push_back(m == 1 ? 0.0 : dk_half * (-1.0 + 2.0 * i / (m - 1)));

  const auto pump_offsets = gaussian_offsets(pump.fwhm_nm, opt.wavelength_samples);
  const auto filter_offsets = gaussian_offsets(filter_fwhm_nm, opt.wavelength_samples);

  std::vector<RingPoint> cloud;
  for (Branch first : {Branch::fast, Branch::slow}) {
    RingSettings central{lp0, ls0, ls0, first};
    for (int ip = 0; ip < opt.psi_steps; ++ip) {
      const double psi = kTwoPi * ip / opt.psi_steps;
      const auto a0 = ring_alpha(set, s, psi, central);
      if (!a0) continue;
      for (double dp : pump_offsets) {
        const double lp = lp0 + dp;
        const double w_pump = gaussian_weight(dp, pump.fwhm_nm);
        const double kp = wave_number(eigenwaves(set, s, lp).fast.n, lp);
        for (double df : filter_offsets) {
          const double l1 = ls0 + df;
          const double inv2 = 1.0 / lp - 1.0 / l1;
          if (inv2 <= 0) continue;
          const double l2 = 1.0 / inv2;
          double w = w_pump * gaussian_weight(df, filter_fwhm_nm);
          if (filter_fwhm_nm > 0) {
            w *= gaussian_weight(l2 - ls0, filter_fwhm_nm);
          } else if (std::abs(l2 - ls0) > 1e-9) {
            continue;
          }
          if (w < 1e-6 || l2 < set.valid_min_nm || l2 > set.valid_max_nm) continue;
          for (double dk : dk_offsets) {
            RingSettings rs{lp, l1, l2, first, dk};
            const auto a = ring_alpha_near(set, s, kp, psi, rs, *a0);
            if (!a) continue;
            RingPoint pt;
            pt.branch = first;
            pt.psi = psi;
            pt.alpha = *a;
            pt.tx = *a * std::cos(psi);
            pt.ty = *a * std::sin(psi);
            pt.lambda_nm = l1;
            pt.weight = w * sinc2(0.5 * dk * cut.length_mm * 1e3);
            cloud.push_back(pt);
          }
        }
      }
    }
  }
  return cloud;
}

double ring_angular_width(const std::vector<RingPoint>& cloud) {
  struct Acc {
    double w = 0, wa = 0, waa = 0;
  };
  std::map<std::pair<int, double>, Acc> bins;
  for (const auto& p : cloud) {
    auto& a = bins[{p.branch == Branch::fast ? 0 : 1, p.psi}];
    a.w += p.weight;
    a.wa += p.weight * p.alpha;
    a.waa += p.weight * p.alpha * p.alpha;
  }
  double sum = 0;
  int used = 0;
  for (const auto& [_, a] : bins) {
    if (a.w <= 0) continue;
    const double mean = a.wa / a.w;
    sum += std::sqrt(std::max(0.0, a.waa / a.w - mean * mean));
    ++used;
  }
  return used ? sum / used : 0.0;
}

// Joint spectrum over signal/idler frequency offsets (1/um) with the emission
// directions frozen at the central arm geometry; only the component of the
// mismatch along the pump enters the sinc.
double spectral_fwhm(const SellmeierSet& set, const CrystalCut& cut, ArmPhoton photon, double pump_fwhm_nm,
                     double lambda_pump_nm) {
  cut.validate();
  if (pump_fwhm_nm < 0) throw DomainError("pump FWHM must be non-negative");
  const Vec3 s = direction(cut.theta, cut.phi);
  Vec3 d_fast = s, d_slow = s;
  const auto sol = noncollinear_arms(set, cut, lambda_pump_nm);
  if (!sol.arms.empty()) {
    d_fast = sol.arms.front().fast_dir;
    d_slow = sol.arms.front().partner_dir;
  }
  const double cf = d_fast.dot(s), cs = d_slow.dot(s);
  const double L_um = cut.length_mm * 1e3;
  const double fp0 = 1.0 / (lambda_pump_nm * 1e-3);
  const double fs0 = 0.5 * fp0;

  auto kz = [&](double f_s, double f_i) {
    const double lp = 1e3 / (f_s + f_i), ls = 1e3 / f_s, li = 1e3 / f_i;
    return wave_number(eigenwaves(set, s, lp).fast.n, lp) - cf * wave_number(eigenwaves(set, d_fast, ls).fast.n, ls) -
           cs * wave_number(eigenwaves(set, d_slow, li).slow.n, li);
  };
  const double dk0 = kz(fs0, fs0);

  constexpr int N = 241;
  constexpr double span = 0.06;
  std::vector<double> nu(N);
  for (int i = 0; i < N; ++i) nu[i] = -span + 2 * span * i / (N - 1);
  std::vector<double> marginal(N, 0.0);

  if (pump_fwhm_nm == 0) {
    for (int i = 0; i < N; ++i) {
      const double fs = fs0 + nu[i], fi = fs0 - nu[i];
      marginal[i] = sinc2(0.5 * (kz(fs, fi) - dk0) * L_um);
    }
    // Monochromatic pump: signal and idler offsets mirror each other.
    return half_max_width(nu, marginal) * (2 * lambda_pump_nm * 1e-3) * (2 * lambda_pump_nm * 1e-3) * 1e3;
  }

  const double dfp = pump_fwhm_nm * 1e-3 / ((lambda_pump_nm * 1e-3) * (lambda_pump_nm * 1e-3));
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      const double fs = fs0 + nu[a], fi = fs0 + nu[b];
      const double jsi = sinc2(0.5 * (kz(fs, fi) - dk0) * L_um) * gaussian_weight(fs + fi - fp0, dfp);
      marginal[photon == ArmPhoton::signal ? a : b] += jsi;
    }
  }
  const double ls0_um = 2 * lambda_pump_nm * 1e-3;
  return half_max_width(nu, marginal) * ls0_um * ls0_um * 1e3;
}

}  // namespace ghz::crystal
