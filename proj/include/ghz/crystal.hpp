#pragma once

// Phase matching in uniaxial and biaxial crystals.
//
// Units: wavelengths in nm at the API, um inside dispersion formulas, wave
// numbers in 1/um, lengths in mm, d coefficients in pm/V, angles in radians.
// Directions use the principal dielectric frame (x, y, z) with
// n_x <= n_y <= n_z; (theta, phi) are the polar and azimuth angles there.
//
// Type-II degenerate process: the pump runs on the fast eigenwave, the two
// down-converted photons one on the fast (F) and one on the slow (S) branch.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ghz::crystal {

using Vec3 = Eigen::Vector3d;

enum class Symmetry { uniaxial, biaxial };
enum class Branch { fast, slow };

// n^2 = a + b / (lambda^2 - c) - d lambda^2, lambda in um.
struct SellmeierTerm {
  double a = 0, b = 0, c = 0, d = 0;
  double index(double lambda_um) const;
};

// Full second-order tensor d_ijk in the principal frame (pm/V).
using DTensor = std::array<std::array<std::array<double, 3>, 3>, 3>;

struct SellmeierSet {
  std::string species;
  Symmetry symmetry = Symmetry::biaxial;
  std::array<SellmeierTerm, 3> axes;  // x, y, z
  double valid_min_nm = 0;
  double valid_max_nm = 0;
  std::string source_citation;
  DTensor d{};
  std::string d_citation;
  int schema_version = 1;

  // Throws DomainError outside the valid range.
  Vec3 principal_indices(double lambda_nm) const;
  void check_range(double lambda_nm) const;
  // Throws DomainError if indices are unphysical or disordered in range.
  void validate() const;
};

struct CrystalCut {
  double theta = 0;
  double phi = 0;
  double length_mm = 1;

  void validate() const;
};

std::filesystem::path default_data_dir();
SellmeierSet load_crystal(const std::filesystem::path& file);
// Looks up `<data_dir>/crystals/<species>.json`, species lower-cased.
SellmeierSet load_species(const std::string& species,
                          const std::filesystem::path& data_dir = default_data_dir());

Vec3 direction(double theta, double phi);
std::pair<double, double> angles(const Vec3& dir);

struct Eigenwave {
  double n = 0;
  Vec3 D;  // unit displacement vector, transverse to the wave vector
  Vec3 E;  // unit electric field
  double walkoff = 0;  // angle between E and D, equal to the wave/ray angle
};

struct EigenPair {
  Eigenwave fast;
  Eigenwave slow;
  const Eigenwave& operator[](Branch b) const { return b == Branch::fast ? fast : slow; }
};

EigenPair eigenwaves(const SellmeierSet& set, const Vec3& dir, double lambda_nm);
// (n_fast, n_slow)
std::pair<double, double> refractive_indices(const SellmeierSet& set, const Vec3& dir, double lambda_nm);
double walkoff_angle(const SellmeierSet& set, const Vec3& dir, double lambda_nm, Branch branch);

double d_contract(const DTensor& d, const Vec3& e_pump, const Vec3& e_1, const Vec3& e_2);

// Which unit vector of each eigenwave enters the d contraction. The
// displacement (transverse) choice reproduces the usual closed forms such as
// d22 cos^2(theta) cos(3 phi) for type-II BBO; the electric choice tilts each
// extraordinary field by its walk-off angle.
enum class FieldVectors { displacement, electric };
const Vec3& field(const Eigenwave& w, FieldVectors fv);

// Collinear Delta k = k_p - k_F - k_S (1/um) at degenerate wavelengths.
double delta_k_collinear(const SellmeierSet& set, const Vec3& dir, double lambda_pump_nm);

struct CurveSample {
  double theta = 0;
  double phi = 0;
  double delta_k = 0;
  double n_pump = 0, n_fast = 0, n_slow = 0;
  double d_eff = 0;
  double walkoff_fast = 0;
  double walkoff_slow = 0;
};

struct CollinearCurve {
  double lambda_pump_nm = 0;
  std::vector<CurveSample> samples;  // ordered by phi, then theta
  std::vector<double> gaps;          // phi values without a root
};

inline constexpr double kThetaScanStep = 0.5 * 3.14159265358979323846 / 180.0;
inline constexpr double kThetaTolerance = 1e-9;

// Roots of Delta k(theta) at fixed phi, bracketed at kThetaScanStep and bisected.
std::vector<double> collinear_roots(const SellmeierSet& set, double phi, double lambda_pump_nm);
CurveSample collinear_sample(const SellmeierSet& set, double theta, double phi, double lambda_pump_nm,
                             FieldVectors fv = FieldVectors::displacement);
CollinearCurve phase_match_collinear(const SellmeierSet& set, double lambda_pump_nm, int phi_steps = 360,
                                     FieldVectors fv = FieldVectors::displacement);

const CurveSample& max_d_eff(const CollinearCurve& curve);
// Sample with the smallest pair walk-off hypot(walkoff_fast, walkoff_slow).
// The slow photon alone reaches zero near the optic axes, so it is no use here.
const CurveSample& min_walkoff(const CollinearCurve& curve);
// Continuous minimum of the pair walk-off within +-dphi of a curve sample.
CurveSample refine_min_walkoff(const SellmeierSet& set, const CurveSample& seed, double lambda_pump_nm,
                               double dphi, FieldVectors fv = FieldVectors::displacement);

// Non-collinear emission. A cone direction is parametrized by its internal
// angle alpha from the pump and azimuth psi about it (psi measured from the
// transverse basis returned by transverse_basis).
std::pair<Vec3, Vec3> transverse_basis(const Vec3& pump_dir);
Vec3 cone_direction(const Vec3& pump_dir, double alpha, double psi);

struct RingSettings {
  double lambda_pump_nm = 390;
  double lambda_first_nm = 780;
  double lambda_second_nm = 780;
  Branch first = Branch::fast;
  double delta_k_offset = 0;  // solve |k_p - k_1| - k_2 = offset
  double alpha_max = 0.3;
  int alpha_scan = 300;
};

// Emission angle of the photon on `first` at azimuth psi, or nullopt.
std::optional<double> ring_alpha(const SellmeierSet& set, const Vec3& pump_dir, double psi,
                                 const RingSettings& rs);

struct Arm {
  double psi = 0;
  double alpha = 0;
  Vec3 fast_dir;     // fast photon at the intersection
  Vec3 partner_dir;  // its slow partner, near the other intersection
  Eigenwave pump, fast, slow;
  double d_eff = 0;
  // Angle between the fast photon's D and the line joining the two
  // intersections, folded into [0, pi/2].
  double deflection = 0;
};

struct NoncollinearSolution {
  Vec3 pump_dir;
  double lambda_pump_nm = 390;
  std::vector<Arm> arms;  // sorted by psi
};

NoncollinearSolution noncollinear_arms(const SellmeierSet& set, const CrystalCut& cut, double lambda_pump_nm = 390,
                                       int psi_steps = 720, FieldVectors fv = FieldVectors::displacement);

double d_eff_collinear(const SellmeierSet& set, const Vec3& dir, double lambda_pump_nm = 390,
                       FieldVectors fv = FieldVectors::displacement);

struct PumpSpec {
  double lambda_nm = 390;
  double fwhm_nm = 2.1;
};

struct RingPoint {
  Branch branch = Branch::fast;
  double psi = 0;
  double alpha = 0;  // internal emission angle
  double tx = 0, ty = 0;  // transverse direction components alpha (cos psi, sin psi)
  double lambda_nm = 0;
  double weight = 0;
};

struct RingOptions {
  int psi_steps = 180;
  int wavelength_samples = 7;  // per Gaussian, odd
  int mismatch_samples = 5;    // Delta k offsets across the sinc main lobe, odd
};

std::vector<RingPoint> spdc_rings(const SellmeierSet& set, const CrystalCut& cut, const PumpSpec& pump,
                                  double filter_fwhm_nm, const RingOptions& opt = {});

// Weighted spread of alpha per (branch, psi) bin, averaged over bins.
double ring_angular_width(const std::vector<RingPoint>& cloud);

enum class ArmPhoton { signal, idler };  // signal: fast photon, idler: slow partner

// FWHM (nm) of one photon's marginal of |phi(Delta k)|^2 * pump(omega_s + omega_i).
// With pump_fwhm_nm == 0 the pure sinc^2 width at the degenerate partner is used.
double spectral_fwhm(const SellmeierSet& set, const CrystalCut& cut, ArmPhoton photon, double pump_fwhm_nm,
                     double lambda_pump_nm = 390);

struct RateInputs {
  double d_eff = 0;
  double length_mm = 0;
  double n_p = 0, n_s = 0, n_i = 0;
  double walkoff_delta = 0;
  double omega = 1;

  void validate() const;
  double index_factor() const;  // n_p n_s n_i (n_i - n_s)
};

double pair_state_angle(double d_eff_i, double d_eff_j);
double relative_pair_rate(const RateInputs& a, const RateInputs& b);
// Omega_a / Omega_b that makes relative_pair_rate(a, b) equal `target`.
double backsolve_omega_ratio(const RateInputs& a, const RateInputs& b, double target);

}  // namespace ghz::crystal
