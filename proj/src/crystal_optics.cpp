#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ghz/crystal.hpp"
#include "ghz/error.hpp"

#ifndef GHZ_DEFAULT_DATA_DIR
#define GHZ_DEFAULT_DATA_DIR "data"
#endif

namespace ghz::crystal {

namespace {

using json = nlohmann::json;

int axis_index(char c) {
  switch (c) {
    case 'x': return 0;
    case 'y': return 1;
    case 'z': return 2;
    default: return -1;
  }
}

// Kleinman symmetry: every permutation of (i, j, k) shares the value.
void set_symmetric(DTensor& d, int i, int j, int k, double v) {
  const int idx[3] = {i, j, k};
  int p[3] = {0, 1, 2};
  do {
    d[idx[p[0]]][idx[p[1]]][idx[p[2]]] = v;
  } while (std::next_permutation(p, p + 3));
}

}  // namespace

double SellmeierTerm::index(double lambda_um) const {
  const double l2 = lambda_um * lambda_um;
  return std::sqrt(a + b / (l2 - c) - d * l2);
}

void SellmeierSet::check_range(double lambda_nm) const {
  if (!(lambda_nm >= valid_min_nm && lambda_nm <= valid_max_nm)) {
    throw DomainError(species + ": wavelength " + std::to_string(lambda_nm) + " nm outside valid range [" +
                      std::to_string(valid_min_nm) + ", " + std::to_string(valid_max_nm) + "] nm");
  }
}

Vec3 SellmeierSet::principal_indices(double lambda_nm) const {
  check_range(lambda_nm);
  const double um = lambda_nm * 1e-3;
  return {axes[0].index(um), axes[1].index(um), axes[2].index(um)};
}

void SellmeierSet::validate() const {
  if (!(valid_min_nm > 0 && valid_max_nm > valid_min_nm)) throw DomainError(species + ": invalid wavelength range");
  for (int i = 0; i <= 20; ++i) {
    const double l = valid_min_nm + (valid_max_nm - valid_min_nm) * i / 20.0;
    const Vec3 n = principal_indices(l);
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(n[a]) || n[a] <= 1.0) throw DomainError(species + ": non-physical index in range");
    }
    if (symmetry == Symmetry::biaxial && !(n[0] < n[1] && n[1] < n[2])) {
      throw DomainError(species + ": biaxial indices must satisfy n_x < n_y < n_z");
    }
  }
}

void CrystalCut::validate() const {
  constexpr double pi = 3.14159265358979323846;
  if (!(theta >= 0 && theta <= pi)) throw DomainError("cut theta must lie in [0, pi]");
  if (!(phi >= 0 && phi < 2 * pi)) throw DomainError("cut phi must lie in [0, 2 pi)");
  if (!(length_mm > 0)) throw DomainError("crystal length must be positive");
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("GHZ_DATA_DIR"); env && *env) return env;
  return GHZ_DEFAULT_DATA_DIR;
}

SellmeierSet load_crystal(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError({file.string() + ": cannot open crystal file"});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError({file.string() + ": " + e.what()});
  }

  std::vector<std::string> diag;
  auto need = [&](const char* key) -> const json* {
    if (!j.contains(key)) {
      diag.push_back(std::string("missing field '") + key + "'");
      return nullptr;
    }
    return &j.at(key);
  };

  SellmeierSet s;
  try {
    if (auto v = need("schema_version")) s.schema_version = v->get<int>();
    if (s.schema_version != 1) diag.push_back("unsupported schema_version " + std::to_string(s.schema_version));
    if (auto v = need("species")) s.species = v->get<std::string>();
    if (auto v = need("symmetry")) {
      const auto sym = v->get<std::string>();
      if (sym == "uniaxial") {
        s.symmetry = Symmetry::uniaxial;
      } else if (sym == "biaxial") {
        s.symmetry = Symmetry::biaxial;
      } else {
        diag.push_back("symmetry must be 'uniaxial' or 'biaxial'");
      }
    }
    if (auto v = need("source_citation")) s.source_citation = v->get<std::string>();
    if (auto v = need("valid_range_nm")) {
      if (!v->is_array() || v->size() != 2) {
        diag.push_back("valid_range_nm must be [min, max]");
      } else {
        s.valid_min_nm = v->at(0).get<double>();
        s.valid_max_nm = v->at(1).get<double>();
      }
    }
    if (auto v = need("sellmeier")) {
      for (const char* ax : {"x", "y", "z"}) {
        if (!v->contains(ax)) {
          diag.push_back(std::string("sellmeier.") + ax + " missing");
          continue;
        }
        const auto& t = v->at(ax);
        auto& term = s.axes[static_cast<std::size_t>(axis_index(ax[0]))];
        for (const char* c : {"a", "b", "c", "d"}) {
          if (!t.contains(c)) diag.push_back(std::string("sellmeier.") + ax + "." + c + " missing");
        }
        term.a = t.value("a", 0.0);
        term.b = t.value("b", 0.0);
        term.c = t.value("c", 0.0);
        term.d = t.value("d", 0.0);
      }
    }
    if (auto v = need("d_tensor")) {
      s.d_citation = v->value("citation", "");
      const auto comps = v->value("components", json::object());
      for (const auto& [key, val] : comps.items()) {
        if (key.size() != 3 || axis_index(key[0]) < 0 || axis_index(key[1]) < 0 || axis_index(key[2]) < 0) {
          diag.push_back("d_tensor component '" + key + "' is not an index triple like 'xyz'");
          continue;
        }
        set_symmetric(s.d, axis_index(key[0]), axis_index(key[1]), axis_index(key[2]), val.get<double>());
      }
    }
  } catch (const json::exception& e) {
    diag.push_back(e.what());
  }
  if (!diag.empty()) {
    for (auto& d : diag) d = file.string() + ": " + d;
    throw SchemaError(diag);
  }
  s.validate();
  return s;
}

SellmeierSet load_species(const std::string& species, const std::filesystem::path& data_dir) {
  std::string name = species;
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto file = data_dir / "crystals" / (name + ".json");
  if (!std::filesystem::exists(file)) throw DomainError("unknown crystal species '" + species + "'");
  return load_crystal(file);
}

Vec3 direction(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::pair<double, double> angles(const Vec3& dir) {
  const Vec3 u = dir.normalized();
  double phi = std::atan2(u.y(), u.x());
  if (phi < 0) phi += 2 * 3.14159265358979323846;
  return {std::acos(std::clamp(u.z(), -1.0, 1.0)), phi};
}

std::pair<Vec3, Vec3> transverse_basis(const Vec3& pump_dir) {
  const Vec3 s = pump_dir.normalized();
  const Vec3 a = std::abs(s.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = s.cross(a).normalized();
  const Vec3 v = s.cross(u);
  return {u, v};
}

Vec3 cone_direction(const Vec3& pump_dir, double alpha, double psi) {
  const auto [u, v] = transverse_basis(pump_dir);
  return std::cos(alpha) * pump_dir.normalized() + std::sin(alpha) * (std::cos(psi) * u + std::sin(psi) * v);
}

// The impermeability eta = diag(1/n_i^2) restricted to the plane normal to the
// wave vector has eigenvalues 1/n^2 with the D vectors as eigenvectors.
EigenPair eigenwaves(const SellmeierSet& set, const Vec3& dir, double lambda_nm) {
  const Vec3 n = set.principal_indices(lambda_nm);
  const Vec3 s = dir.normalized();
  const Eigen::Matrix3d eta = n.cwiseProduct(n).cwiseInverse().asDiagonal();
  const auto [u, v] = transverse_basis(s);
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = u;
  B.col(1) = v;
  const Eigen::Matrix2d M = B.transpose() * eta * B;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(M);

  auto make = [&](int col) {
    Eigenwave w;
    w.n = 1.0 / std::sqrt(es.eigenvalues()[col]);
    w.D = (B * es.eigenvectors().col(col)).normalized();
    // Deterministic sign: largest component positive.
    Eigen::Index imax = 0;
    w.D.cwiseAbs().maxCoeff(&imax);
    if (w.D[imax] < 0) w.D = -w.D;
    w.E = (eta * w.D).normalized();
    w.walkoff = std::acos(std::clamp(std::abs(w.E.dot(w.D)), 0.0, 1.0));
    return w;
  };
  // Eigenvalues ascend; the larger 1/n^2 belongs to the fast wave.
  return {make(1), make(0)};
}

std::pair<double, double> refractive_indices(const SellmeierSet& set, const Vec3& dir, double lambda_nm) {
  const auto p = eigenwaves(set, dir, lambda_nm);
  return {p.fast.n, p.slow.n};
}

double walkoff_angle(const SellmeierSet& set, const Vec3& dir, double lambda_nm, Branch branch) {
  return eigenwaves(set, dir, lambda_nm)[branch].walkoff;
}

const Vec3& field(const Eigenwave& w, FieldVectors fv) { return fv == FieldVectors::electric ? w.E : w.D; }

double d_contract(const DTensor& d, const Vec3& e_pump, const Vec3& e_1, const Vec3& e_2) {
  double sum = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) sum += d[i][j][k] * e_pump[i] * e_1[j] * e_2[k];
  return sum;
}

}  // namespace ghz::crystal
