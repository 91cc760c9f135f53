// ghzkit: command-line front end.
//
// Exit codes: 0 success, 1 usage or invalid argument, 2 schema violation,
// 3 insufficient data, 4 numeric failure.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghz/crystal.hpp"
#include "ghz/error.hpp"
#include "ghz/hyptest.hpp"
#include "ghz/io.hpp"
#include "ghz/simulator.hpp"
#include "ghz/witness.hpp"

namespace fs = std::filesystem;
using ghz::io::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSchema = 2, kInsufficient = 3, kNumeric = 4 };

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    ghz::io::write_text(out, text);
  }
}

// ---- analyze ----

struct AnalyzeArgs {
  std::string counts;
  std::string out;
  std::string format = "json";
  std::string populations;
  double threshold = 0.5;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const std::string bytes = ghz::io::read_text(a.counts);
  const auto file = ghz::io::count_file_from_json(ghz::io::read_json(a.counts));
  const auto& data = file.data;

  ghz::io::RunReport r;
  r.inputs_digest = ghz::io::sha256_hex(bytes);
  r.tool_version = ghz::io::tool_version();
  r.timestamp = ghz::io::utc_timestamp();
  r.provenance = ghz::io::to_string(file.provenance);
  r.fidelity = ghz::witness::estimate_fidelity(data);
  r.verdict = ghz::witness::entanglement_verdict(r.fidelity, a.threshold);
  r.pvalue = ghz::hyptest::p_value_bound(ghz::hyptest::TrialLedger::from_dataset(data, r.fidelity.value, a.threshold));
  r.population = ghz::witness::population_stats(data.z());
  for (int k = 0; k < data.n; ++k) {
    r.correlations.emplace_back("M" + std::to_string(k), ghz::witness::correlation_value(data.m(k)));
  }

  if (!a.populations.empty()) {
    const auto& z = data.z();
    if (!z.histogram) throw ghz::DomainError("Z setting has no histogram; populations need per-outcome counts");
    std::ostringstream csv;
    csv << "outcome,count,fraction\n";
    const double total = static_cast<double>(z.total());
    // All 2^n outcomes, zeros included, in index order.
    for (std::size_t o = 0; o < (std::size_t{1} << data.n); ++o) {
      std::string label(static_cast<std::size_t>(data.n), 'H');
      for (int b = 0; b < data.n; ++b) {
        if (o >> (data.n - 1 - b) & 1) label[static_cast<std::size_t>(b)] = 'V';
      }
      const auto it = z.histogram->find(label);
      const auto c = it == z.histogram->end() ? 0 : it->second;
      csv << label << ',' << c << ',' << fmt(static_cast<double>(c) / total) << '\n';
    }
    ghz::io::write_text(a.populations, csv.str());
  }

  if (a.format == "csv") {
    std::ostringstream csv;
    csv << "setting,value,sigma,total\n";
    const auto& z = data.z();
    const double pz = r.population.population_fraction;
    csv << "Z," << fmt(pz) << ',' << fmt(std::sqrt(pz * (1 - pz) / static_cast<double>(z.total()))) << ','
        << z.total() << '\n';
    for (int k = 0; k < data.n; ++k) {
      const auto& m = data.m(k);
      csv << m.setting.name() << ',' << fmt(ghz::witness::correlation_value(m)) << ','
          << fmt(ghz::witness::correlation_sigma(m)) << ',' << m.total() << '\n';
    }
    emit(csv.str(), a.out);
  } else {
    auto j = ghz::io::to_json(r);
    j["pvalue"]["s_total"] = ghz::hyptest::s_total(ghz::hyptest::TrialLedger::from_dataset(data, r.fidelity.value));
    j["inputs"] = {{"counts", a.counts}, {"notes", file.notes}};
    emit(ghz::io::dump(j), a.out);
  }
  return kOk;
}

// ---- simulate ----

struct SimulateArgs {
  std::string config = "reference";
  std::uint64_t pulses = 100000000;
  std::optional<std::uint64_t> seed;
  std::string settings = "all";
  unsigned threads = 0;
  std::string out;
  std::string report;
  std::string dump_config;
};

ghz::sim::ExperimentConfig load_config(const std::string& spec) {
  if (spec == "reference") return ghz::sim::calibrate_to_paper();
  if (spec == "ideal") return ghz::sim::ExperimentConfig::ideal();
  return ghz::io::config_from_json(ghz::io::read_json(spec));
}

std::vector<ghz::witness::Setting> parse_settings(const std::string& spec, int n) {
  if (spec == "all") return ghz::sim::full_setting_list(n);
  std::vector<ghz::witness::Setting> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(ghz::witness::Setting::parse(item));
  }
  return out;
}

int cmd_simulate(const SimulateArgs& a) {
  auto cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  if (!a.dump_config.empty()) {
    ghz::io::write_text(a.dump_config, ghz::io::dump(ghz::io::to_json(cfg)));
    if (a.pulses == 0) return kOk;
  }
  const auto settings = parse_settings(a.settings, static_cast<int>(cfg.modes().size()));

  ghz::sim::RunOptions opt;
  opt.threads = a.threads;
  const auto res = ghz::sim::run_monte_carlo(cfg, a.pulses, settings, opt);

  ghz::io::CountFile cf;
  cf.data = res.counts;
  cf.provenance = ghz::io::Provenance::simulated;
  cf.notes = "simulated, " + std::to_string(a.pulses) + " pulses per setting, seed " + std::to_string(cfg.seed);
  const std::string counts_text = ghz::io::dump(ghz::io::to_json(cf));
  if (!a.out.empty()) ghz::io::write_text(a.out, counts_text);

  json rep;
  rep["schema"] = "ghz.sim_report";
  rep["schema_version"] = ghz::io::kSchemaVersion;
  rep["tool_version"] = ghz::io::tool_version();
  rep["timestamp"] = ghz::io::utc_timestamp();
  const std::string cfg_text = ghz::io::dump(ghz::io::to_json(cfg));
  rep["inputs_digest"] = ghz::io::sha256_hex(cfg_text + "pulses=" + std::to_string(a.pulses) + ";settings=" + a.settings);
  rep["counts_digest"] = ghz::io::sha256_hex(counts_text);
  rep["pulses_per_setting"] = a.pulses;
  rep["seed"] = cfg.seed;
  rep["rates"] = {{"twofold_per_s", res.rates.twofold_per_s},
                  {"tenfold_expected_per_hour", res.rates.tenfold_expected_per_hour},
                  {"tenfold_formula_per_hour", res.rates.tenfold_formula_per_hour},
                  {"tenfold_simulated_per_hour", res.rates.tenfold_simulated_per_hour}};
  json vis = json::object();
  for (const auto& [k, v] : res.visibility) vis[k] = v;
  rep["diagnostics"] = {{"visibility", vis}, {"signal_to_noise", ghz::io::number(res.signal_to_noise)}};
  json reg = json::object();
  for (const auto& [k, v] : res.registered) reg[k] = v;
  rep["registered"] = reg;
  if (!cfg.provenance.empty()) rep["provenance"] = cfg.provenance;
  emit(ghz::io::dump(rep), a.report);
  return kOk;
}

// ---- crystal ----

struct CrystalArgs {
  std::string species = "bibo";
  std::vector<double> cut;  // theta phi
  std::optional<double> length;
  double lambda = 390;
  double pump_fwhm = 2.1;
  double filter_fwhm = 3.0;
  int phi_steps = 360;
  int psi_steps = 180;
  std::string fields = "displacement";
  std::string inputs;
  std::string out;
  std::string format = "json";
};

ghz::crystal::CrystalCut resolve_cut(const CrystalArgs& a, const std::string& species) {
  ghz::crystal::CrystalCut c;
  if (species == "bbo") {
    c = {0.768, 0.0, 2.0};
  } else {
    c = {1.944, 0.962, 0.6};
  }
  if (a.cut.size() == 2) {
    c.theta = a.cut[0];
    c.phi = a.cut[1];
  }
  if (a.length) c.length_mm = *a.length;
  c.validate();
  return c;
}

ghz::crystal::FieldVectors parse_fields(const std::string& s) {
  return s == "electric" ? ghz::crystal::FieldVectors::electric : ghz::crystal::FieldVectors::displacement;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

int crystal_summary(const CrystalArgs& a) {
  using namespace ghz::crystal;
  const std::string sp = lower(a.species);
  const auto set = load_species(sp);
  const auto cut = resolve_cut(a, sp);
  const auto fv = parse_fields(a.fields);
  const Vec3 dir = direction(cut.theta, cut.phi);
  const auto ew = eigenwaves(set, dir, 2 * a.lambda);

  json j;
  j["schema"] = "ghz.crystal_summary";
  j["schema_version"] = ghz::io::kSchemaVersion;
  j["tool_version"] = ghz::io::tool_version();
  j["species"] = set.species;
  j["sellmeier_citation"] = set.source_citation;
  j["d_citation"] = set.d_citation;
  j["field_vectors"] = fv == FieldVectors::electric ? "electric" : "displacement";
  j["cut"] = {{"theta", cut.theta}, {"phi", cut.phi}, {"length_mm", cut.length_mm}};
  j["lambda_pump_nm"] = a.lambda;
  j["cut_direction"] = {{"walkoff_fast", ew.fast.walkoff},
                        {"walkoff_slow", ew.slow.walkoff},
                        {"walkoff_quadrature", std::hypot(ew.fast.walkoff, ew.slow.walkoff)},
                        {"n_fast", ew.fast.n},
                        {"n_slow", ew.slow.n},
                        {"delta_k_collinear", delta_k_collinear(set, dir, a.lambda)},
                        {"d_eff_collinear", d_eff_collinear(set, dir, a.lambda, fv)}};

  const auto curve = phase_match_collinear(set, a.lambda, a.phi_steps, fv);
  {
    const auto& m = max_d_eff(curve);
    const auto w = refine_min_walkoff(set, min_walkoff(curve), a.lambda, 2 * std::numbers::pi / a.phi_steps, fv);
    j["collinear"] = {
        {"samples", curve.samples.size()},
        {"max_d_eff", {{"d_eff", m.d_eff}, {"theta", m.theta}, {"phi", m.phi}, {"walkoff_slow", m.walkoff_slow}}},
        {"min_walkoff", {{"walkoff_pair", std::hypot(w.walkoff_fast, w.walkoff_slow)}, {"walkoff_fast", w.walkoff_fast}, {"walkoff_slow", w.walkoff_slow}, {"d_eff", w.d_eff}, {"theta", w.theta}, {"phi", w.phi}}}};
  }

  const auto sol = noncollinear_arms(set, cut, a.lambda, 720, fv);
  json arms = json::array();
  for (const auto& arm : sol.arms) {
    arms.push_back({{"psi", arm.psi},
                    {"alpha", arm.alpha},
                    {"d_eff", arm.d_eff},
                    {"deflection", arm.deflection},
                    {"walkoff_fast", arm.fast.walkoff},
                    {"walkoff_slow", arm.slow.walkoff}});
  }
  j["arms"] = arms;
  if (sol.arms.size() == 2) {
    const double d0 = std::abs(sol.arms[0].d_eff), d1 = std::abs(sol.arms[1].d_eff);
    j["pair_state_angle"] = pair_state_angle(std::min(d0, d1), std::max(d0, d1));
    j["spectral_fwhm_nm"] = {{"signal", spectral_fwhm(set, cut, ArmPhoton::signal, a.pump_fwhm, a.lambda)},
                             {"idler", spectral_fwhm(set, cut, ArmPhoton::idler, a.pump_fwhm, a.lambda)}};
  }
  j["walkoff_displacement_um"] = {{"fast", std::tan(ew.fast.walkoff) * cut.length_mm * 1e3},
                                  {"slow", std::tan(ew.slow.walkoff) * cut.length_mm * 1e3}};
  emit(ghz::io::dump(j), a.out);
  return kOk;
}

int crystal_curve(const CrystalArgs& a) {
  using namespace ghz::crystal;
  const auto set = load_species(lower(a.species));
  const auto curve = phase_match_collinear(set, a.lambda, a.phi_steps, parse_fields(a.fields));
  if (a.format == "json") {
    json s = json::array();
    for (const auto& c : curve.samples) {
      s.push_back({{"theta", c.theta}, {"phi", c.phi}, {"d_eff", c.d_eff},
                   {"walkoff_fast", c.walkoff_fast}, {"walkoff_slow", c.walkoff_slow}});
    }
    emit(ghz::io::dump({{"species", set.species}, {"lambda_pump_nm", a.lambda}, {"samples", s}, {"gaps", curve.gaps}}),
         a.out);
    return kOk;
  }
  std::ostringstream csv;
  csv << "theta,phi,delta_k,n_pump,n_fast,n_slow,d_eff,walkoff_fast,walkoff_slow\n";
  for (const auto& c : curve.samples) {
    csv << fmt(c.theta) << ',' << fmt(c.phi) << ',' << fmt(c.delta_k) << ',' << fmt(c.n_pump) << ','
        << fmt(c.n_fast) << ',' << fmt(c.n_slow) << ',' << fmt(c.d_eff) << ',' << fmt(c.walkoff_fast) << ','
        << fmt(c.walkoff_slow) << '\n';
  }
  emit(csv.str(), a.out);
  return kOk;
}

int crystal_rings(const CrystalArgs& a) {
  using namespace ghz::crystal;
  const std::string sp = lower(a.species);
  const auto set = load_species(sp);
  const auto cut = resolve_cut(a, sp);
  RingOptions opt;
  opt.psi_steps = a.psi_steps;
  const auto cloud = spdc_rings(set, cut, {a.lambda, a.pump_fwhm}, a.filter_fwhm, opt);
  if (cloud.empty()) std::cerr << "warning: empty emission cloud for " << set.species << '\n';
  if (a.format == "json") {
    emit(ghz::io::dump({{"species", set.species},
                        {"points", cloud.size()},
                        {"angular_width", ring_angular_width(cloud)},
                        {"filter_fwhm_nm", a.filter_fwhm},
                        {"pump_fwhm_nm", a.pump_fwhm}}),
         a.out);
    return kOk;
  }
  std::ostringstream csv;
  csv << "branch,psi,alpha,tx,ty,lambda_nm,weight\n";
  for (const auto& p : cloud) {
    csv << (p.branch == Branch::fast ? "fast" : "slow") << ',' << fmt(p.psi) << ',' << fmt(p.alpha) << ','
        << fmt(p.tx) << ',' << fmt(p.ty) << ',' << fmt(p.lambda_nm) << ',' << fmt(p.weight) << '\n';
  }
  emit(csv.str(), a.out);
  return kOk;
}

int crystal_rate_ratio(const CrystalArgs& a) {
  using namespace ghz::crystal;
  const fs::path path = a.inputs.empty() ? default_data_dir() / "rate_inputs.json" : fs::path(a.inputs);
  const auto rp = ghz::io::rate_pair_from_json(ghz::io::read_json(path));
  json j;
  j["schema"] = "ghz.rate_ratio";
  j["schema_version"] = ghz::io::kSchemaVersion;
  j["a"] = rp.label_a;
  j["b"] = rp.label_b;
  j["ratio"] = relative_pair_rate(rp.a, rp.b);
  j["reciprocal"] = relative_pair_rate(rp.b, rp.a);
  if (rp.target > 0) {
    j["target"] = rp.target;
    j["omega_ratio_for_target"] = backsolve_omega_ratio(rp.a, rp.b, rp.target);
  }
  emit(ghz::io::dump(j), a.out);
  return kOk;
}

// ---- pvalue ----

struct PvalueArgs {
  std::string ledger;
  std::optional<double> f_exp;
  std::uint64_t scale = 1;
  std::string out;
};

int cmd_pvalue(const PvalueArgs& a) {
  auto l = ghz::io::ledger_from_json(ghz::io::read_json(a.ledger));
  if (a.f_exp) l.f_exp = *a.f_exp;
  if (a.scale != 1) l = l.scaled(a.scale);
  const auto b = ghz::hyptest::p_value_bound(l);
  json j = {{"schema", "ghz.pvalue"},
            {"schema_version", ghz::io::kSchemaVersion},
            {"bound", b.bound},
            {"branch", ghz::hyptest::to_string(b.branch)},
            {"x_arg", ghz::io::number(b.x_arg)},
            {"s_total", ghz::hyptest::s_total(l)},
            {"informative", b.informative},
            {"f_exp", l.f_exp},
            {"f_0", l.f_0},
            {"trials", l.total()}};
  if (!b.note.empty()) j["note"] = b.note;
  emit(ghz::io::dump(j), a.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GHZ entanglement verification, SPDC crystal optics and experiment simulation"};
  app.set_version_flag("--version", ghz::io::tool_version());
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Fidelity, verdict and p-value bound from a count file");
  analyze->add_option("counts", an.counts, "Count file (ghz.counts)")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", an.out, "Output file (default stdout)");
  analyze->add_option("--format", an.format, "json report or csv expectation values")
      ->check(CLI::IsMember({"json", "csv"}));
  analyze->add_option("--populations", an.populations, "Write Z-basis outcome populations as CSV");
  analyze->add_option("--threshold", an.threshold, "Fidelity threshold")->check(CLI::Range(0.0, 1.0));

  SimulateArgs si;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of the fusion experiment");
  simulate->add_option("--config", si.config, "'reference', 'ideal' or a config file (ghz.config)");
  simulate->add_option("--pulses", si.pulses, "Pulses per setting");
  simulate->add_option("--seed", si.seed, "Override the config seed");
  simulate->add_option("--settings", si.settings, "'all' or a list such as Z,M0,M3");
  simulate->add_option("--threads", si.threads, "Worker threads (0: all cores)");
  simulate->add_option("--out", si.out, "Write the simulated count file");
  simulate->add_option("--report", si.report, "Write the rate report (default stdout)");
  simulate->add_option("--dump-config", si.dump_config, "Write the resolved config; with --pulses 0 stop there");

  CrystalArgs cr;
  auto* crystal = app.add_subcommand("crystal", "Phase matching, rings and relative pair rates");
  crystal->require_subcommand(1);
  auto common = [&](CLI::App* c) {
    c->add_option("--species", cr.species, "Crystal species (data/crystals/<species>.json)");
    c->add_option("--lambda", cr.lambda, "Pump wavelength (nm)");
    c->add_option("--out", cr.out, "Output file (default stdout)");
    c->add_option("--fields", cr.fields, "Vectors entering d_eff")->check(CLI::IsMember({"displacement", "electric"}));
  };
  auto cut_opts = [&](CLI::App* c) {
    c->add_option("--cut", cr.cut, "Cut angles theta phi (rad)")->expected(2);
    c->add_option("--L", cr.length, "Crystal length (mm)");
  };
  auto* summary = crystal->add_subcommand("summary", "Scalar results for one cut");
  common(summary);
  cut_opts(summary);
  summary->add_option("--pump-fwhm", cr.pump_fwhm, "Pump bandwidth (nm)");
  summary->add_option("--phi-steps", cr.phi_steps, "Azimuth samples of the collinear curve");
  auto* curve = crystal->add_subcommand("curve", "Collinear phase-matching curve");
  common(curve);
  curve->add_option("--phi-steps", cr.phi_steps, "Azimuth samples");
  curve->add_option("--format", cr.format, "csv or json")->check(CLI::IsMember({"json", "csv"}));
  auto* rings = crystal->add_subcommand("rings", "Emission point cloud");
  common(rings);
  cut_opts(rings);
  rings->add_option("--pump-fwhm", cr.pump_fwhm, "Pump bandwidth (nm)");
  rings->add_option("--filter-fwhm", cr.filter_fwhm, "Filter bandwidth (nm), 0 for none");
  rings->add_option("--psi-steps", cr.psi_steps, "Azimuth samples");
  rings->add_option("--format", cr.format, "csv cloud or json summary")->check(CLI::IsMember({"json", "csv"}));
  auto* rate = crystal->add_subcommand("rate-ratio", "Relative pair rate of two crystals");
  rate->add_option("--inputs", cr.inputs, "Rate inputs file (ghz.rate_inputs)");
  rate->add_option("--out", cr.out, "Output file (default stdout)");

  PvalueArgs pv;
  auto* pvalue = app.add_subcommand("pvalue", "p-value bound from a trial ledger");
  pvalue->add_option("ledger", pv.ledger, "Ledger file (ghz.ledger)")->required()->check(CLI::ExistingFile);
  pvalue->add_option("--f-exp", pv.f_exp, "Override the observed fidelity");
  pvalue->add_option("--scale", pv.scale, "Multiply every trial count");
  pvalue->add_option("--out", pv.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (cr.format == "json" && (curve->parsed() || rings->parsed()) && curve->count("--format") + rings->count("--format") == 0) {
    cr.format = "csv";
  }

  try {
    if (analyze->parsed()) return cmd_analyze(an);
    if (simulate->parsed()) return cmd_simulate(si);
    if (summary->parsed()) return crystal_summary(cr);
    if (curve->parsed()) return crystal_curve(cr);
    if (rings->parsed()) return crystal_rings(cr);
    if (rate->parsed()) return crystal_rate_ratio(cr);
    if (pvalue->parsed()) return cmd_pvalue(pv);
  } catch (const ghz::SchemaError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << "schema: " << d << '\n';
    return kSchema;
  } catch (const ghz::InsufficientDataError& e) {
    std::cerr << "insufficient data (" << e.setting() << "): " << e.what() << '\n';
    return kInsufficient;
  } catch (const ghz::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ghz::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
