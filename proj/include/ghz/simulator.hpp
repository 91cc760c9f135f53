#pragma once

// Pulsed multi-source SPDC experiment with PBS fusion.
//
// Per pulse every source emits 0, 1 or 2 pairs with probabilities
// 1 - P1 - P2, P1 = p and P2 = g p^2 / 2 (g = 2 for thermal statistics).
// Each photon is collected with its arm efficiency xi. PBS links route V
// photons across to the partner path and leave H photons in place; links are
// applied in order. Every path ends in an analyzer and two binary detectors,
// and an n-fold event requires exactly one click per path.
//
// Events in which every source emitted exactly one pair, all photons were
// detected and the fusion succeeded are sampled from
//   C P_pure + (1 - C) P_dephased,  C = prod over links of the mode overlap,
// where P_pure comes from the post-selected state and P_dephased from the same
// state with its coherences removed. All other events are treated as
// incoherent mixtures of H/V branches; in an M_k setting such photons give
// either analyzer port with probability 1/2.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ghz/qstate.hpp"
#include "ghz/witness.hpp"

namespace ghz::sim {

struct SourceModel {
  int mode_a = 0;  // idler path
  int mode_b = 0;  // signal path, enters the fusion network
  double pair_prob = 0.0;
  double double_pair_factor = 2.0;
  double xi_signal = 1.0;
  double xi_idler = 1.0;
  double theta_state = 0.7853981633974483;
  bool rotated = false;

  double p1() const { return pair_prob; }
  double p2() const { return 0.5 * double_pair_factor * pair_prob * pair_prob; }
  void validate() const;
};

struct InterferenceModel {
  std::vector<double> mode_overlap;  // one per PBS link

  double coherence() const;
};

struct DetectorModel {
  double dark_count_prob = 0.0;  // per detector per pulse
};

struct ExperimentConfig {
  std::vector<SourceModel> sources;
  std::vector<std::pair<int, int>> pbs_links;
  InterferenceModel interference;
  double rep_rate = 76e6;
  DetectorModel detector;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> provenance;

  qstate::FusionNetwork network() const;
  std::vector<int> modes() const;
  void validate() const;

  // Five sources on the fusion layout with unit efficiencies and overlaps.
  static ExperimentConfig ideal(double theta = 0.7853981633974483, bool rotate_last_two = false,
                                double pair_prob = 1.0);
};

struct RateReport {
  std::vector<double> twofold_per_s;          // expected, per source
  double tenfold_expected_per_hour = 0;       // class-A events, from the model
  double tenfold_formula_per_hour = 0;        // rep prod(R_T xi_s xi_i / rep) / 16
  double tenfold_simulated_per_hour = 0;      // mean over simulated settings
  double pulses_per_setting = 0;
};

struct SimResult {
  witness::CountDataset counts;
  RateReport rates;
  std::map<std::string, double> visibility;  // "Z": population fraction, "M<k>": |E_k|
  double signal_to_noise = 0;                // Z basis, +inf if no noise counts
  std::map<std::string, std::uint64_t> registered;  // n-fold events per setting
  std::uint64_t pulses = 0;
};

qstate::PureState ideal_output_state(const ExperimentConfig& config);

struct TenfoldRate {
  double per_hour = 0;
  double pair_prob = 0;
  bool regime_warning = false;  // p >= 0.1
};
// rep (p xi^2)^5 / 16 * 3600 with p = R_T / rep.
TenfoldRate tenfold_rate(double r_t, double xi, double rep_rate);

double hom_visibility(double overlap);
double overlap_for_visibility(double visibility);

// rep * sum_n P_n (1 - (1 - xi_s)^n)(1 - (1 - xi_i)^n)
double expected_twofold_rate(const SourceModel& s, double rep_rate);
// P1 + 2 P2, the mean pair number per pulse.
double mean_pairs(const SourceModel& s);
// rep * prod_s P1 xi_s xi_i * fusion success probability, per hour.
double expected_tenfold_rate(const ExperimentConfig& config);
// Rate formula generalized per source: rep prod_s (mean_pairs xi_s xi_i) / 16, per hour.
double formula_tenfold_rate(const ExperimentConfig& config);

// Settings named "Z", "M0" .. "M<n-1>".
std::vector<witness::Setting> full_setting_list(int n);

struct RunOptions {
  std::uint64_t batch_pulses = 1u << 22;
  unsigned threads = 0;  // 0: hardware concurrency
};

SimResult run_monte_carlo(const ExperimentConfig& config, std::uint64_t pulses,
                          const std::vector<witness::Setting>& settings, const RunOptions& opt = {});

inline constexpr double kReferenceHomVisibility = 0.715;
inline constexpr double kReferenceRepRate = 76e6;

ExperimentConfig calibrate_to_paper();

}  // namespace ghz::sim
