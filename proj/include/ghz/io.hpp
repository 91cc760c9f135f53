#pragma once

// Versioned JSON files: count datasets, trial ledgers, experiment configs,
// rate inputs, and run reports. Readers collect every problem they find and
// throw SchemaError with one diagnostic per problem, each prefixed by the JSON
// pointer of the offending value.

#include <filesystem>
#include <string>
#include <utility>

#include <json.hpp>

#include "ghz/crystal.hpp"
#include "ghz/hyptest.hpp"
#include "ghz/simulator.hpp"
#include "ghz/witness.hpp"

namespace ghz::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Provenance { experimental, simulated, reconstructed };
std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

struct CountFile {
  witness::CountDataset data;
  Provenance provenance = Provenance::experimental;
  std::string notes;
};

json to_json(const CountFile& f);
CountFile count_file_from_json(const json& j);

json to_json(const hyptest::TrialLedger& l);
hyptest::TrialLedger ledger_from_json(const json& j);

json to_json(const sim::ExperimentConfig& c);
sim::ExperimentConfig config_from_json(const json& j);

struct RatePair {
  crystal::RateInputs a;
  crystal::RateInputs b;
  std::string label_a, label_b;
  double target = 0;  // reference ratio, 0 if none
};
RatePair rate_pair_from_json(const json& j);

// Parse a file; syntax errors become SchemaError with line/column.
json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
// Pretty-printed with sorted keys and a trailing newline.
std::string dump(const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

// Replaces non-finite numbers by null.
json number(double v);

std::string sha256_hex(const std::string& bytes);
std::string utc_timestamp();
std::string tool_version();

struct RunReport {
  std::string inputs_digest;
  std::string tool_version;
  std::string timestamp;
  std::string provenance;
  witness::FidelityEstimate fidelity;
  witness::Verdict verdict;
  hyptest::PValueBound pvalue;
  witness::PopulationStats population;
  std::vector<std::pair<std::string, double>> correlations;  // per M_k
};

json to_json(const RunReport& r);

}  // namespace ghz::io
