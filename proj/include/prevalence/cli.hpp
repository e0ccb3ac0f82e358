#pragma once

// Ingestion, configuration and report emission behind the command-line tool.

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prevalence/analysis.hpp"
#include "prevalence/sim.hpp"
#include "prevalence/validate.hpp"

namespace prevalence {

inline constexpr const char* kReportSchemaVersion = "1.0.0";

/// Bad input files or configuration. The tool exits with status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<std::string> ids;
  Assignment treatment;
  OutcomeVector outcome;
  bool has_stratum = false;
  bool has_cluster = false;
  std::vector<std::string> stratum;  // per unit, empty unless has_stratum
  std::vector<std::string> cluster;  // per unit, empty unless has_cluster
  std::vector<std::pair<std::string, std::string>> edge_ids;  // as read
  std::vector<Edge> edges;                                    // dense indices

  int size() const { return static_cast<int>(ids.size()); }
  int index_of(const std::string& id) const;
};

/// Units CSV: header with id, treatment, outcome and optionally stratum,
/// cluster. Edges CSV: header with src, dst. Throws InputError naming the
/// file and line on malformed rows, non-binary values, duplicate ids,
/// unknown ids and self-edges.
Dataset read_dataset(const std::string& units_path, const std::string& edges_path);
Dataset parse_dataset(std::istream& units, std::istream& edges, const std::string& units_name = "units",
                      const std::string& edges_name = "edges");
void write_dataset(const Dataset& data, std::ostream& units, std::ostream& edges);

struct DesignConfig {
  std::string kind = "complete";  // complete | stratified | cluster
  // Treated units (or clusters) per stratum; inferred from the data when empty.
  std::optional<int> treated;                             // complete
  std::vector<std::pair<std::string, int>> treated_per_stratum;  // stratified, cluster
};

struct ExposureConfig {
  std::string mode = "count";  // count | fraction
  double threshold = 1.0;
  int w_empty = 0;
};

struct RunConfig {
  DesignConfig design;
  ExposureConfig exposure;
  AnalysisConfig analysis;
  double rho = 0.1;
  std::uint64_t seed = 0;
  SimConfig simulation;
  ValidationConfig validation;
  unsigned threads = 1;  // never written to reports
};

/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig read_config(const std::string& path);

/// Seed and thread overrides are applied to every sub-configuration.
void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed, std::optional<unsigned> threads,
                     const std::vector<double>& alphas);

/// Every setting, defaults included.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

struct Problem {
  Design design;
  AdjacencyGraph graph;
  ExposureSpec spec;
  std::vector<std::string> stratum_names;
};

/// Builds and validates the design, graph and exposure spec. Throws
/// InputError when treatments disagree within a cluster or do not match the
/// configured treated counts.
Problem build_problem(const Dataset& data, const RunConfig& cfg);

nlohmann::ordered_json estimate_report(const Dataset& data, const RunConfig& cfg);

/// Columns: unit_id, p_w1_x0, p_w1_x1, method, replications, std_error.
void write_propensity_csv(const Dataset& data, const PropensityTable& table, std::ostream& out);
void write_q_csv(const Dataset& data, const QMatrix& q, std::ostream& out);

nlohmann::ordered_json simulate_report(const RunConfig& cfg);
/// Flat summary table of a simulate report.
void write_simulation_csv(const nlohmann::ordered_json& report, std::ostream& out);

nlohmann::ordered_json validation_report(const RunConfig& cfg, const std::vector<ValidationCheck>& checks);

}  // namespace prevalence
