#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qc {

/// Fully serializable experiment configuration; a config plus the code
/// version determines every output byte.  Unknown JSON keys are rejected.
struct ExperimentConfig {
  std::string experiment;  // E1..E7
  uint64_t seed = 42;
  long walks = 0;        // 0: per-experiment default
  int depth = 0;         // lattice depth, 0: default
  std::string out_dir = ".";

  // thresholds; defaults are the recorded golden values
  double eps = 0.1;        // corona / packing flatness threshold
  double A = 8.0;          // HD/LD density factor
  double lambda = 0.02;    // carrot constant
  double theta = 0.25;     // John mass fraction
  double N = 2.0;          // window factor
  double Lambda = 8.0;     // WA(p, Λ)
  double Gamma = 100.0;    // WSBC chain constant
  double kappa = 0.05;     // corkscrew depth gauge
};

ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);

struct MetricRecord {
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
  std::string note;     // oracle reference or formula anchor
  bool checked = false; // participates in the pass/fail gate
  bool pass = true;
};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Report {
  std::string experiment;
  ExperimentConfig config;
  std::vector<MetricRecord> records;
  std::vector<Series> series;
  bool all_pass = true;

  void add(MetricRecord r) {
    all_pass = all_pass && (!r.checked || r.pass);
    records.push_back(std::move(r));
  }
};

/// Runs one of the named experiments E1..E7.
Report run_experiment(const ExperimentConfig& cfg);

const std::vector<std::string>& experiment_names();

/// Canonical JSON record (timestamps excluded; byte-identical re-runs).
std::string report_to_json(const Report& report);
Report report_from_json(const std::string& text);

/// Flattened metric table.
std::string report_to_csv(const Report& report);

/// Static plot of the report's series.
std::string report_to_svg(const Report& report);

}  // namespace qc
