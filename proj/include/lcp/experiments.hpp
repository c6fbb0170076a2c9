#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lcp/estimates.hpp"
#include "lcp/io.hpp"
#include "lcp/scenario.hpp"

namespace lcp::experiments {

struct experiment_output {
  std::string name;
  io::csv_table table;
  std::vector<estimates::estimate_report> reports;
  double wall_ms = 0.0;
};

struct run_output {
  /// Hypothesis checks that gate every run: weight admissibility and the
  /// two-sided weight identities. A failed gate skips the experiment list.
  std::vector<estimates::estimate_report> preflight;
  std::vector<experiment_output> experiments;
  bool ran_experiments = false;
  bool pass = false;  // no emitted report row failed
};

/// Identity columns every cell of this experiment emits, so sweeps over
/// empty value lists still know the header.
std::vector<std::string> table_header(scenario::experiment_kind k);

/// Builds the scenario, runs the gates, then the selected experiments.
/// jobs caps worker threads inside batched experiments (0 = default).
run_output run_scenario(const scenario::scenario_config& c, int jobs = 0);

/// Human summary: one pass/fail line per evaluated inequality.
std::string report_text(const scenario::scenario_config& c,
                        const run_output& out);

/// report.txt, one <experiment>.csv per executed experiment, and
/// manifest.json (config hash, library version, wall times) under dir.
void write_artifacts(const std::filesystem::path& dir,
                     const scenario::scenario_config& c,
                     const run_output& out);

}  // namespace lcp::experiments
