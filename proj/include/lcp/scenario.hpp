#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcp/forward.hpp"
#include "lcp/mesh.hpp"
#include "lcp/weights.hpp"

namespace lcp::scenario {

/// Raised for unreadable, malformed, or inconsistent configuration; the
/// message names the offending key and, when it came from a file, its line.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class experiment_kind {
  forward_mms,
  carleman,
  trace,
  terms,
  bihari,
  complete,
  dependence,
};

/// Everything one laboratory run is allowed to depend on. Populated from a
/// flat `key = value` text file with `#` comments; dotted keys group the
/// sections. Unknown keys are rejected so typos cannot silently fall back
/// to defaults.
struct scenario_config {
  std::string name = "scenario";
  std::string domain = "interval";  // interval | rectangle
  int n = 51;
  int nt = 100;
  std::string gamma = "right";  // left | right | bottom | top

  double T = 1.0;
  double T1 = 0.25;
  double T2 = 0.5;

  std::string coeff_preset = "identity";  // identity | variable

  std::string kernel_preset = "zero";
  // zero | separable-gaussian | hypothesis-saturating | file
  double kernel_amplitude = 0.05;
  double kernel_sigma = 0.2;
  double kernel_up = 1.0;
  double kernel_down = 1.0;
  double kernel_gamma = 1.5;
  std::string kernel_path;                 // dense array file for preset=file
  std::string multiplier_preset = "zero";  // zero | smooth-small

  std::string psi_preset = "default";  // default | constant
  double lambda = 1.0;
  double s0 = 4.0;
  double delta = 0.5;
  double C1 = 0.0;  // 0 = calibrate empirically

  std::string source_preset = "mms";   // mms | zero
  std::string initial_preset = "sine";  // sine | zero

  std::vector<experiment_kind> experiments;  // from `experiment = ...`

  double eps = 0.1;
  std::vector<double> noise_levels = {1e-3, 1e-2};
  std::vector<std::uint64_t> seeds = {11, 22, 33};
  double beta = -1.0;  // negative = data-scaled default
  std::vector<double> s_values;  // carleman calibration grid; empty = auto
  std::uint64_t seed = 1;

  std::string out_dir;  // empty = out/<name> under the working directory

  /// Raw config text the instance was parsed from; hashed into manifests.
  std::string source_text;
};

scenario_config parse_scenario(const std::string& text);
scenario_config load_scenario(const std::filesystem::path& path);

/// Name of one experiment selector value, e.g. "forward-mms".
std::string kind_name(experiment_kind k);

/// Overrides one numeric key (the sweep axes: mesh.n, mesh.nt, weights.s0,
/// weights.lambda, weights.delta, weights.C1, kernel.amplitude, kernel.sigma,
/// kernel.gamma, times.T1, times.T2, eps, eta, beta, seed). Throws
/// config_error for anything else.
void apply_numeric(scenario_config& c, const std::string& key, double value);

struct scenario_setup {
  forward::problem_data p;
  weights::weight_config cfg;
  std::vector<double> u0;
  mesh::space_time_field u_star;  // analytic samples; empty when source=zero
  bool has_u_star = false;
};

/// Instantiates mesh, coefficients, kernels, weights, and data from the
/// configuration. Throws config_error for violated invariants and passes
/// through validation errors from the building blocks.
scenario_setup build_scenario(const scenario_config& c);

}  // namespace lcp::scenario
