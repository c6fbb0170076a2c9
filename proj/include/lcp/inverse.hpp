#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lcp/estimates.hpp"
#include "lcp/forward.hpp"
#include "lcp/mesh.hpp"

namespace lcp::inverse {

/// Cubic smoothstep ramp on [eps T, 2 eps T], sampled on nt+1 uniform levels.
estimates::cutoff_profile cutoff(double eps, double T, int nt);

/// Sharp comparison bound for profiles z with
///   z(tau) <= a + int_0^tau b z + int_0^tau kk sqrt(z):
/// tau -> exp(B(tau)) * (sqrt(a) + 1/2 int_0^tau kk(s) exp(-B(s)/2) ds)^2,
/// B the running integral of b. All integrals are trapezoidal prefix sums on
/// the grid of tg; a and every entry of b, kk must be nonnegative.
std::vector<double> bihari_bound(double a, const std::vector<double>& b,
                                 const std::vector<double>& kk,
                                 const mesh::time_grid& tg);

/// Checks the comparison hypothesis at every grid time and, where it holds,
/// that z stays below bihari_bound pointwise. A profile that violates the
/// hypothesis is reported as inapplicable in the note (the bound asserts
/// nothing there), never as a failed bound.
estimates::estimate_report verify_bihari(const std::vector<double>& z, double a,
                                         const std::vector<double>& b,
                                         const std::vector<double>& kk,
                                         const mesh::time_grid& tg);

/// Profiles feeding verify_bihari for a cut-off trajectory energy:
/// z(tau) = |sigma v(tau)|^2 + mu0 int_0^tau |grad(sigma v)|^2 with v the
/// homogeneous part of u, a = J5 |f~|^2, b the absorption profile of the
/// bundle, and kk(t) the interior-window L2 norm of the reduced source.
struct energy_profile {
  std::vector<double> z;
  std::vector<double> b;
  std::vector<double> kk;
  double a = 0.0;
};

energy_profile make_energy_profile(const mesh::space_time_field& u,
                                   const forward::problem_data& p,
                                   const estimates::dependence_bundle& bundle);

struct completion_options {
  double cg_tolerance = 1e-10;
  int max_iterations = 500;
  /// relative normal-equation residual above which a non-converged run is
  /// flagged as partial
  double stagnation_threshold = 1e-6;
  double forward_tolerance = 1e-12;
  int memory_max_iterations = 50;
  int jobs = 0;  // worker threads for batched experiments; 0 picks a default
};

/// Weighted linear map from the symmetrized interior initial state to the
/// conormal trace samples of the source-free evolution, together with its
/// exact discrete transpose (transposed step matrix swept backwards, memory
/// coupling transposed term by term). The unknown is z = sqrt(q) u0 on the
/// interior nodes and trace samples carry sqrt(time x edge quadrature), so
/// plain dot products realize the L2 pairings.
class trace_operator {
 public:
  trace_operator(const forward::problem_data& p,
                 const completion_options& opts = {});
  ~trace_operator();
  trace_operator(const trace_operator&) = delete;
  trace_operator& operator=(const trace_operator&) = delete;

  std::size_t unknowns() const;
  std::size_t samples() const;

  std::vector<double> apply(const std::vector<double>& state) const;
  std::vector<double> apply_transpose(const std::vector<double>& weighted) const;

  /// Flattens a conormal trace field into the weighted sample vector.
  std::vector<double> weighted(const mesh::space_time_field& trace) const;

  /// Symmetrized unknown back to a nodal initial field, zero on the boundary.
  std::vector<double> expand(const std::vector<double>& state) const;

 private:
  struct impl;
  std::unique_ptr<impl> impl_;
};

struct completion_result {
  mesh::space_time_field u;
  std::vector<double> initial_state;
  /// regularized least-squares value per conjugate-gradient iterate,
  /// starting from the zero initial state
  std::vector<double> misfit_history;
  double beta = 0.0;
  /// final weighted trace misfit relative to the observation norm
  double gamma_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool partial = false;
};

/// Recovers the initial state from Dirichlet data plus an observed conormal
/// trace by conjugate gradients on the Tikhonov normal equations
/// (L^T L + beta I) z = L^T (obs - trace of the zero-state solution),
/// matrix-free: each product costs one trajectory solve or one adjoint sweep.
completion_result complete_lateral_cauchy(const forward::problem_data& p,
                                          const mesh::space_time_field& observed,
                                          double beta,
                                          const completion_options& opts = {});

/// Same with beta = 1e-6 times the squared weighted observation norm.
completion_result complete_lateral_cauchy(const forward::problem_data& p,
                                          const mesh::space_time_field& observed,
                                          const completion_options& opts = {});

struct dependence_row {
  double eps = 0.0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  double beta = 0.0;
  double error_e = 0.0;
  double data_d2 = 0.0;
  double wall_ms = 0.0;
};

struct dependence_table {
  std::string scenario;
  std::vector<dependence_row> rows;
  /// least-squares slope of log E against log D^2 over the noisy rows
  double slope = 0.0;
  /// max E / D^2 over the noisy rows
  double c_eps = 0.0;
  /// E of the noiseless row, the reconstruction floor
  double floor_e = 0.0;
};

/// For each noise level and seed, perturbs source and Dirichlet data by
/// smooth low-mode random fields of relative size eta (unit fields depend on
/// the seed only, so errors scale exactly with eta per seed), reconstructs
/// against the unperturbed observation, and records
///   E = |u_rec(T) - u(T)|^2 + 2 mu0 int_{2 eps T}^T |grad(u_rec - u)|^2,
///   D^2 = |df0|^2 + |dg|^2 + |D_t dg|^2 + |A dg|^2.
/// A noiseless baseline row (eta = 0) is always included and excluded from
/// the slope and max-ratio fits. Cells run concurrently; beta < 0 delegates
/// to the default policy of complete_lateral_cauchy.
dependence_table dependence_experiment(const forward::problem_data& p,
                                       const mesh::space_time_field& truth,
                                       const std::vector<double>& noise_levels,
                                       double eps,
                                       const std::vector<std::uint64_t>& seeds,
                                       double beta = -1.0,
                                       const completion_options& opts = {});

}  // namespace lcp::inverse
