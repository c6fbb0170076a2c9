#pragma once

#include <Eigen/SparseCore>

#include <stdexcept>
#include <vector>

#include "lcp/mesh.hpp"
#include "lcp/nonlocal.hpp"

namespace lcp::forward {

/// Everything that defines one evolution problem: geometry, elliptic part,
/// memory operator data, source, and Dirichlet data sampled on the closed
/// mesh.
struct problem_data {
  mesh::grid grid;
  mesh::elliptic_coeffs coeffs;
  nonlocal::kernel_set kernels;
  mesh::space_time_field f0;
  mesh::space_time_field dirichlet;
  mesh::time_grid tg;
};

/// Throws invalid_argument on shape mismatches or invalid kernel data.
void validate_problem(const problem_data& p);

struct picard_stats {
  int iterations = 0;
  bool converged = false;
  bool initial_boundary_mismatch = false;
  std::vector<double> residuals;  // successive trajectory distances, relative
};

struct solve_result {
  mesh::space_time_field u;
  picard_stats stats;
};

struct solve_options {
  double tolerance = 1e-10;  // relative trajectory distance in L2(Q_T)
  int max_iterations = 50;
};

/// Carries the residual history of a diverged trajectory iteration.
class picard_failure : public std::runtime_error {
 public:
  picard_failure(const std::string& what, std::vector<double> hist)
      : std::runtime_error(what), history(std::move(hist)) {}
  std::vector<double> history;
};

/// One-step system matrix I - dt*A with identity rows at the boundary nodes;
/// exactly the matrix the trajectory march factorizes, exposed so adjoint
/// sweeps can factorize its transpose against the same discretization.
Eigen::SparseMatrix<double> step_matrix(const mesh::grid& g,
                                        const mesh::elliptic_coeffs& c,
                                        double dt);

/// Implicit Euler march of D_t u - A u = (memory terms) + f0 with strong
/// Dirichlet values; the memory operator reads the whole trajectory, so the
/// march is wrapped in a fixed-point iteration over trajectories. The sparse
/// factorization of the step matrix is built once and reused everywhere.
solve_result solve_ivp(const problem_data& p, const std::vector<double>& u0,
                       const solve_options& opts = {});

/// Source that makes u_star an exact discrete solution: D_t u* - A u* - B u*,
/// with the time derivative centered inside and one-sided at the ends.
mesh::space_time_field manufacture(const problem_data& p,
                                   const mesh::space_time_field& u_star);

struct homogeneous_reduction {
  mesh::space_time_field v;        // u minus the boundary extension
  mesh::space_time_field f_tilde;  // f0 - D_t g + A g + (memory of g)
};

homogeneous_reduction reduce_homogeneous(const mesh::space_time_field& u,
                                         const problem_data& p);

/// The reflected problem: data negated and read backwards, memory window
/// mirrored, trace multipliers swapped with sign flips so that reflecting a
/// solution of the backward-parabolic variant solves the returned problem.
/// Applying it twice reproduces the original problem exactly on the lattice.
problem_data time_reverse(const problem_data& p);

struct lateral_data {
  mesh::space_time_field dirichlet;  // u on the boundary nodes, zero inside
  mesh::space_time_field conormal;   // nx = number of observed-side nodes
};

/// Restriction of a trajectory to the boundary plus its conormal derivative
/// on the observed side at every time level.
lateral_data extract_lateral_data(const mesh::space_time_field& u,
                                  const problem_data& p);

/// A-priori contraction factor of the trajectory iteration: horizon times the
/// summed operator bounds of the five memory terms (the spatial part through
/// sqrt(K3*K6) and the temporal weight power over interior levels).
double picard_apriori_factor(const problem_data& p,
                             const nonlocal::hypothesis_report& consts);

/// Discrete L2(Q_T) norm of a trajectory (trapezoid in time, mesh quadrature
/// in space).
double trajectory_norm(const mesh::space_time_field& u, const mesh::grid& g,
                       const mesh::time_grid& tg);

/// Centered time derivative of a sampled trajectory, one-sided second order
/// at the first and last levels.
mesh::space_time_field time_derivative(const mesh::space_time_field& u,
                                       const mesh::time_grid& tg);

}  // namespace lcp::forward
