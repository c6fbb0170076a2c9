#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lcp::mesh {
struct grid;
struct elliptic_coeffs;
}  // namespace lcp::mesh

namespace lcp::weights {

/// Pseudo-convex weight sampled on a closed spatial grid: positive inside,
/// nonvanishing gradient everywhere, nonpositive conormal derivative on the
/// unobserved part of the boundary.
struct pseudo_convex_fn {
  std::vector<double> values;
  std::vector<double> grad_x;
  std::vector<double> grad_y;  // empty in 1d
  double psi_max = 0.0;        // sup of psi over the closure
  double psi_min = 0.0;        // min of psi over the closure
};

struct weight_config {
  double lambda = 1.0;  // spatial intensity, >= 1
  double s0 = 1.0;      // large weight parameter, > 0
  double delta = 0.5;   // exponent in (0,1)
  double T = 1.0;       // time horizon
  pseudo_convex_fn psi;
};

/// l(t) = t(T-t). Throws std::domain_error outside [0,T].
double temporal_weight(double t, double T);

/// l'(t) = T - 2t.
double temporal_weight_dt(double t, double T);

double phi(double psi_x, double lambda);

/// (e^{lambda psi(x)} - e^{2 lambda psi_max}) / l(t), strictly negative.
/// Throws std::domain_error at t in {0,T} where l vanishes.
double alpha(double t, double psi_x, double psi_max, double lambda, double T);

/// exp[2 s alpha], in (0,1] on 0<t<T; exactly 0 at t in {0,T} by convention.
double carleman_factor(double t, double psi_x, double psi_max, double lambda,
                       double s, double T);

/// e^{2 lambda psi_max} - e^{lambda psi_min} > 0 for nonconstant psi.
double c1_lambda(double psi_min, double psi_max, double lambda);

/// min over [T1,T2] of l; the minimum of the concave l sits at an endpoint.
double m_inf(double T1, double T2, double T);

struct admissibility_report {
  bool interior_positive = false;
  bool gradient_nonzero = false;
  bool conormal_ok = false;
  bool pass = false;
  double min_interior_value = 0.0;
  double min_gradient_norm = 0.0;
  double max_off_gamma_conormal = 0.0;
  std::size_t worst_interior_node = 0;
  std::size_t worst_gradient_node = 0;
  std::size_t worst_conormal_node = 0;
  std::string summary() const;
};

admissibility_report check_psi_admissible(const pseudo_convex_fn& psi,
                                          const mesh::grid& g,
                                          const mesh::elliptic_coeffs& coeffs);

/// Canonical weight for a grid: the coordinate running toward the observed
/// side, so the conormal derivative vanishes on parallel sides and is
/// negative opposite the observation patch.
pseudo_convex_fn default_psi(const mesh::grid& g);

struct identity_report {
  bool bounds_hold = false;     // lower chain and upper bound at every point
  bool symmetric = false;       // l(T-t) = l(t)
  bool alpha_negative = false;
  bool endpoints_zero = false;  // carleman_factor at t in {0,T}
  bool pass = false;
  std::size_t points_checked = 0;
};

/// Samples the two-sided bound exp[-2 s c1/l] <= exp[2 s alpha] <= 1 on an
/// nt x (grid nodes) lattice; both sides route through one expression shape so
/// the comparison is exact in floating point.
identity_report check_weight_identities(const weight_config& cfg,
                                        const mesh::grid& g, int nt);

}  // namespace lcp::weights
