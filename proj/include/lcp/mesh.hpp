#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace lcp::mesh {

enum class domain_kind { interval, rectangle };

/// Boundary side naming; an interval has left/right only.
enum class side { left, right, bottom, top };

/// Uniform tensor grid on (0,1) or (0,1)^2 with a trapezoidal quadrature and
/// the boundary split into the observation patch and its complement.
struct grid {
  domain_kind kind = domain_kind::interval;
  int n = 0;       // nodes per axis
  double h = 0.0;  // 1/(n-1)
  side gamma = side::right;
  std::size_t count = 0;

  std::vector<double> xs, ys;  // ys empty in 1d
  std::vector<std::uint8_t> is_boundary;
  std::vector<std::uint8_t> on_gamma;
  std::vector<double> quad;  // weights summing to |domain| = 1

  std::vector<std::size_t> interior_nodes;
  std::vector<std::size_t> boundary_nodes;
  std::vector<std::size_t> gamma_nodes;

  int dim() const { return kind == domain_kind::interval ? 1 : 2; }
  std::size_t id(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(i);
  }
  int ix(std::size_t node) const { return static_cast<int>(node % static_cast<std::size_t>(n)); }
  int iy(std::size_t node) const { return static_cast<int>(node / static_cast<std::size_t>(n)); }
};

/// gamma names the observed part of the boundary: one endpoint in 1d, one
/// side in 2d (corners of that side included).
grid build_mesh(domain_kind kind, int n, side gamma);

/// Divergence-form operator data sampled at grid nodes. a12/a22/b2 are unused
/// in 1d. mu0 is the uniform ellipticity lower bound of the matrix a.
struct elliptic_coeffs {
  std::vector<double> a11, a12, a22;
  std::vector<double> b1, b2;
  std::vector<double> a0;
  double mu0 = 1.0;
};

using scalar_fn = std::function<double(double, double)>;

elliptic_coeffs sample_coeffs(const grid& g, const scalar_fn& a11,
                              const scalar_fn& a12, const scalar_fn& a22,
                              const scalar_fn& b1, const scalar_fn& b2,
                              const scalar_fn& a0);

/// Identity a, zero b and a0, mu0 = 1.
elliptic_coeffs identity_coeffs(const grid& g);

/// Checks symmetry of a and that its smallest eigenvalue clears mu0 at every
/// node; throws std::invalid_argument on violation or shape mismatch.
void validate_coeffs(const elliptic_coeffs& c, const grid& g);

/// Flux-form discretization of div(a grad f) + b . grad f + a0 f at interior
/// nodes (a at half-nodes by averaging, wide centered cross terms); boundary
/// entries of the result are 0.
std::vector<double> apply_A(const std::vector<double>& f,
                            const elliptic_coeffs& c, const grid& g);

/// sum_{i,j} a_{ij} nu_j D_i f at the given boundary nodes, one-sided
/// second-order in the normal direction. nu is the outward normal of the
/// side `patch_side` (so corner values are deterministic).
std::vector<double> conormal_derivative(const std::vector<double>& f,
                                        const elliptic_coeffs& c, const grid& g,
                                        const std::vector<std::size_t>& patch,
                                        side patch_side);

double conormal_derivative(const std::vector<double>& f,
                           const elliptic_coeffs& c, const grid& g,
                           std::size_t node, side patch_side);

double integrate(const std::vector<double>& f, const grid& g);
double inner(const std::vector<double>& f, const std::vector<double>& g,
             const grid& m);
double norm_l2(const std::vector<double>& f, const grid& g);

/// Squared L2 norm of the centered gradient over interior nodes; fields that
/// vanish on the boundary keep discrete coercivity exact under this
/// convention.
double grad_norm_sq(const std::vector<double>& f, const grid& g);

/// Uniform time lattice 0 = t_0 < ... < t_nt = T.
struct time_grid {
  double T = 1.0;
  int nt = 1;
  double dt = 1.0;
  static time_grid make(double T, int nt);
  double node(int k) const { return T * static_cast<double>(k) / nt; }
};

/// Samples on (nt+1) time levels times a spatial grid, level-major.
struct space_time_field {
  int nt = 0;
  std::size_t nx = 0;
  std::vector<double> data;

  space_time_field() = default;
  space_time_field(int nt_, std::size_t nx_, double fill = 0.0)
      : nt(nt_), nx(nx_), data(static_cast<std::size_t>(nt_ + 1) * nx_, fill) {}

  double* level(int k) { return data.data() + static_cast<std::size_t>(k) * nx; }
  const double* level(int k) const {
    return data.data() + static_cast<std::size_t>(k) * nx;
  }
  double& at(int k, std::size_t i) { return data[static_cast<std::size_t>(k) * nx + i]; }
  double at(int k, std::size_t i) const {
    return data[static_cast<std::size_t>(k) * nx + i];
  }
};

space_time_field sample_field(const grid& g, const time_grid& tg,
                              const std::function<double(double, double, double)>& f);

/// Quadrature weights w_k with sum_k w_k f(t_k) equal to the integral of the
/// piecewise-linear interpolant of f over [t1,t2] (clipped to [0,T]); exact
/// window integration, zero weights for an empty window.
std::vector<double> window_weights(const time_grid& tg, double t1, double t2);

/// Plain trapezoid weights over [0,T].
std::vector<double> trapezoid_weights(const time_grid& tg);

/// Space-time integral over the full cylinder or a time window.
double integrate(const space_time_field& f, const grid& g, const time_grid& tg);
double integrate(const space_time_field& f, const grid& g, const time_grid& tg,
                 double t1, double t2);

/// Linear interpolation of a trajectory at off-grid time t.
std::vector<double> at_time(const space_time_field& f, const time_grid& tg,
                            double t);

}  // namespace lcp::mesh
