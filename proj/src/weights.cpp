#include "lcp/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "lcp/mesh.hpp"

namespace lcp::weights {

double temporal_weight(double t, double T) {
  if (!(T > 0.0) || t < 0.0 || t > T)
    throw std::domain_error("time outside [0,T]");
  return t * (T - t);
}

double temporal_weight_dt(double t, double T) {
  if (!(T > 0.0) || t < 0.0 || t > T)
    throw std::domain_error("time outside [0,T]");
  return T - 2.0 * t;
}

double phi(double psi_x, double lambda) { return std::exp(lambda * psi_x); }

double alpha(double t, double psi_x, double psi_max, double lambda, double T) {
  if (!(t > 0.0) || !(t < T))
    throw std::domain_error("temporal weight vanishes at t in {0,T}");
  const double num = std::exp(lambda * psi_x) - std::exp(2.0 * lambda * psi_max);
  return num / temporal_weight(t, T);
}

double carleman_factor(double t, double psi_x, double psi_max, double lambda,
                       double s, double T) {
  if (t < 0.0 || t > T) throw std::domain_error("time outside [0,T]");
  if (t == 0.0 || t == T) return 0.0;  // limit convention
  return std::exp(2.0 * s * alpha(t, psi_x, psi_max, lambda, T));
}

double c1_lambda(double psi_min, double psi_max, double lambda) {
  return std::exp(2.0 * lambda * psi_max) - std::exp(lambda * psi_min);
}

double m_inf(double T1, double T2, double T) {
  if (!(0.0 < T1) || !(T1 < T2) || !(T2 < T))
    throw std::domain_error("need 0 < T1 < T2 < T");
  return std::min(temporal_weight(T1, T), temporal_weight(T2, T));
}

std::string admissibility_report::summary() const {
  std::ostringstream os;
  os << (pass ? "admissible" : "not admissible")
     << " | interior positivity: " << (interior_positive ? "ok" : "FAIL")
     << " (min " << min_interior_value << " at node " << worst_interior_node
     << ") | gradient: " << (gradient_nonzero ? "ok" : "FAIL") << " (min |grad| "
     << min_gradient_norm << " at node " << worst_gradient_node
     << ") | conormal off the patch: " << (conormal_ok ? "ok" : "FAIL")
     << " (max " << max_off_gamma_conormal << " at node " << worst_conormal_node
     << ")";
  return os.str();
}

admissibility_report check_psi_admissible(const pseudo_convex_fn& psi,
                                          const mesh::grid& g,
                                          const mesh::elliptic_coeffs& coeffs) {
  if (psi.values.size() != g.count || psi.grad_x.size() != g.count ||
      (g.dim() == 2 && psi.grad_y.size() != g.count))
    throw std::invalid_argument("psi samples do not match the grid");

  admissibility_report rep;
  rep.min_interior_value = std::numeric_limits<double>::infinity();
  for (std::size_t p : g.interior_nodes) {
    if (psi.values[p] < rep.min_interior_value) {
      rep.min_interior_value = psi.values[p];
      rep.worst_interior_node = p;
    }
  }
  rep.interior_positive = rep.min_interior_value > 0.0;

  rep.min_gradient_norm = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.count; ++p) {
    const double gx = psi.grad_x[p];
    const double gy = g.dim() == 2 ? psi.grad_y[p] : 0.0;
    const double norm = std::sqrt(gx * gx + gy * gy);
    if (norm < rep.min_gradient_norm) {
      rep.min_gradient_norm = norm;
      rep.worst_gradient_node = p;
    }
  }
  rep.gradient_nonzero = rep.min_gradient_norm > 1e-12;

  rep.max_off_gamma_conormal = -std::numeric_limits<double>::infinity();
  const mesh::side sides[] = {mesh::side::left, mesh::side::right,
                              mesh::side::bottom, mesh::side::top};
  const int nsides = g.dim() == 1 ? 2 : 4;
  for (int si = 0; si < nsides; ++si) {
    std::vector<std::size_t> patch;
    for (std::size_t p : g.boundary_nodes) {
      if (g.on_gamma[p]) continue;
      const int i = g.ix(p), j = g.iy(p);
      const bool on_side = (sides[si] == mesh::side::left && i == 0) ||
                           (sides[si] == mesh::side::right && i == g.n - 1) ||
                           (sides[si] == mesh::side::bottom && j == 0) ||
                           (sides[si] == mesh::side::top && j == g.n - 1);
      if (on_side) patch.push_back(p);
    }
    if (patch.empty()) continue;
    const auto trace =
        mesh::conormal_derivative(psi.values, coeffs, g, patch, sides[si]);
    for (std::size_t q = 0; q < patch.size(); ++q) {
      if (trace[q] > rep.max_off_gamma_conormal) {
        rep.max_off_gamma_conormal = trace[q];
        rep.worst_conormal_node = patch[q];
      }
    }
  }
  if (!std::isfinite(rep.max_off_gamma_conormal)) rep.max_off_gamma_conormal = 0.0;
  rep.conormal_ok = rep.max_off_gamma_conormal <= 1e-12;

  rep.pass = rep.interior_positive && rep.gradient_nonzero && rep.conormal_ok;
  return rep;
}

pseudo_convex_fn default_psi(const mesh::grid& g) {
  pseudo_convex_fn psi;
  psi.values.resize(g.count);
  psi.grad_x.assign(g.count, 0.0);
  if (g.dim() == 2) psi.grad_y.assign(g.count, 0.0);

  for (std::size_t p = 0; p < g.count; ++p) {
    switch (g.gamma) {
      case mesh::side::left:
        psi.values[p] = 1.0 - g.xs[p];
        psi.grad_x[p] = -1.0;
        break;
      case mesh::side::right:
        psi.values[p] = g.xs[p];
        psi.grad_x[p] = 1.0;
        break;
      case mesh::side::bottom:
        psi.values[p] = 1.0 - g.ys[p];
        psi.grad_y[p] = -1.0;
        break;
      case mesh::side::top:
        psi.values[p] = g.ys[p];
        psi.grad_y[p] = 1.0;
        break;
    }
  }
  psi.psi_min = std::numeric_limits<double>::infinity();
  psi.psi_max = -std::numeric_limits<double>::infinity();
  for (double v : psi.values) {
    psi.psi_min = std::min(psi.psi_min, v);
    psi.psi_max = std::max(psi.psi_max, v);
  }
  return psi;
}

identity_report check_weight_identities(const weight_config& cfg,
                                        const mesh::grid& g, int nt) {
  if (cfg.psi.values.size() != g.count)
    throw std::invalid_argument("psi samples do not match the grid");
  identity_report rep;
  rep.bounds_hold = true;
  rep.symmetric = true;
  rep.alpha_negative = true;

  const double e2 = std::exp(2.0 * cfg.lambda * cfg.psi.psi_max);
  const double em = std::exp(cfg.lambda * cfg.psi.psi_min);
  const auto tg = mesh::time_grid::make(cfg.T, nt);

  for (int k = 1; k < nt; ++k) {
    const double t = tg.node(k);
    const double lt = temporal_weight(t, cfg.T);
    // Shared expression shape keeps the chain monotone in floating point.
    const double lower = std::exp(2.0 * cfg.s0 * ((em - e2) / lt));
    for (std::size_t p = 0; p < g.count; ++p) {
      const double el = std::exp(cfg.lambda * cfg.psi.values[p]);
      const double a = (el - e2) / lt;
      const double value = std::exp(2.0 * cfg.s0 * a);
      if (!(lower <= value) || !(value <= 1.0)) rep.bounds_hold = false;
      if (!(a < 0.0)) rep.alpha_negative = false;
      ++rep.points_checked;
    }
    const double mirrored = temporal_weight(tg.node(nt - k), cfg.T);
    if (std::abs(lt - mirrored) > 1e-14 * std::max(1.0, lt))
      rep.symmetric = false;
  }

  const double at0 = carleman_factor(0.0, cfg.psi.psi_max, cfg.psi.psi_max,
                                     cfg.lambda, cfg.s0, cfg.T);
  const double atT = carleman_factor(cfg.T, cfg.psi.psi_max, cfg.psi.psi_max,
                                     cfg.lambda, cfg.s0, cfg.T);
  rep.endpoints_zero = at0 == 0.0 && atT == 0.0;

  rep.pass = rep.bounds_hold && rep.symmetric && rep.alpha_negative &&
             rep.endpoints_zero;
  return rep;
}

}  // namespace lcp::weights
