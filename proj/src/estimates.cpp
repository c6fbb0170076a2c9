#include "lcp/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lcp::estimates {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void check_vanishing_boundary(const mesh::space_time_field& v,
                              const mesh::grid& g) {
  double scale = 0.0;
  for (double x : v.data) scale = std::max(scale, std::abs(x));
  const double tol = 1e-12 * (1.0 + scale);
  for (int k = 0; k <= v.nt; ++k)
    for (std::size_t b : g.boundary_nodes)
      if (std::abs(v.at(k, b)) > tol)
        throw std::invalid_argument(
            "trajectory must vanish on the spatial boundary");
}

double sq_l2_qt(const mesh::space_time_field& f, const mesh::grid& g,
                const mesh::time_grid& tg) {
  const auto tw = mesh::trapezoid_weights(tg);
  double s = 0.0;
  for (int k = 0; k <= tg.nt; ++k) {
    const double* lv = f.level(k);
    double sp = 0.0;
    for (std::size_t q = 0; q < g.count; ++q) sp += g.quad[q] * lv[q] * lv[q];
    s += tw[k] * sp;
  }
  return s;
}

}  // namespace

void finalize(estimate_report& r) {
  r.margin = r.rhs - r.lhs;
  r.tolerance = 1e-8 * (std::abs(r.lhs) + std::abs(r.rhs)) + 0.05 * std::abs(r.rhs);
  r.pass = r.margin >= -r.tolerance;
}

weight_context make_weight_context(const weights::weight_config& cfg,
                                   const mesh::grid& g,
                                   const mesh::time_grid& tg, double s) {
  require(cfg.psi.values.size() == g.count, "weight profile shape mismatch");
  weight_context ctx;
  ctx.s = s;
  ctx.lambda = cfg.lambda;
  ctx.psi_sup = std::max(std::abs(cfg.psi.psi_min), std::abs(cfg.psi.psi_max));
  ctx.c1 = weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max, cfg.lambda);
  ctx.lvals.resize(static_cast<std::size_t>(tg.nt) + 1);
  double l_max = 0.0;
  for (int k = 0; k <= tg.nt; ++k) {
    ctx.lvals[static_cast<std::size_t>(k)] =
        weights::temporal_weight(tg.node(k), tg.T);
    if (k > 0 && k < tg.nt)
      l_max = std::max(l_max, ctx.lvals[static_cast<std::size_t>(k)]);
  }
  // alpha is monotone in both psi and l, so its lattice peak is closed-form
  const double e_top = std::exp(2.0 * cfg.lambda * cfg.psi.psi_max);
  ctx.alpha_peak =
      (std::exp(cfg.lambda * cfg.psi.psi_max) - e_top) / l_max;
  ctx.phi.resize(g.count);
  for (std::size_t q = 0; q < g.count; ++q)
    ctx.phi[q] = std::exp(cfg.lambda * cfg.psi.values[q]);
  ctx.w = mesh::space_time_field(tg.nt, g.count);
  for (int k = 1; k < tg.nt; ++k) {
    const double l = ctx.lvals[static_cast<std::size_t>(k)];
    double* lvl = ctx.w.level(k);
    for (std::size_t q = 0; q < g.count; ++q) {
      const double a = (ctx.phi[q] - e_top) / l;
      lvl[q] = std::exp(2.0 * s * (a - ctx.alpha_peak));
    }
  }
  return ctx;
}

std::vector<double> hessian_entry(const std::vector<double>& f,
                                  const mesh::grid& g, int i, int j) {
  require(f.size() == g.count, "field shape mismatch");
  require(g.n >= 6, "grid too coarse for one-sided curvature stencils");
  require(i >= 0 && i < g.dim() && j >= 0 && j < g.dim(),
          "direction index out of range");
  const double h2 = g.h * g.h;
  const double inv2h = 1.0 / (2.0 * g.h);
  std::vector<double> out(g.count, 0.0);
  const int n = g.n;

  // pure second difference along a line: centered where the stencil stays
  // strictly inside, one-sided second order on the first and last interior
  // index, zero at the ends
  auto pure = [&](std::size_t p, std::size_t stride, int idx) -> double {
    if (idx == 0 || idx == n - 1) return 0.0;
    if (idx >= 2 && idx <= n - 3)
      return (f[p - stride] - 2.0 * f[p] + f[p + stride]) / h2;
    if (idx == 1)
      return (2.0 * f[p] - 5.0 * f[p + stride] + 4.0 * f[p + 2 * stride] -
              f[p + 3 * stride]) /
             h2;
    return (2.0 * f[p] - 5.0 * f[p - stride] + 4.0 * f[p - 2 * stride] -
            f[p - 3 * stride]) /
           h2;
  };

  if (g.dim() == 1) {
    for (std::size_t p : g.interior_nodes)
      out[p] = pure(p, 1, static_cast<int>(p));
    return out;
  }

  const std::size_t sy = static_cast<std::size_t>(n);
  if (i == j) {
    const std::size_t stride = (i == 0) ? 1 : sy;
    for (std::size_t p : g.interior_nodes) {
      const int idx = (i == 0) ? g.ix(p) : g.iy(p);
      out[p] = pure(p, stride, idx);
    }
    return out;
  }

  // mixed entry as the composition of two first derivatives, each centered
  // inside and one-sided second order at the line ends
  auto first = [&](const std::vector<double>& u, std::size_t p,
                   std::size_t stride, int idx) -> double {
    if (idx >= 1 && idx <= n - 2)
      return (u[p + stride] - u[p - stride]) * inv2h;
    if (idx == 0)
      return (-3.0 * u[p] + 4.0 * u[p + stride] - u[p + 2 * stride]) * inv2h;
    return (3.0 * u[p] - 4.0 * u[p - stride] + u[p - 2 * stride]) * inv2h;
  };

  std::vector<double> dy(g.count, 0.0);
  for (std::size_t p = 0; p < g.count; ++p) dy[p] = first(f, p, sy, g.iy(p));
  for (std::size_t p : g.interior_nodes) out[p] = first(dy, p, 1, g.ix(p));
  return out;
}

std::vector<double> hessian_sq_sum(const std::vector<double>& f,
                                   const mesh::grid& g) {
  std::vector<double> out(g.count, 0.0);
  if (g.dim() == 1) {
    const auto dxx = hessian_entry(f, g, 0, 0);
    for (std::size_t p = 0; p < g.count; ++p) out[p] = dxx[p] * dxx[p];
    return out;
  }
  const auto dxx = hessian_entry(f, g, 0, 0);
  const auto dyy = hessian_entry(f, g, 1, 1);
  const auto dxy = hessian_entry(f, g, 0, 1);
  for (std::size_t p = 0; p < g.count; ++p)
    out[p] = dxx[p] * dxx[p] + dyy[p] * dyy[p] + 2.0 * dxy[p] * dxy[p];
  return out;
}

std::vector<double> grad_sq_field(const std::vector<double>& f,
                                  const mesh::grid& g) {
  require(f.size() == g.count, "field shape mismatch");
  const double inv2h = 1.0 / (2.0 * g.h);
  std::vector<double> out(g.count, 0.0);
  if (g.dim() == 1) {
    for (std::size_t p : g.interior_nodes) {
      const double d = (f[p + 1] - f[p - 1]) * inv2h;
      out[p] = d * d;
    }
    return out;
  }
  const std::size_t sy = static_cast<std::size_t>(g.n);
  for (std::size_t p : g.interior_nodes) {
    const double dx = (f[p + 1] - f[p - 1]) * inv2h;
    const double dyv = (f[p + sy] - f[p - sy]) * inv2h;
    out[p] = dx * dx + dyv * dyv;
  }
  return out;
}

namespace {

struct carleman_blocks {
  double state = 0, grad = 0, evol = 0;          // unweighted lhs blocks
  double mid_state = 0, mid_grad = 0, mid_evol = 0;
  double data = 0;                               // weighted rhs integral
  double evol_dt_only = 0;                       // time-derivative part alone
};

carleman_blocks accumulate_blocks(const mesh::space_time_field& v,
                                  const mesh::space_time_field& f_tilde,
                                  const std::vector<mesh::space_time_field>& calB,
                                  const weight_context& ctx,
                                  const mesh::grid& g,
                                  const mesh::time_grid& tg) {
  carleman_blocks b;
  const auto dtv = forward::time_derivative(v, tg);
  std::vector<double> slice(g.count);
  const double dt = tg.dt;
  for (int k = 1; k < tg.nt; ++k) {
    const double l = ctx.lvals[static_cast<std::size_t>(k)];
    const double il = 1.0 / l;
    const double il3 = il * il * il;
    const double* wk = ctx.w.level(k);
    std::copy(v.level(k), v.level(k) + g.count, slice.begin());
    const auto gsq = grad_sq_field(slice, g);
    const auto hsq = hessian_sq_sum(slice, g);
    double s_state = 0, s_grad = 0, s_evol = 0, s_evol_dt = 0;
    double m_state = 0, m_grad = 0, m_evol = 0;
    double s_data = 0;
    for (std::size_t q = 0; q < g.count; ++q) {
      const double wq = g.quad[q] * wk[q];
      const double vsq = slice[q] * slice[q];
      const double dsq = dtv.at(k, q) * dtv.at(k, q);
      const double phi = ctx.phi[q];
      s_state += wq * vsq;
      s_grad += wq * gsq[q];
      s_evol += wq * (dsq + hsq[q]);
      s_evol_dt += wq * dsq;
      m_state += wq * vsq * phi * phi * phi;
      m_grad += wq * gsq[q] * phi;
      m_evol += wq * (dsq + hsq[q]) / phi;
      double d = f_tilde.at(k, q);
      double dat = d * d;
      for (const auto& bj : calB) {
        const double x = bj.at(k, q);
        dat += x * x;
      }
      s_data += wq * dat;
    }
    b.state += dt * il3 * s_state;
    b.grad += dt * il * s_grad;
    b.evol += dt * l * s_evol;
    b.evol_dt_only += dt * l * s_evol_dt;
    b.mid_state += dt * il3 * m_state;
    b.mid_grad += dt * il * m_grad;
    b.mid_evol += dt * l * m_evol;
    b.data += dt * s_data;
  }
  return b;
}

void fill_context(estimate_report& r, const weight_context& ctx,
                  const mesh::grid& g, const mesh::time_grid& tg) {
  r.s = ctx.s;
  r.lambda = ctx.lambda;
  r.n = g.n;
  r.nt = tg.nt;
}

}  // namespace

carleman_report carleman_sides(const mesh::space_time_field& v,
                               const mesh::space_time_field& f_tilde,
                               const std::vector<mesh::space_time_field>& calB_terms,
                               double s, double C1,
                               const weights::weight_config& cfg,
                               const mesh::grid& g, const mesh::time_grid& tg) {
  require(s > 0, "weight parameter must be positive");
  require(C1 >= 0, "constant must be nonnegative");
  require(v.nx == g.count && v.nt == tg.nt, "trajectory shape mismatch");
  require(f_tilde.nx == g.count && f_tilde.nt == tg.nt, "source shape mismatch");
  require(calB_terms.empty() || calB_terms.size() == 5,
          "memory terms must be absent or complete");
  check_vanishing_boundary(v, g);

  const auto ctx = make_weight_context(cfg, g, tg, s);
  const auto b = accumulate_blocks(v, f_tilde, calB_terms, ctx, g, tg);

  carleman_report out;
  const double damp = std::exp(-cfg.lambda * ctx.psi_sup);
  const double lhs1 = s * s * s * b.state;
  const double lhs2 = s * b.grad;
  const double lhs3 = damp / s * b.evol;
  const double mid1 = s * s * s * b.mid_state;
  const double mid2 = s * b.mid_grad;
  const double mid3 = b.mid_evol / s;
  out.mid = mid1 + mid2 + mid3;
  const double chain_tol = 1e-12;
  out.chain_pass = lhs1 <= mid1 * (1.0 + chain_tol) + chain_tol &&
                   lhs2 <= mid2 * (1.0 + chain_tol) + chain_tol &&
                   lhs3 <= mid3 * (1.0 + chain_tol) + chain_tol;
  out.rhs_raw = b.data;
  const double lhs = lhs1 + lhs2 + lhs3;
  out.empirical_c1 = (b.data > 0.0) ? lhs / (6.0 * b.data) : 0.0;

  auto& r = out.report;
  r.name = "carleman";
  r.lhs_terms = {{"state_block", lhs1},
                 {"gradient_block", lhs2},
                 {"evolution_block", lhs3}};
  r.lhs = lhs;
  const double c_used = (C1 > 0.0) ? C1 : out.empirical_c1;
  r.rhs_terms = {{"amplified_chain", out.mid},
                 {"data_integral", b.data},
                 {"six_c1_data", 6.0 * c_used * b.data}};
  r.rhs = 6.0 * c_used * b.data;
  fill_context(r, ctx, g, tg);
  if (C1 <= 0.0) {
    std::ostringstream msg;
    msg << "calibrated: smallest admissible constant " << out.empirical_c1;
    r.note = msg.str();
  }
  finalize(r);
  if (!out.chain_pass) r.pass = false;
  return out;
}

carleman_report stability_sides(const mesh::space_time_field& v,
                                const mesh::space_time_field& f_tilde,
                                double s0, double C1,
                                const weights::weight_config& cfg,
                                const mesh::grid& g, const mesh::time_grid& tg) {
  require(s0 > 0, "weight parameter must be positive");
  require(C1 >= 0, "constant must be nonnegative");
  require(v.nx == g.count && v.nt == tg.nt, "trajectory shape mismatch");
  require(f_tilde.nx == g.count && f_tilde.nt == tg.nt, "source shape mismatch");
  check_vanishing_boundary(v, g);

  const auto ctx = make_weight_context(cfg, g, tg, s0);
  const auto b = accumulate_blocks(v, f_tilde, {}, ctx, g, tg);

  carleman_report out;
  const double damp = std::exp(-cfg.lambda * ctx.psi_sup);
  const double lhs1 = 0.5 * s0 * s0 * s0 * b.state;
  const double lhs2 = s0 * b.grad;
  const double lhs3 = 0.5 * damp / s0 * b.evol_dt_only;
  out.mid = 0.0;
  out.chain_pass = true;
  out.rhs_raw = b.data;
  const double lhs = lhs1 + lhs2 + lhs3;
  out.empirical_c1 = (b.data > 0.0) ? lhs / (6.0 * b.data) : 0.0;

  auto& r = out.report;
  r.name = "weighted-stability";
  r.lhs_terms = {{"half_state_block", lhs1},
                 {"gradient_block", lhs2},
                 {"half_evolution_block", lhs3}};
  r.lhs = lhs;
  const double c_used = (C1 > 0.0) ? C1 : out.empirical_c1;
  r.rhs_terms = {{"data_integral", b.data},
                 {"six_c1_data", 6.0 * c_used * b.data}};
  r.rhs = 6.0 * c_used * b.data;
  fill_context(r, ctx, g, tg);
  if (C1 <= 0.0) {
    std::ostringstream msg;
    msg << "calibrated: smallest admissible constant " << out.empirical_c1;
    r.note = msg.str();
  }
  finalize(r);
  return out;
}

estimate_report trace_check(const mesh::space_time_field& w, double r0,
                            double eps, int j,
                            const nonlocal::kernel_set& ks,
                            const weights::weight_config& cfg,
                            const mesh::grid& g, const mesh::time_grid& tg) {
  if (eps <= 0.0) throw std::domain_error("trace parameter must be positive");
  if (r0 < 0.0) throw std::domain_error("weight exponent must be nonnegative");
  require(j == 1 || j == 2, "endpoint index must be 1 or 2");
  require(w.nx == g.count && w.nt == tg.nt, "trajectory shape mismatch");

  const double Tj = (j == 1) ? ks.T1 : ks.T2;
  const auto ctx = make_weight_context(cfg, g, tg, r0);
  const auto slice = mesh::at_time(w, tg, Tj);
  const double lTj = weights::temporal_weight(Tj, tg.T);
  const double e_top = std::exp(2.0 * cfg.lambda * cfg.psi.psi_max);

  double lhs = 0.0;
  for (std::size_t q = 0; q < g.count; ++q) {
    const double a = (ctx.phi[q] - e_top) / lTj;
    lhs += g.quad[q] * slice[q] * slice[q] *
           std::exp(2.0 * r0 * (a - ctx.alpha_peak));
  }

  const auto dtw = forward::time_derivative(w, tg);
  const auto win = mesh::window_weights(tg, ks.T1, ks.T2);
  double rhs_dt = 0.0, rhs_state = 0.0;
  const double inv_window = 1.0 / (ks.T2 - ks.T1);
  const double inv_eps2 = 1.0 / (eps * eps);
  for (int k = 1; k < tg.nt; ++k) {
    const double wk = win[static_cast<std::size_t>(k)];
    if (wk == 0.0) continue;
    const double l = ctx.lvals[static_cast<std::size_t>(k)];
    const double lp = weights::temporal_weight_dt(tg.node(k), tg.T);
    const double factor =
        inv_window + inv_eps2 + 2.0 * r0 * ctx.c1 * std::abs(lp) / (l * l);
    const double* cw = ctx.w.level(k);
    double s_dt = 0.0, s_state = 0.0;
    for (std::size_t q = 0; q < g.count; ++q) {
      const double wq = g.quad[q] * cw[q];
      s_dt += wq * dtw.at(k, q) * dtw.at(k, q);
      s_state += wq * w.at(k, q) * w.at(k, q);
    }
    rhs_dt += wk * s_dt;
    rhs_state += wk * factor * s_state;
  }

  estimate_report r;
  r.name = "trace";
  r.lhs_terms = {{"endpoint_slice", lhs}};
  r.lhs = lhs;
  r.rhs_terms = {{"derivative_window", eps * eps * rhs_dt},
                 {"state_window", rhs_state}};
  r.rhs = eps * eps * rhs_dt + rhs_state;
  fill_context(r, ctx, g, tg);
  {
    std::ostringstream msg;
    msg << "endpoint " << j << " at t = " << Tj << ", eps = " << eps;
    r.note = msg.str();
  }
  finalize(r);
  return r;
}

std::vector<estimate_report> term_bounds(const mesh::space_time_field& v,
                                         const nonlocal::kernel_set& ks,
                                         const nonlocal::hypothesis_report& consts,
                                         const weights::weight_config& cfg,
                                         const mesh::grid& g,
                                         const mesh::time_grid& tg) {
  require(v.nx == g.count && v.nt == tg.nt, "trajectory shape mismatch");
  require(consts.all_finite(), "hypothesis constants are not finite");
  check_vanishing_boundary(v, g);

  const double s0 = cfg.s0;
  const double T = tg.T;
  const double Tw = ks.T2 - ks.T1;
  const auto ctx = make_weight_context(cfg, g, tg, s0);
  const auto dtv = forward::time_derivative(v, tg);
  const auto tw = mesh::trapezoid_weights(tg);
  const auto win = mesh::window_weights(tg, ks.T1, ks.T2);
  const double e_top = std::exp(2.0 * cfg.lambda * cfg.psi.psi_max);

  // shared weighted integrals
  double win_dt = 0.0, win_v3 = 0.0, qt_v3 = 0.0;
  for (int k = 1; k < tg.nt; ++k) {
    const double l = ctx.lvals[static_cast<std::size_t>(k)];
    const double il3 = 1.0 / (l * l * l);
    const double* cw = ctx.w.level(k);
    double s_dt = 0.0, s_v = 0.0;
    for (std::size_t q = 0; q < g.count; ++q) {
      const double wq = g.quad[q] * cw[q];
      s_dt += wq * dtv.at(k, q) * dtv.at(k, q);
      s_v += wq * v.at(k, q) * v.at(k, q);
    }
    const double wk = win[static_cast<std::size_t>(k)];
    if (wk != 0.0) {
      win_dt += wk * l * s_dt;
      win_v3 += wk * il3 * s_v;
    }
    qt_v3 += tw[static_cast<std::size_t>(k)] * il3 * s_v;
  }

  // memory-term ingredients
  const auto vT1 = mesh::at_time(v, tg, ks.T1);
  const auto vT2 = mesh::at_time(v, tg, ks.T2);
  std::vector<double> I1(g.count, 0.0), I2(g.count, 0.0);
  mesh::space_time_field Bv;
  if (ks.k_present()) {
    Bv = mesh::space_time_field(tg.nt, g.count);
    std::vector<double> slice(g.count);
    for (int k = 0; k <= tg.nt; ++k) {
      const auto kl = nonlocal::kernel_level(ks, g, tg, k);
      std::copy(v.level(k), v.level(k) + g.count, slice.begin());
      const auto bu = nonlocal::apply_B(slice, kl, g);
      std::copy(bu.begin(), bu.end(), Bv.level(k));
    }
  }
  for (int k = 0; k <= tg.nt; ++k) {
    const double wk = win[static_cast<std::size_t>(k)];
    if (wk == 0.0) continue;
    for (std::size_t q = 0; q < g.count; ++q) {
      I1[q] += wk * ks.rho1.at(k, q) * v.at(k, q);
      if (ks.k_present()) I2[q] += wk * ks.rho2.at(k, q) * Bv.at(k, q);
    }
  }

  // endpoint-slice weights for the first two terms
  auto endpoint_weight = [&](double Tj) {
    std::vector<double> wv(g.count);
    const double l = weights::temporal_weight(Tj, tg.T);
    for (std::size_t q = 0; q < g.count; ++q) {
      const double a = (ctx.phi[q] - e_top) / l;
      wv[q] = std::exp(2.0 * s0 * (a - ctx.alpha_peak));
    }
    return wv;
  };
  const auto wT1 = endpoint_weight(ks.T1);
  const auto wT2 = endpoint_weight(ks.T2);

  const double n_f1 = nonlocal::sq_norm_l2t_linfx(ks.f1, tg);
  const double n_f2 = nonlocal::sq_norm_l2t_linfx(ks.f2, tg);
  const double n_f3 = nonlocal::sq_norm_l2t_linfx(ks.f3, tg);
  const double n_f4 = nonlocal::sq_norm_l2t_linfx(ks.f4, tg);
  const double Minv = 1.0 / weights::m_inf(ks.T1, ks.T2, tg.T);
  const double T3 = T * T * T;
  const double T6 = T3 * T3;
  const double trace_state_factor =
      std::pow(2.0, -6.0) * T6 * (1.0 / Tw + std::pow(s0, 1.0 + cfg.delta)) +
      0.25 * T3 * s0 * ctx.c1;
  const double trace_dt_factor = std::pow(s0, -(1.0 + cfg.delta)) * Minv;

  std::vector<estimate_report> reports;

  auto push = [&](const char* name, double lhs,
                  std::vector<labeled_value> rhs_terms, double rhs,
                  const char* note) {
    estimate_report r;
    r.name = name;
    r.lhs_terms = {{"weighted_term_integral", lhs}};
    r.lhs = lhs;
    r.rhs_terms = std::move(rhs_terms);
    r.rhs = rhs;
    fill_context(r, ctx, g, tg);
    r.note = note;
    finalize(r);
    reports.push_back(std::move(r));
  };

  // traces of the state at the window endpoints, weighted at that endpoint
  for (int j = 1; j <= 2; ++j) {
    const auto& fj = (j == 1) ? ks.f1 : ks.f2;
    const auto& vt = (j == 1) ? vT1 : vT2;
    const auto& wt = (j == 1) ? wT1 : wT2;
    const double n_fj = (j == 1) ? n_f1 : n_f2;
    double lhs = 0.0;
    for (int k = 0; k <= tg.nt; ++k) {
      const double wk = tw[static_cast<std::size_t>(k)];
      double s = 0.0;
      for (std::size_t q = 0; q < g.count; ++q) {
        const double b = fj.at(k, q) * vt[q];
        s += g.quad[q] * b * b * wt[q];
      }
      lhs += wk * s;
    }
    const double rhs_dt = trace_dt_factor * n_fj * win_dt;
    const double rhs_state = trace_state_factor * n_fj * win_v3;
    push(j == 1 ? "memory-term-1" : "memory-term-2", lhs,
         {{"derivative_route", rhs_dt}, {"state_route", rhs_state}},
         rhs_dt + rhs_state, "endpoint-trace route");
  }

  // window convolution against the first profile
  {
    double lhs = 0.0;
    for (int k = 1; k < tg.nt; ++k) {
      const double* cw = ctx.w.level(k);
      double s = 0.0;
      for (std::size_t q = 0; q < g.count; ++q) {
        const double b = ks.f3.at(k, q) * I1[q];
        s += g.quad[q] * b * b * cw[q];
      }
      lhs += tw[static_cast<std::size_t>(k)] * s;
    }
    const double rhs =
        Tw * std::pow(2.0, -6.0) * T6 * consts.K2 * consts.K2 * n_f3 * qt_v3;
    push("memory-term-3", lhs, {{"window_route", rhs}}, rhs,
         "window convolution route");
  }

  // spatial integral operator
  {
    double lhs = 0.0;
    if (ks.k_present()) {
      for (int k = 1; k < tg.nt; ++k) {
        const double* cw = ctx.w.level(k);
        double s = 0.0;
        for (std::size_t q = 0; q < g.count; ++q)
          s += g.quad[q] * Bv.at(k, q) * Bv.at(k, q) * cw[q];
        lhs += tw[static_cast<std::size_t>(k)] * s;
      }
    }
    const double rhs = consts.K3 * (consts.K4 + consts.K5) * qt_v3;
    push("memory-term-4", lhs, {{"split_route", rhs}}, rhs,
         "kernel split route");
  }

  // window convolution of the operator image
  {
    double lhs = 0.0;
    for (int k = 1; k < tg.nt; ++k) {
      const double* cw = ctx.w.level(k);
      double s = 0.0;
      for (std::size_t q = 0; q < g.count; ++q) {
        const double b = ks.f4.at(k, q) * I2[q];
        s += g.quad[q] * b * b * cw[q];
      }
      lhs += tw[static_cast<std::size_t>(k)] * s;
    }
    const double rhs = Tw * consts.K1 * consts.K1 * consts.K3 *
                       (consts.K4 + consts.K5) * n_f4 * qt_v3;
    push("memory-term-5", lhs, {{"window_split_route", rhs}}, rhs,
         "window route through the split bound");
  }

  return reports;
}

estimate_report kernel_split_check(const nonlocal::kernel_set& ks,
                                   const nonlocal::hypothesis_report& consts,
                                   const weights::weight_config& cfg,
                                   const mesh::grid& g,
                                   const mesh::time_grid& tg) {
  require(consts.all_finite(), "hypothesis constants are not finite");
  estimate_report r;
  r.name = "kernel-split";
  const double rhs = consts.K4 + consts.K5;

  double worst = 0.0;
  int worst_level = -1;
  std::size_t worst_node = 0;
  if (ks.k_present()) {
    const double s0 = cfg.s0;
    const double ge = 3.0 - ks.gamma_exp;
    std::vector<double> logphi(g.count);
    for (std::size_t q = 0; q < g.count; ++q)
      logphi[q] = std::exp(cfg.lambda * cfg.psi.values[q]);
    std::vector<double> logs;
    logs.reserve(g.count);
    for (int k = 1; k < tg.nt; ++k) {
      const double l = weights::temporal_weight(tg.node(k), tg.T);
      const auto kl = nonlocal::kernel_level(ks, g, tg, k);
      for (std::size_t y = 0; y < g.count; ++y) {
        logs.clear();
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t x = 0; x < g.count; ++x) {
          const double kv = std::abs(kl[x * g.count + y]);
          if (kv == 0.0) continue;
          // l^{3-gamma} |k| quad exp{2 s0 [alpha(t,x)-alpha(t,y)]} in logs
          const double lg = std::log(kv) + ge * std::log(l) +
                            std::log(g.quad[x]) +
                            2.0 * s0 * (logphi[x] - logphi[y]) / l;
          logs.push_back(lg);
          peak = std::max(peak, lg);
        }
        if (logs.empty()) continue;
        double acc = 0.0;
        for (double lg : logs) acc += std::exp(lg - peak);
        const double total = std::exp(peak) * acc;
        if (total > worst) {
          worst = total;
          worst_level = k;
          worst_node = y;
        }
      }
    }
  }

  r.lhs_terms = {{"largest_split_integral", worst}};
  r.lhs = worst;
  r.rhs_terms = {{"uphill_plus_downhill", rhs}};
  r.rhs = rhs;
  r.s = cfg.s0;
  r.lambda = cfg.lambda;
  r.n = g.n;
  r.nt = tg.nt;
  {
    std::ostringstream msg;
    msg << "worst level " << worst_level << ", node " << worst_node;
    r.note = msg.str();
  }
  finalize(r);
  return r;
}

coercivity_report coercivity_constants(const mesh::elliptic_coeffs& coeffs,
                                       const mesh::grid& g) {
  coercivity_report out;
  out.mu0 = coeffs.mu0;
  double drift_sq = sup_abs(coeffs.b1) * sup_abs(coeffs.b1);
  if (g.dim() == 2) drift_sq += sup_abs(coeffs.b2) * sup_abs(coeffs.b2);
  const double a0_sup = sup_abs(coeffs.a0);
  if (drift_sq == 0.0) {
    out.eps_star = std::numeric_limits<double>::infinity();
    out.mu1 = a0_sup;
  } else {
    out.eps_star = coeffs.mu0 / std::sqrt(drift_sq);
    out.mu1 = a0_sup + drift_sq / (2.0 * coeffs.mu0);
  }
  return out;
}

cutoff_profile make_cutoff(double eps, const mesh::time_grid& tg) {
  if (!(eps > 0.0) || !(2.0 * eps < 1.0))
    throw std::domain_error("cutoff margin out of range");
  cutoff_profile out;
  out.eps = eps;
  const double a = eps * tg.T;
  out.sigma.resize(static_cast<std::size_t>(tg.nt) + 1, 0.0);
  out.sigma_prime.resize(static_cast<std::size_t>(tg.nt) + 1, 0.0);
  for (int k = 0; k <= tg.nt; ++k) {
    const double t = tg.node(k);
    if (t <= a) continue;
    if (t >= 2.0 * a) {
      out.sigma[static_cast<std::size_t>(k)] = 1.0;
      continue;
    }
    const double q = (t - a) / a;
    out.sigma[static_cast<std::size_t>(k)] = q * q * (3.0 - 2.0 * q);
    out.sigma_prime[static_cast<std::size_t>(k)] = 6.0 * q * (1.0 - q) / a;
  }
  out.sup_prime = 1.5 / a;
  return out;
}

dependence_bundle dependence_constants(double eps,
                                       const nonlocal::kernel_set& ks,
                                       const nonlocal::hypothesis_report& consts,
                                       const weights::weight_config& cfg,
                                       double C1,
                                       const mesh::elliptic_coeffs& coeffs,
                                       const mesh::grid& g,
                                       const mesh::time_grid& tg) {
  if (!(eps > 0.0) || !(eps < ks.T1 / (2.0 * tg.T)))
    throw std::domain_error("cutoff margin must leave the window untouched");
  require(C1 > 0.0, "a positive calibrated constant is required");
  require(consts.all_finite(), "hypothesis constants are not finite");

  dependence_bundle out;
  out.eps = eps;
  const double T = tg.T;
  const double Tw = ks.T2 - ks.T1;
  const double gamma = ks.gamma_exp;
  const double psi_sup =
      std::max(std::abs(cfg.psi.psi_min), std::abs(cfg.psi.psi_max));
  const double c1 = weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max,
                                       cfg.lambda);

  out.J1 = nonlocal::sq_norm_l2t_linfx(ks.f1, tg) +
           nonlocal::sq_norm_l2t_linfx(ks.f2, tg);
  out.J2 = (1.0 / Tw + 1.0) * out.J1 +
           nonlocal::sq_norm_l2t_linfx(ks.rho1, tg) *
               nonlocal::sq_norm_l2t_linfx(ks.f3, tg);
  const double M = weights::m_inf(ks.T1, ks.T2, T);
  const double l_cap = std::max(std::pow(M, 2.0 * gamma - 3.0),
                                std::pow(2.0, 6.0 - 4.0 * gamma) *
                                    std::pow(T, 4.0 * gamma - 6.0));
  out.J3 = consts.K3 * consts.K6 * l_cap *
           nonlocal::sq_norm_l2t_linfx(ks.rho2, tg, ks.T1, ks.T2) *
           nonlocal::sq_norm_l2t_linfx(ks.f4, tg);
  const auto cut = make_cutoff(eps, tg);
  out.sup_sigma_prime = cut.sup_prime;
  out.J4 = out.J2 + 2.0 * cut.sup_prime * cut.sup_prime;

  // l is concave, so its minimum over the closed span sits at an endpoint
  out.min_l = std::min(weights::temporal_weight(eps * T, T),
                       weights::temporal_weight(ks.T2, T));
  const double floor = std::exp(-2.0 * cfg.s0 * c1 / out.min_l);
  out.C2 = floor;
  out.C3 = out.min_l * floor;
  out.C4 = 64.0 / std::pow(T, 6.0) * floor;

  const double s0 = cfg.s0;
  out.J5 = 12.0 * C1 *
           (out.J1 * s0 * std::exp(cfg.lambda * psi_sup) / out.C3 +
            out.J3 / (s0 * s0 * s0) / out.C2 +
            out.J4 / (s0 * s0 * s0) / out.C4);
  out.apriori_v = 12.0 * C1 / out.C4 / (s0 * s0 * s0);
  out.apriori_dtv = 12.0 * C1 / out.C3 * s0 * std::exp(cfg.lambda * psi_sup);
  out.apriori_v_l3 = 12.0 * C1 / out.C2 / (s0 * s0 * s0);

  const auto coer = coercivity_constants(coeffs, g);
  out.mu0 = coer.mu0;
  out.mu1 = coer.mu1;
  const double root = std::sqrt(consts.K3 * consts.K6);
  out.b_eps.resize(static_cast<std::size_t>(tg.nt) + 1);
  out.b_eps_alt.resize(static_cast<std::size_t>(tg.nt) + 1);
  const auto tw = mesh::trapezoid_weights(tg);
  for (int k = 0; k <= tg.nt; ++k) {
    const double t = tg.node(k);
    const bool active = t > eps * T && t < T;
    double disp = 2.0 * (out.mu1 + 1.0);
    double alt = disp;
    if (active && root > 0.0) {
      const double l = weights::temporal_weight(t, T);
      disp += 2.0 * root * std::pow(l, 3.0 - gamma);
      alt += 2.0 * root * std::pow(l, gamma - 3.0);
    }
    out.b_eps[static_cast<std::size_t>(k)] = disp;
    out.b_eps_alt[static_cast<std::size_t>(k)] = alt;
    out.b_l1 += tw[static_cast<std::size_t>(k)] * disp;
    out.b_l1_alt += tw[static_cast<std::size_t>(k)] * alt;
    if (std::abs(disp - alt) > 1e-12 * (1.0 + std::abs(disp)))
      out.profile_variants_differ = true;
  }
  out.note =
      "gradient term carried with the ellipticity floor; the statement-level "
      "gradient constant is unnamed in the source estimate and left unhoused";
  return out;
}

estimate_report dependence_check(const mesh::space_time_field& u,
                                 const mesh::space_time_field& g_ext,
                                 const mesh::space_time_field& f_tilde,
                                 const dependence_bundle& bundle, double tau,
                                 const mesh::grid& g, const mesh::time_grid& tg) {
  require(u.nx == g.count && u.nt == tg.nt, "trajectory shape mismatch");
  require(g_ext.nx == g.count && g_ext.nt == tg.nt,
          "boundary extension shape mismatch");
  require(f_tilde.nx == g.count && f_tilde.nt == tg.nt,
          "source shape mismatch");
  const double T = tg.T;
  if (!(tau >= 2.0 * bundle.eps * T) || !(tau <= T))
    throw std::domain_error("evaluation time outside the cutoff plateau");

  const auto u_tau = mesh::at_time(u, tg, tau);
  double state = 0.0;
  for (std::size_t q = 0; q < g.count; ++q)
    state += g.quad[q] * u_tau[q] * u_tau[q];

  auto grad_energy = [&](const mesh::space_time_field& f, double t_from,
                         double t_to) {
    const auto win = mesh::window_weights(tg, t_from, t_to);
    std::vector<double> slice(g.count);
    double acc = 0.0;
    for (int k = 0; k <= tg.nt; ++k) {
      const double wk = win[static_cast<std::size_t>(k)];
      if (wk == 0.0) continue;
      std::copy(f.level(k), f.level(k) + g.count, slice.begin());
      const auto gs = grad_sq_field(slice, g);
      double s = 0.0;
      for (std::size_t q = 0; q < g.count; ++q) s += g.quad[q] * gs[q];
      acc += wk * s;
    }
    return acc;
  };

  const double grad_u = grad_energy(u, 2.0 * bundle.eps * T, tau);
  const double lhs = state + bundle.mu0 * grad_u;

  const auto g_tau = mesh::at_time(g_ext, tg, tau);
  double g_state = 0.0;
  for (std::size_t q = 0; q < g.count; ++q)
    g_state += g.quad[q] * g_tau[q] * g_tau[q];
  const double grad_g = grad_energy(g_ext, 0.0, tau);

  const double f_l2 = std::sqrt(sq_l2_qt(f_tilde, g, tg));
  const auto winf = mesh::window_weights(tg, bundle.eps * T, T);
  double f_l1 = 0.0;
  for (int k = 0; k <= tg.nt; ++k) {
    const double wk = winf[static_cast<std::size_t>(k)];
    if (wk == 0.0) continue;
    double s = 0.0;
    for (std::size_t q = 0; q < g.count; ++q)
      s += g.quad[q] * f_tilde.at(k, q) * f_tilde.at(k, q);
    f_l1 += wk * std::sqrt(s);
  }
  const double amp = std::exp(0.5 * bundle.b_l1);
  const double bracket = std::sqrt(bundle.J5) * amp * f_l2 + amp * f_l1;

  estimate_report r;
  r.name = "dependence";
  r.lhs_terms = {{"state_at_tau", state}, {"gradient_energy", bundle.mu0 * grad_u}};
  r.lhs = lhs;
  r.rhs_terms = {{"extension_state", 2.0 * g_state},
                 {"extension_gradient", 2.0 * bundle.mu0 * grad_g},
                 {"bracket_squared", 2.0 * bracket * bracket}};
  r.rhs = 2.0 * g_state + 2.0 * bundle.mu0 * grad_g + 2.0 * bracket * bracket;
  r.s = 0.0;
  r.n = g.n;
  r.nt = tg.nt;
  {
    std::ostringstream msg;
    msg << "tau = " << tau << ", eps = " << bundle.eps << "; " << bundle.note;
    r.note = msg.str();
  }
  finalize(r);
  return r;
}

estimate_report source_data_bound(const mesh::space_time_field& f_tilde,
                                  const mesh::space_time_field& f0,
                                  const mesh::space_time_field& g_ext,
                                  const nonlocal::kernel_set& ks,
                                  const nonlocal::hypothesis_report& consts,
                                  const weights::weight_config& cfg,
                                  double eps,
                                  const mesh::elliptic_coeffs& coeffs,
                                  const mesh::grid& g, const mesh::time_grid& tg) {
  require(consts.all_finite(), "hypothesis constants are not finite");
  if (!(eps > 0.0) || !(eps < ks.T1 / (2.0 * tg.T)))
    throw std::domain_error("cutoff margin must leave the window untouched");
  const double T = tg.T;

  const auto winf = mesh::window_weights(tg, eps * T, T);
  double lhs = 0.0;
  for (int k = 0; k <= tg.nt; ++k) {
    const double wk = winf[static_cast<std::size_t>(k)];
    if (wk == 0.0) continue;
    double s = 0.0;
    for (std::size_t q = 0; q < g.count; ++q)
      s += g.quad[q] * f_tilde.at(k, q) * f_tilde.at(k, q);
    lhs += wk * std::sqrt(s);
  }

  const double f0_l2 = std::sqrt(sq_l2_qt(f0, g, tg));
  const auto dtg = forward::time_derivative(g_ext, tg);
  const double dtg_l2 = std::sqrt(sq_l2_qt(dtg, g, tg));
  mesh::space_time_field ag(tg.nt, g.count);
  std::vector<double> slice(g.count);
  for (int k = 0; k <= tg.nt; ++k) {
    std::copy(g_ext.level(k), g_ext.level(k) + g.count, slice.begin());
    const auto a = mesh::apply_A(slice, coeffs, g);
    std::copy(a.begin(), a.end(), ag.level(k));
  }
  const double ag_l2 = std::sqrt(sq_l2_qt(ag, g, tg));

  auto slice_norm = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t q = 0; q < g.count; ++q) s += g.quad[q] * f[q] * f[q];
    return std::sqrt(s);
  };
  const double gT1 = slice_norm(mesh::at_time(g_ext, tg, ks.T1));
  const double gT2 = slice_norm(mesh::at_time(g_ext, tg, ks.T2));
  const double f1_l2 = std::sqrt(sq_l2_qt(ks.f1, g, tg));
  const double f2_l2 = std::sqrt(sq_l2_qt(ks.f2, g, tg));

  const double f3_norm = std::sqrt(nonlocal::sq_norm_l2t_linfx(ks.f3, tg));
  const double f4_norm = std::sqrt(nonlocal::sq_norm_l2t_linfx(ks.f4, tg));
  const double rho1_win =
      std::sqrt(nonlocal::sq_norm_l2t_linfx(ks.rho1, tg, ks.T1, ks.T2));
  const double rho2_win =
      std::sqrt(nonlocal::sq_norm_l2t_linfx(ks.rho2, tg, ks.T1, ks.T2));

  const auto winw = mesh::window_weights(tg, ks.T1, ks.T2);
  double g_win_sq = 0.0, g_qt_sq = 0.0;
  const auto tw = mesh::trapezoid_weights(tg);
  for (int k = 0; k <= tg.nt; ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < g.count; ++q)
      s += g.quad[q] * g_ext.at(k, q) * g_ext.at(k, q);
    g_win_sq += winw[static_cast<std::size_t>(k)] * s;
    g_qt_sq += tw[static_cast<std::size_t>(k)] * s;
  }
  const double g_win = std::sqrt(g_win_sq);
  const double g_qt = std::sqrt(g_qt_sq);

  const double root = std::sqrt(consts.K3 * consts.K6);
  const double M = weights::m_inf(ks.T1, ks.T2, T);
  const double gamma = ks.gamma_exp;

  // windowed quadrature of l^{2 gamma - 6}; the terminal level contributes
  // pow(0, 2 gamma - 6), infinite below the integrability threshold. Skipped
  // entirely when the operator is absent so no 0 * inf can form.
  double l_int = 0.0;
  if (root > 0.0)
    for (int k = 0; k <= tg.nt; ++k) {
      const double wk = winf[static_cast<std::size_t>(k)];
      if (wk == 0.0) continue;
      const double l = weights::temporal_weight(tg.node(k), T);
      l_int += wk * std::pow(l, 2.0 * gamma - 6.0);
    }

  const double sqrtT = std::sqrt(T);
  const double bulk =
      sqrtT * (f0_l2 + dtg_l2 + ag_l2 + f1_l2 * gT1 + f2_l2 * gT2 +
               f3_norm * rho1_win * g_win +
               root * std::pow(M, gamma - 3.0) * f4_norm * rho2_win * g_qt);
  const double tail = root * std::sqrt(l_int) * g_qt;

  estimate_report r;
  r.name = "source-bound";
  r.lhs_terms = {{"cutoff_l1_norm", lhs}};
  r.lhs = lhs;
  r.rhs_terms = {{"bulk_data", bulk}, {"operator_tail", tail}};
  r.rhs = bulk + tail;
  r.s = cfg.s0;
  r.lambda = cfg.lambda;
  r.n = g.n;
  r.nt = tg.nt;
  if (std::isinf(tail))
    r.note = "operator tail diverges at the terminal time for this exponent";
  finalize(r);
  return r;
}

}  // namespace lcp::estimates
