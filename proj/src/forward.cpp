#include "lcp/forward.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lcp::forward {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

using sparse = Eigen::SparseMatrix<double>;
using triplet = Eigen::Triplet<double>;

}  // namespace

sparse step_matrix(const mesh::grid& g, const mesh::elliptic_coeffs& c,
                   double dt) {
  const std::size_t nx = g.count;
  const double h2 = g.h * g.h;
  const double inv2h = 1.0 / (2.0 * g.h);
  std::vector<triplet> trips;
  trips.reserve(nx * 10);

  for (std::size_t p : g.boundary_nodes) {
    trips.emplace_back(static_cast<int>(p), static_cast<int>(p), 1.0);
  }

  auto add = [&](std::size_t r, std::size_t col, double a_coeff) {
    // contribution a_coeff of A maps to -dt*a_coeff in I - dt*A
    trips.emplace_back(static_cast<int>(r), static_cast<int>(col),
                       -dt * a_coeff);
  };

  if (g.dim() == 1) {
    for (std::size_t p : g.interior_nodes) {
      const double ar = 0.5 * (c.a11[p] + c.a11[p + 1]);
      const double al = 0.5 * (c.a11[p - 1] + c.a11[p]);
      trips.emplace_back(static_cast<int>(p), static_cast<int>(p), 1.0);
      add(p, p + 1, ar / h2 + c.b1[p] * inv2h);
      add(p, p - 1, al / h2 - c.b1[p] * inv2h);
      add(p, p, -(ar + al) / h2 + c.a0[p]);
    }
  } else {
    const std::size_t sy = static_cast<std::size_t>(g.n);
    const bool cross = std::any_of(c.a12.begin(), c.a12.end(),
                                   [](double v) { return v != 0.0; });
    for (std::size_t p : g.interior_nodes) {
      const double ar = 0.5 * (c.a11[p] + c.a11[p + 1]);
      const double al = 0.5 * (c.a11[p - 1] + c.a11[p]);
      const double at = 0.5 * (c.a22[p] + c.a22[p + sy]);
      const double ab = 0.5 * (c.a22[p - sy] + c.a22[p]);
      trips.emplace_back(static_cast<int>(p), static_cast<int>(p), 1.0);
      add(p, p + 1, ar / h2 + c.b1[p] * inv2h);
      add(p, p - 1, al / h2 - c.b1[p] * inv2h);
      add(p, p + sy, at / h2 + c.b2[p] * inv2h);
      add(p, p - sy, ab / h2 - c.b2[p] * inv2h);
      add(p, p, -(ar + al + at + ab) / h2 + c.a0[p]);
      if (cross) {
        // (d/dx)(a12 d/dy f) + (d/dy)(a12 d/dx f), both factors centered;
        // neighbors of an interior node always have centered tangential
        // stencils, so this mirrors the matrix-free operator exactly
        const double cxr = c.a12[p + 1] * inv2h * inv2h;
        const double cxl = c.a12[p - 1] * inv2h * inv2h;
        const double cyt = c.a12[p + sy] * inv2h * inv2h;
        const double cyb = c.a12[p - sy] * inv2h * inv2h;
        add(p, p + 1 + sy, cxr);
        add(p, p + 1 - sy, -cxr);
        add(p, p - 1 + sy, -cxl);
        add(p, p - 1 - sy, cxl);
        add(p, p + sy + 1, cyt);
        add(p, p + sy - 1, -cyt);
        add(p, p - sy + 1, -cyb);
        add(p, p - sy - 1, cyb);
      }
    }
  }

  sparse m(static_cast<int>(nx), static_cast<int>(nx));
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

void validate_problem(const problem_data& p) {
  const std::size_t nx = p.grid.count;
  require(p.f0.nx == nx && p.f0.nt == p.tg.nt, "source shape mismatch");
  require(p.dirichlet.nx == nx && p.dirichlet.nt == p.tg.nt,
          "boundary data shape mismatch");
  require(p.kernels.f1.nx == nx && p.kernels.f1.nt == p.tg.nt,
          "kernel field shape mismatch");
  mesh::validate_coeffs(p.coeffs, p.grid);
  nonlocal::validate_kernel_set(p.kernels, p.tg);
  for (double v : p.dirichlet.data)
    require(std::isfinite(v), "boundary data must be finite");
  for (double v : p.f0.data) require(std::isfinite(v), "source must be finite");
}

double trajectory_norm(const mesh::space_time_field& u, const mesh::grid& g,
                       const mesh::time_grid& tg) {
  const auto w = mesh::trapezoid_weights(tg);
  double s = 0.0;
  for (int k = 0; k <= tg.nt; ++k) {
    const double* lv = u.level(k);
    double sp = 0.0;
    for (std::size_t p = 0; p < g.count; ++p)
      sp += g.quad[p] * lv[p] * lv[p];
    s += w[k] * sp;
  }
  return std::sqrt(s);
}

mesh::space_time_field time_derivative(const mesh::space_time_field& u,
                                       const mesh::time_grid& tg) {
  mesh::space_time_field out(u.nt, u.nx);
  const double inv2dt = 1.0 / (2.0 * tg.dt);
  const double invdt = 1.0 / tg.dt;
  const int nt = u.nt;
  for (std::size_t p = 0; p < u.nx; ++p) {
    out.at(0, p) = (-3.0 * u.at(0, p) + 4.0 * u.at(1, p) - u.at(2, p)) * 0.5 *
                   invdt;
    out.at(nt, p) = (3.0 * u.at(nt, p) - 4.0 * u.at(nt - 1, p) +
                     u.at(nt - 2, p)) *
                    0.5 * invdt;
  }
  for (int k = 1; k < nt; ++k)
    for (std::size_t p = 0; p < u.nx; ++p)
      out.at(k, p) = (u.at(k + 1, p) - u.at(k - 1, p)) * inv2dt;
  return out;
}

solve_result solve_ivp(const problem_data& p, const std::vector<double>& u0,
                       const solve_options& opts) {
  validate_problem(p);
  const std::size_t nx = p.grid.count;
  require(u0.size() == nx, "initial state shape mismatch");
  const int nt = p.tg.nt;
  const double dt = p.tg.dt;

  solve_result res;
  res.u = mesh::space_time_field(nt, nx);

  // the boundary value wins over the supplied initial state where they differ
  std::vector<double> start(u0);
  for (std::size_t b : p.grid.boundary_nodes) {
    if (std::abs(start[b] - p.dirichlet.at(0, b)) >
        1e-12 * (1.0 + std::abs(start[b])))
      res.stats.initial_boundary_mismatch = true;
    start[b] = p.dirichlet.at(0, b);
  }

  const sparse m = step_matrix(p.grid, p.coeffs, dt);
  Eigen::SparseLU<sparse> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("time step matrix factorization failed");

  const bool with_memory =
      p.kernels.k_present() ||
      std::any_of(p.kernels.f1.data.begin(), p.kernels.f1.data.end(),
                  [](double v) { return v != 0.0; }) ||
      std::any_of(p.kernels.f2.data.begin(), p.kernels.f2.data.end(),
                  [](double v) { return v != 0.0; }) ||
      std::any_of(p.kernels.f3.data.begin(), p.kernels.f3.data.end(),
                  [](double v) { return v != 0.0; }) ||
      std::any_of(p.kernels.f4.data.begin(), p.kernels.f4.data.end(),
                  [](double v) { return v != 0.0; });

  Eigen::VectorXd rhs(static_cast<int>(nx)), sol(static_cast<int>(nx));

  auto sweep = [&](const mesh::space_time_field* memory,
                   mesh::space_time_field& out) {
    std::copy(start.begin(), start.end(), out.level(0));
    for (int k = 1; k <= nt; ++k) {
      const double* prev = out.level(k - 1);
      const double* src = p.f0.level(k);
      for (std::size_t q = 0; q < nx; ++q) {
        double s = src[q];
        if (memory) s += memory->at(k, q);
        rhs[static_cast<int>(q)] = prev[q] + dt * s;
      }
      for (std::size_t b : p.grid.boundary_nodes)
        rhs[static_cast<int>(b)] = p.dirichlet.at(k, b);
      sol = lu.solve(rhs);
      double* lvl = out.level(k);
      for (std::size_t q = 0; q < nx; ++q) lvl[q] = sol[static_cast<int>(q)];
    }
  };

  if (!with_memory) {
    sweep(nullptr, res.u);
    res.stats.iterations = 1;
    res.stats.converged = true;
    return res;
  }

  mesh::space_time_field current(nt, nx), next(nt, nx), diff(nt, nx);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const auto memory =
        nonlocal::apply_calB_trajectory(current, p.kernels, p.grid, p.tg);
    sweep(&memory, next);
    for (std::size_t i = 0; i < diff.data.size(); ++i)
      diff.data[i] = next.data[i] - current.data[i];
    const double dn = trajectory_norm(diff, p.grid, p.tg);
    const double scale = std::max(1.0, trajectory_norm(next, p.grid, p.tg));
    const double rel = dn / scale;
    res.stats.residuals.push_back(rel);
    res.stats.iterations = it;
    std::swap(current.data, next.data);
    if (rel < opts.tolerance) {
      res.stats.converged = true;
      res.u.data = std::move(current.data);
      return res;
    }
    // clear divergence: three consecutive growths far beyond the first gap
    const auto& h = res.stats.residuals;
    if (h.size() >= 4 && h.back() > 1e6 * h.front() &&
        h[h.size() - 1] > h[h.size() - 2] &&
        h[h.size() - 2] > h[h.size() - 3] && h[h.size() - 3] > h[h.size() - 4])
      break;
  }

  std::ostringstream msg;
  msg << "trajectory iteration did not converge within "
      << res.stats.iterations << " sweeps; last relative update "
      << res.stats.residuals.back();
  throw picard_failure(msg.str(), res.stats.residuals);
}

mesh::space_time_field manufacture(const problem_data& p,
                                   const mesh::space_time_field& u_star) {
  const std::size_t nx = p.grid.count;
  require(u_star.nx == nx && u_star.nt == p.tg.nt,
          "trajectory shape mismatch");
  const auto dudt = time_derivative(u_star, p.tg);
  const auto memory =
      nonlocal::apply_calB_trajectory(u_star, p.kernels, p.grid, p.tg);
  mesh::space_time_field f0(p.tg.nt, nx);
  std::vector<double> level(nx);
  for (int k = 0; k <= p.tg.nt; ++k) {
    std::copy(u_star.level(k), u_star.level(k) + nx, level.begin());
    const auto au = mesh::apply_A(level, p.coeffs, p.grid);
    for (std::size_t q = 0; q < nx; ++q)
      f0.at(k, q) = dudt.at(k, q) - au[q] - memory.at(k, q);
  }
  return f0;
}

homogeneous_reduction reduce_homogeneous(const mesh::space_time_field& u,
                                         const problem_data& p) {
  const std::size_t nx = p.grid.count;
  require(u.nx == nx && u.nt == p.tg.nt, "trajectory shape mismatch");
  homogeneous_reduction out;
  out.v = mesh::space_time_field(p.tg.nt, nx);
  for (std::size_t i = 0; i < u.data.size(); ++i)
    out.v.data[i] = u.data[i] - p.dirichlet.data[i];

  const auto dgdt = time_derivative(p.dirichlet, p.tg);
  const auto memory =
      nonlocal::apply_calB_trajectory(p.dirichlet, p.kernels, p.grid, p.tg);
  out.f_tilde = mesh::space_time_field(p.tg.nt, nx);
  std::vector<double> level(nx);
  for (int k = 0; k <= p.tg.nt; ++k) {
    std::copy(p.dirichlet.level(k), p.dirichlet.level(k) + nx, level.begin());
    const auto ag = mesh::apply_A(level, p.coeffs, p.grid);
    for (std::size_t q = 0; q < nx; ++q)
      out.f_tilde.at(k, q) =
          p.f0.at(k, q) - dgdt.at(k, q) + ag[q] + memory.at(k, q);
  }
  return out;
}

problem_data time_reverse(const problem_data& p) {
  const int nt = p.tg.nt;
  const std::size_t nx = p.grid.count;
  problem_data out;
  out.grid = p.grid;
  out.coeffs = p.coeffs;
  out.tg = p.tg;
  out.f0 = mesh::space_time_field(nt, nx);
  out.dirichlet = mesh::space_time_field(nt, nx);

  auto reflect = [&](const mesh::space_time_field& src, double sign) {
    mesh::space_time_field dst(nt, nx);
    for (int k = 0; k <= nt; ++k) {
      const double* s = src.level(nt - k);
      double* d = dst.level(k);
      for (std::size_t q = 0; q < nx; ++q) d[q] = sign * s[q];
    }
    return dst;
  };

  out.f0 = reflect(p.f0, -1.0);
  out.dirichlet = reflect(p.dirichlet, 1.0);

  auto& ks = out.kernels;
  const auto& src = p.kernels;
  ks.T1 = p.tg.T - src.T2;
  ks.T2 = p.tg.T - src.T1;
  ks.gamma_exp = src.gamma_exp;
  // the trace multipliers swap roles with a sign flip; the window-integral
  // pieces flip so their products keep the displayed signs
  ks.f1 = reflect(src.f2, -1.0);
  ks.f2 = reflect(src.f1, -1.0);
  ks.f3 = reflect(src.f3, 1.0);
  ks.rho1 = reflect(src.rho1, -1.0);
  ks.f4 = reflect(src.f4, -1.0);
  ks.rho2 = reflect(src.rho2, -1.0);
  if (src.k) {
    const double T = p.tg.T;
    auto inner = src.k;
    ks.k = [inner, T](double t, double x1, double x2, double y1, double y2) {
      return -inner(T - t, x1, x2, y1, y2);
    };
  }
  if (src.k_dense_valid) {
    ks.k_dense.resize(src.k_dense.size());
    const std::size_t block = nx * nx;
    for (int k = 0; k <= nt; ++k) {
      const double* s = src.k_dense.data() +
                        static_cast<std::size_t>(nt - k) * block;
      double* d = ks.k_dense.data() + static_cast<std::size_t>(k) * block;
      for (std::size_t i = 0; i < block; ++i) d[i] = -s[i];
    }
    ks.k_dense_valid = true;
  }
  return out;
}

lateral_data extract_lateral_data(const mesh::space_time_field& u,
                                  const problem_data& p) {
  const std::size_t nx = p.grid.count;
  require(u.nx == nx && u.nt == p.tg.nt, "trajectory shape mismatch");
  lateral_data out;
  out.dirichlet = mesh::space_time_field(p.tg.nt, nx);
  const auto& gn = p.grid.gamma_nodes;
  out.conormal = mesh::space_time_field(p.tg.nt, gn.size());
  std::vector<double> level(nx);
  for (int k = 0; k <= p.tg.nt; ++k) {
    for (std::size_t b : p.grid.boundary_nodes)
      out.dirichlet.at(k, b) = u.at(k, b);
    std::copy(u.level(k), u.level(k) + nx, level.begin());
    const auto tr =
        mesh::conormal_derivative(level, p.coeffs, p.grid, gn, p.grid.gamma);
    for (std::size_t i = 0; i < gn.size(); ++i) out.conormal.at(k, i) = tr[i];
  }
  return out;
}

double picard_apriori_factor(const problem_data& p,
                             const nonlocal::hypothesis_report& consts) {
  const auto& ks = p.kernels;
  const auto& tg = p.tg;
  auto sup_all = [&](const mesh::space_time_field& f) {
    double m = 0.0;
    for (double v : f.data) m = std::max(m, std::abs(v));
    return m;
  };
  auto sup_level = [&](const mesh::space_time_field& f, int k) {
    double m = 0.0;
    const double* lv = f.level(k);
    for (std::size_t q = 0; q < f.nx; ++q) m = std::max(m, std::abs(lv[q]));
    return m;
  };

  const double s1 = sup_all(ks.f1);
  const double s2 = sup_all(ks.f2);
  const auto win = mesh::window_weights(tg, ks.T1, ks.T2);

  double w_rho1 = 0.0;
  for (int k = 0; k <= tg.nt; ++k)
    if (win[k] != 0.0) w_rho1 += win[k] * sup_level(ks.rho1, k);
  const double s3 = sup_all(ks.f3) * w_rho1;

  double s4 = 0.0, w_rho2 = 0.0;
  if (ks.k_present()) {
    const double base = std::sqrt(consts.K3 * consts.K6);
    const double ge = ks.gamma_exp - 3.0;
    for (int k = 1; k < tg.nt; ++k) {
      const double lpow = std::pow(
          weights::temporal_weight(tg.node(k), tg.T), ge);
      s4 = std::max(s4, base * lpow);
      if (win[k] != 0.0)
        w_rho2 += win[k] * sup_level(ks.rho2, k) * base * lpow;
    }
  }
  const double s5 = sup_all(ks.f4) * w_rho2;
  return tg.T * (s1 + s2 + s3 + s4 + s5);
}

}  // namespace lcp::forward
