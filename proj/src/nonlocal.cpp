#include "lcp/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace lcp::nonlocal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

mesh::space_time_field zero_field(const mesh::grid& g,
                                  const mesh::time_grid& tg) {
  return mesh::space_time_field(tg.nt, g.count);
}

void check_finite(const mesh::space_time_field& f, const char* name) {
  for (double v : f.data)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string("non-finite sample in ") + name);
}

void fill_level(const kernel_set& ks, const mesh::grid& g, double t,
                std::vector<double>& out) {
  const std::size_t nx = g.count;
  out.assign(nx * nx, 0.0);
  if (!ks.k) return;
  const bool two_d = g.dim() == 2;
  for (std::size_t i = 0; i < nx; ++i) {
    const double x1 = g.xs[i];
    const double x2 = two_d ? g.ys[i] : 0.0;
    double* row = out.data() + i * nx;
    for (std::size_t j = 0; j < nx; ++j)
      row[j] = ks.k(t, x1, x2, g.xs[j], two_d ? g.ys[j] : 0.0);
  }
}

/// running maximum in log scale together with its grid location
struct log_max {
  double value = kNegInf;
  int level = -1;
  std::size_t node = 0;
  void offer(double v, int k, std::size_t p) {
    if (v > value) {
      value = v;
      level = k;
      node = p;
    }
  }
  void merge(const log_max& other) {
    if (other.value > value) *this = other;
  }
};

double from_log(double lv, bool& finite) {
  if (lv == kNegInf) return 0.0;
  const double v = std::exp(lv);
  if (!std::isfinite(v)) finite = false;
  return v;
}

double psi_sup(const weights::weight_config& cfg) {
  return std::max(std::abs(cfg.psi.psi_min), std::abs(cfg.psi.psi_max));
}

}  // namespace

kernel_set zero_kernels(const mesh::grid& g, const mesh::time_grid& tg,
                        double T1, double T2) {
  kernel_set ks;
  ks.f1 = zero_field(g, tg);
  ks.f2 = zero_field(g, tg);
  ks.f3 = zero_field(g, tg);
  ks.f4 = zero_field(g, tg);
  ks.rho1 = zero_field(g, tg);
  ks.rho2 = zero_field(g, tg);
  ks.T1 = T1;
  ks.T2 = T2;
  return ks;
}

void validate_kernel_set(const kernel_set& ks, const mesh::time_grid& tg) {
  require(ks.T1 > 0.0 && ks.T1 < ks.T2 && ks.T2 < tg.T,
          "memory window must satisfy 0 < T1 < T2 < T");
  require(ks.gamma_exp >= 0.0 && ks.gamma_exp <= 3.0,
          "kernel exponent must lie in [0,3]");
  check_finite(ks.f1, "f1");
  check_finite(ks.f2, "f2");
  check_finite(ks.f3, "f3");
  check_finite(ks.f4, "f4");
  check_finite(ks.rho1, "rho1");
  check_finite(ks.rho2, "rho2");
}

void build_dense_cache(kernel_set& ks, const mesh::grid& g,
                       const mesh::time_grid& tg, std::size_t max_entries) {
  if (!ks.k || ks.k_dense_valid) return;
  const std::size_t nx = g.count;
  const std::size_t entries = (static_cast<std::size_t>(tg.nt) + 1) * nx * nx;
  if (entries > max_entries) return;
  ks.k_dense.assign(entries, 0.0);
  std::vector<double> level;
  for (int k = 0; k <= tg.nt; ++k) {
    fill_level(ks, g, tg.node(k), level);
    std::copy(level.begin(), level.end(),
              ks.k_dense.begin() + static_cast<std::size_t>(k) * nx * nx);
  }
  ks.k_dense_valid = true;
}

std::vector<double> kernel_level(const kernel_set& ks, const mesh::grid& g,
                                 const mesh::time_grid& tg, int level) {
  if (level < 0 || level > tg.nt)
    throw std::domain_error("time level outside the grid");
  const std::size_t nx = g.count;
  if (ks.k_dense_valid) {
    const auto* base = ks.k_dense.data() + static_cast<std::size_t>(level) * nx * nx;
    return std::vector<double>(base, base + nx * nx);
  }
  std::vector<double> out;
  fill_level(ks, g, tg.node(level), out);
  return out;
}

std::vector<double> kernel_level_at(const kernel_set& ks, const mesh::grid& g,
                                    const mesh::time_grid& tg, double t) {
  if (t < 0.0 || t > tg.T) throw std::domain_error("time outside [0,T]");
  const std::size_t nx = g.count;
  if (ks.k) {
    std::vector<double> out;
    fill_level(ks, g, t, out);
    return out;
  }
  if (!ks.k_dense_valid) return std::vector<double>(nx * nx, 0.0);
  const double pos = t / tg.dt;
  const int k0 = std::min(static_cast<int>(pos), tg.nt - 1);
  const double theta = pos - k0;
  const auto* a = ks.k_dense.data() + static_cast<std::size_t>(k0) * nx * nx;
  const auto* b = a + nx * nx;
  std::vector<double> out(nx * nx);
  for (std::size_t i = 0; i < nx * nx; ++i)
    out[i] = (1.0 - theta) * a[i] + theta * b[i];
  return out;
}

std::vector<double> apply_B(const std::vector<double>& u_slice,
                            const std::vector<double>& k_level,
                            const mesh::grid& g) {
  const std::size_t nx = g.count;
  require(u_slice.size() == nx && k_level.size() == nx * nx,
          "field shape mismatch");
  std::vector<double> out(nx, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    const double* row = k_level.data() + i * nx;
    double s = 0.0;
    for (std::size_t j = 0; j < nx; ++j) s += g.quad[j] * row[j] * u_slice[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> apply_B_transpose(const std::vector<double>& w_slice,
                                      const std::vector<double>& k_level,
                                      const mesh::grid& g) {
  const std::size_t nx = g.count;
  require(w_slice.size() == nx && k_level.size() == nx * nx,
          "field shape mismatch");
  std::vector<double> out(nx, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    const double wi = w_slice[i];
    if (wi == 0.0) continue;
    const double* row = k_level.data() + i * nx;
    for (std::size_t j = 0; j < nx; ++j) out[j] += row[j] * wi;
  }
  for (std::size_t j = 0; j < nx; ++j) out[j] *= g.quad[j];
  return out;
}

double level_operator_bound(const std::vector<double>& k_level,
                            const mesh::grid& g) {
  const std::size_t nx = g.count;
  require(k_level.size() == nx * nx, "field shape mismatch");
  double row_max = 0.0;
  std::vector<double> col(nx, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    const double* row = k_level.data() + i * nx;
    double rs = 0.0;
    for (std::size_t j = 0; j < nx; ++j) {
      const double a = std::abs(row[j]);
      rs += g.quad[j] * a;
      col[j] += g.quad[i] * a;
    }
    row_max = std::max(row_max, rs);
  }
  const double col_max = *std::max_element(col.begin(), col.end());
  return std::sqrt(row_max * col_max);
}

double sq_norm_l2t_linfx(const mesh::space_time_field& f,
                         const mesh::time_grid& tg) {
  return sq_norm_l2t_linfx(f, tg, 0.0, tg.T);
}

double sq_norm_l2t_linfx(const mesh::space_time_field& f,
                         const mesh::time_grid& tg, double t1, double t2) {
  const auto w = mesh::window_weights(tg, t1, t2);
  double s = 0.0;
  for (int k = 0; k <= tg.nt; ++k) {
    if (w[k] == 0.0) continue;
    double m = 0.0;
    const double* lv = f.level(k);
    for (std::size_t p = 0; p < f.nx; ++p) m = std::max(m, std::abs(lv[p]));
    s += w[k] * m * m;
  }
  return s;
}

double sq_norm_linfx_l2t(const mesh::space_time_field& f,
                         const mesh::time_grid& tg) {
  const auto w = mesh::trapezoid_weights(tg);
  double best = 0.0;
  for (std::size_t p = 0; p < f.nx; ++p) {
    double s = 0.0;
    for (int k = 0; k <= f.nt; ++k) s += w[k] * f.at(k, p) * f.at(k, p);
    best = std::max(best, s);
  }
  return best;
}

memory_terms apply_calB_terms(const mesh::space_time_field& u,
                              const kernel_set& ks, double t,
                              const mesh::grid& g, const mesh::time_grid& tg) {
  const std::size_t nx = g.count;
  require(u.nx == nx && u.nt == tg.nt, "field shape mismatch");
  memory_terms out;
  out.b1.assign(nx, 0.0);
  out.b2.assign(nx, 0.0);
  out.b3.assign(nx, 0.0);
  out.b4.assign(nx, 0.0);
  out.b5.assign(nx, 0.0);
  out.total.assign(nx, 0.0);

  const auto uT1 = mesh::at_time(u, tg, ks.T1);
  const auto uT2 = mesh::at_time(u, tg, ks.T2);
  const auto f1t = mesh::at_time(ks.f1, tg, t);
  const auto f2t = mesh::at_time(ks.f2, tg, t);
  const auto f3t = mesh::at_time(ks.f3, tg, t);
  const auto f4t = mesh::at_time(ks.f4, tg, t);
  const auto win = mesh::window_weights(tg, ks.T1, ks.T2);

  std::vector<double> i1(nx, 0.0);
  for (int k = 0; k <= tg.nt; ++k) {
    if (win[k] == 0.0) continue;
    const double* r = ks.rho1.level(k);
    const double* ul = u.level(k);
    for (std::size_t p = 0; p < nx; ++p) i1[p] += win[k] * r[p] * ul[p];
  }

  for (std::size_t p = 0; p < nx; ++p) {
    out.b1[p] = f1t[p] * uT1[p];
    out.b2[p] = f2t[p] * uT2[p];
    out.b3[p] = f3t[p] * i1[p];
  }

  if (ks.k_present()) {
    out.b4 = apply_B(mesh::at_time(u, tg, t), kernel_level_at(ks, g, tg, t), g);
    std::vector<double> i2(nx, 0.0), bu;
    std::vector<double> lvl;
    for (int k = 0; k <= tg.nt; ++k) {
      if (win[k] == 0.0) continue;
      lvl = kernel_level(ks, g, tg, k);
      bu = apply_B(std::vector<double>(u.level(k), u.level(k) + nx), lvl, g);
      const double* r = ks.rho2.level(k);
      for (std::size_t p = 0; p < nx; ++p) i2[p] += win[k] * r[p] * bu[p];
    }
    for (std::size_t p = 0; p < nx; ++p) out.b5[p] = f4t[p] * i2[p];
  }

  for (std::size_t p = 0; p < nx; ++p)
    out.total[p] = out.b1[p] + out.b2[p] + out.b3[p] + out.b4[p] + out.b5[p];
  return out;
}

std::vector<double> apply_calB(const mesh::space_time_field& u,
                               const kernel_set& ks, double t,
                               const mesh::grid& g, const mesh::time_grid& tg) {
  return apply_calB_terms(u, ks, t, g, tg).total;
}

mesh::space_time_field apply_calB_trajectory(const mesh::space_time_field& u,
                                             const kernel_set& ks,
                                             const mesh::grid& g,
                                             const mesh::time_grid& tg) {
  const std::size_t nx = g.count;
  require(u.nx == nx && u.nt == tg.nt, "field shape mismatch");
  mesh::space_time_field out(tg.nt, nx);

  const auto uT1 = mesh::at_time(u, tg, ks.T1);
  const auto uT2 = mesh::at_time(u, tg, ks.T2);
  const auto win = mesh::window_weights(tg, ks.T1, ks.T2);

  std::vector<double> i1(nx, 0.0), i2(nx, 0.0);
  for (int k = 0; k <= tg.nt; ++k) {
    if (win[k] == 0.0) continue;
    const double* r = ks.rho1.level(k);
    const double* ul = u.level(k);
    for (std::size_t p = 0; p < nx; ++p) i1[p] += win[k] * r[p] * ul[p];
  }

  const bool with_k = ks.k_present();
  std::vector<std::vector<double>> bu(with_k ? tg.nt + 1 : 0);
  if (with_k) {
    std::vector<double> lvl;
    for (int k = 0; k <= tg.nt; ++k) {
      lvl = kernel_level(ks, g, tg, k);
      bu[k] = apply_B(std::vector<double>(u.level(k), u.level(k) + nx), lvl, g);
      if (win[k] != 0.0) {
        const double* r = ks.rho2.level(k);
        for (std::size_t p = 0; p < nx; ++p) i2[p] += win[k] * r[p] * bu[k][p];
      }
    }
  }

  for (int k = 0; k <= tg.nt; ++k) {
    double* o = out.level(k);
    const double* a1 = ks.f1.level(k);
    const double* a2 = ks.f2.level(k);
    const double* a3 = ks.f3.level(k);
    const double* a4 = ks.f4.level(k);
    for (std::size_t p = 0; p < nx; ++p) {
      double v = a1[p] * uT1[p] + a2[p] * uT2[p] + a3[p] * i1[p] + a4[p] * i2[p];
      if (with_k) v += bu[k][p];
      o[p] = v;
    }
  }
  return out;
}

hypothesis_report hypothesis_constants(const kernel_set& ks,
                                       const weights::weight_config& cfg,
                                       const mesh::grid& g,
                                       const mesh::time_grid& tg) {
  const std::size_t nx = g.count;
  require(cfg.psi.values.size() == nx, "weight function shape mismatch");
  const double gexp = ks.gamma_exp;
  const double pmax = psi_sup(cfg);
  const double c1 = weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max,
                                       cfg.lambda);
  const double eps_t = 1e-9 * tg.T;

  struct partial {
    log_max m1, m2, m3, m4, m5;
  };

  auto scan_levels = [&](int k_begin, int k_end, partial& acc) {
    std::vector<double> lvl;
    for (int k = k_begin; k < k_end; ++k) {
      const double t = tg.node(k);
      const double lt = weights::temporal_weight(t, tg.T);
      const double log_l = std::log(lt);
      const bool in_window = t >= ks.T1 - eps_t && t <= ks.T2 + eps_t;
      for (std::size_t p = 0; p < nx; ++p) {
        const double a =
            weights::alpha(t, cfg.psi.values[p], pmax, cfg.lambda, tg.T);
        const double r1 = std::abs(ks.rho1.at(k, p));
        if (r1 > 0.0) acc.m1.offer(std::log(r1) - cfg.s0 * a, k, p);
        if (in_window) {
          const double r2 = std::abs(ks.rho2.at(k, p));
          if (r2 > 0.0) acc.m2.offer(std::log(r2) - cfg.s0 * a, k, p);
        }
      }
      if (!ks.k_present()) continue;
      lvl = kernel_level(ks, g, tg, k);
      for (std::size_t x = 0; x < nx; ++x) {
        const double* row = lvl.data() + x * nx;
        double rs = 0.0;
        for (std::size_t y = 0; y < nx; ++y) rs += g.quad[y] * std::abs(row[y]);
        if (rs > 0.0) acc.m3.offer(gexp * log_l + std::log(rs), k, x);
      }
      for (std::size_t y = 0; y < nx; ++y) {
        const double py = cfg.psi.values[y];
        double up = 0.0, down = 0.0;
        for (std::size_t x = 0; x < nx; ++x) {
          const double a = std::abs(lvl[x * nx + y]);
          if (cfg.psi.values[x] > py)
            up += g.quad[x] * a;
          else
            down += g.quad[x] * a;
        }
        if (up > 0.0)
          acc.m4.offer((3.0 - gexp) * log_l + 2.0 * cfg.s0 * c1 / lt +
                           std::log(up),
                       k, y);
        if (down > 0.0)
          acc.m5.offer((3.0 - gexp) * log_l + std::log(down), k, y);
      }
    }
  };

  const int levels = tg.nt - 1;
  unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                        8u);
  if (workers == 0) workers = 1;
  workers = std::min<unsigned>(workers, std::max(1, levels));

  std::vector<partial> parts(workers);
  if (workers <= 1 || levels < 8) {
    scan_levels(1, tg.nt, parts[0]);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (levels + static_cast<int>(workers) - 1) /
                      static_cast<int>(workers);
    for (unsigned w = 0; w < workers; ++w) {
      const int b = 1 + static_cast<int>(w) * chunk;
      const int e = std::min(tg.nt, b + chunk);
      if (b >= e) break;
      pool.emplace_back([&, b, e, w] { scan_levels(b, e, parts[w]); });
    }
    for (auto& th : pool) th.join();
  }

  partial total;
  for (const auto& p : parts) {
    total.m1.merge(p.m1);
    total.m2.merge(p.m2);
    total.m3.merge(p.m3);
    total.m4.merge(p.m4);
    total.m5.merge(p.m5);
  }

  hypothesis_report rep;
  rep.K1 = from_log(total.m1.value, rep.finite1);
  rep.K2 = from_log(total.m2.value, rep.finite2);
  rep.K3 = from_log(total.m3.value, rep.finite3);
  rep.K4 = from_log(total.m4.value, rep.finite4);
  rep.K5 = from_log(total.m5.value, rep.finite5);
  rep.arg1 = {total.m1.level, total.m1.node};
  rep.arg2 = {total.m2.level, total.m2.node};
  rep.arg3 = {total.m3.level, total.m3.node};
  rep.arg4 = {total.m4.level, total.m4.node};
  rep.arg5 = {total.m5.level, total.m5.node};
  rep.K6 = std::max(rep.K4, rep.K5);
  rep.finite6 = rep.finite4 && rep.finite5;
  return rep;
}

double hypothesis_ratio(int j, const kernel_set& ks,
                        const weights::weight_config& cfg, const mesh::grid& g,
                        const mesh::time_grid& tg, int level,
                        std::size_t node) {
  require(j >= 1 && j <= 5, "constant index must lie in 1..5");
  if (level <= 0 || level >= tg.nt)
    throw std::domain_error("ratio defined on interior time levels only");
  const std::size_t nx = g.count;
  const double t = tg.node(level);
  const double lt = weights::temporal_weight(t, tg.T);
  const double pmax = psi_sup(cfg);

  if (j == 1 || j == 2) {
    const auto& rho = (j == 1) ? ks.rho1 : ks.rho2;
    const double v = std::abs(rho.at(level, node));
    if (v == 0.0) return 0.0;
    const double a =
        weights::alpha(t, cfg.psi.values[node], pmax, cfg.lambda, tg.T);
    return std::exp(std::log(v) - cfg.s0 * a);
  }

  const auto lvl = kernel_level(ks, g, tg, level);
  if (j == 3) {
    double rs = 0.0;
    for (std::size_t y = 0; y < nx; ++y)
      rs += g.quad[y] * std::abs(lvl[node * nx + y]);
    if (rs == 0.0) return 0.0;
    return std::exp(ks.gamma_exp * std::log(lt) + std::log(rs));
  }

  const double py = cfg.psi.values[node];
  double up = 0.0, down = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    const double a = std::abs(lvl[x * nx + node]);
    if (cfg.psi.values[x] > py)
      up += g.quad[x] * a;
    else
      down += g.quad[x] * a;
  }
  const double c1 =
      weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max, cfg.lambda);
  if (j == 4) {
    if (up == 0.0) return 0.0;
    return std::exp((3.0 - ks.gamma_exp) * std::log(lt) +
                    2.0 * cfg.s0 * c1 / lt + std::log(up));
  }
  if (down == 0.0) return 0.0;
  return std::exp((3.0 - ks.gamma_exp) * std::log(lt) + std::log(down));
}

smallness_report smallness_check(const hypothesis_report& consts,
                                 const kernel_set& ks,
                                 const weights::weight_config& cfg, double C1) {
  require(C1 > 0.0, "Carleman constant must be positive");
  require(ks.f1.nt >= 1, "multiplier fields are unset");
  smallness_report rep;
  const double T = cfg.T;
  // the multiplier fields live on a lattice matching cfg.T by construction
  mesh::time_grid tg = mesh::time_grid::make(T, ks.f1.nt);

  const double n1 = sq_norm_l2t_linfx(ks.f1, tg);
  const double n2 = sq_norm_l2t_linfx(ks.f2, tg);
  rep.f12_sq_l2t_linfx = n1 + n2;
  rep.f12_sq_linfx_l2t =
      sq_norm_linfx_l2t(ks.f1, tg) + sq_norm_linfx_l2t(ks.f2, tg);

  const double n3 = sq_norm_l2t_linfx(ks.f3, tg);
  const double n4 = sq_norm_l2t_linfx(ks.f4, tg);
  const double c1 =
      weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max, cfg.lambda);
  const double T6 = std::pow(T, 6.0) / 64.0;
  const double T3 = std::pow(T, 3.0) / 4.0;
  const double dT = ks.T2 - ks.T1;
  const double s0 = cfg.s0;

  rep.H0 = 6.0 * C1 *
           ((T6 * (1.0 / dT + std::pow(s0, 1.0 + cfg.delta)) + T3 * s0 * c1) *
                rep.f12_sq_l2t_linfx +
            T6 * dT * consts.K2 * consts.K2 * n3 +
            consts.K3 * (consts.K4 + consts.K5) +
            dT * consts.K1 * consts.K1 * consts.K3 * (consts.K4 + consts.K5) *
                n4);
  rep.bound0 = 0.5 * s0 * s0 * s0;
  rep.pass0 = rep.H0 <= rep.bound0;

  const double m = weights::m_inf(ks.T1, ks.T2, T);
  rep.H1 = 6.0 * C1 * (1.0 / m) * std::pow(s0, -(1.0 + cfg.delta)) *
           rep.f12_sq_l2t_linfx;
  rep.bound1 = 0.5 * std::exp(-cfg.lambda * psi_sup(cfg)) / s0;
  rep.pass1 = rep.H1 <= rep.bound1;
  return rep;
}

double holmgren_bound(const kernel_set& ks, const hypothesis_report& consts,
                      double t, double T) {
  if (t < 0.0 || t > T) throw std::domain_error("time outside [0,T]");
  const double base = std::sqrt(consts.K3 * consts.K6);
  if (ks.gamma_exp == 3.0) return base;
  if (t == 0.0 || t == T)
    throw std::domain_error(
        "operator bound is singular at the time endpoints for gamma < 3");
  return base * std::pow(weights::temporal_weight(t, T), ks.gamma_exp - 3.0);
}

kernel_fn separable_gaussian_kernel(const weights::weight_config& cfg,
                                    gaussian_kernel_params p) {
  const double c1 =
      weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max, cfg.lambda);
  const double T = cfg.T;
  const double s0 = cfg.s0;
  const double amp = p.amplitude;
  const double inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
  return [=](double t, double x1, double x2, double y1, double y2) {
    if (t <= 0.0 || t >= T) return 0.0;
    const double lt = t * (T - t);
    const double arg = -2.0 * s0 * c1 * (1.0 / lt - 4.0 / (T * T)) -
                       ((x1 - y1) * (x1 - y1) + (x2 - y2) * (x2 - y2)) * inv2s2;
    return amp * std::exp(arg);
  };
}

kernel_fn saturating_kernel(const weights::weight_config& cfg,
                            mesh::scalar_fn psi, double gamma_exp,
                            saturating_kernel_params p) {
  require(static_cast<bool>(psi), "saturating kernel needs the weight shape");
  const double c1 =
      weights::c1_lambda(cfg.psi.psi_min, cfg.psi.psi_max, cfg.lambda);
  const double T = cfg.T;
  const double s0 = cfg.s0;
  const double down_exp = std::max(gamma_exp - 3.0, -gamma_exp);
  return [=](double t, double x1, double x2, double y1, double y2) {
    if (t <= 0.0 || t >= T) return 0.0;
    const double lt = t * (T - t);
    const double log_l = std::log(lt);
    if (psi(x1, x2) > psi(y1, y2))
      return p.up_amplitude *
             std::exp((gamma_exp - 3.0) * log_l - 2.0 * s0 * c1 / lt);
    return p.down_amplitude * std::exp(down_exp * log_l);
  };
}

}  // namespace lcp::nonlocal
