#include "lcp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lcp::mesh {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool node_on_side(const grid& g, std::size_t p, side s) {
  const int i = g.ix(p), j = g.iy(p);
  switch (s) {
    case side::left: return i == 0;
    case side::right: return i == g.n - 1;
    case side::bottom: return g.dim() == 2 && j == 0;
    case side::top: return g.dim() == 2 && j == g.n - 1;
  }
  return false;
}

// Centered first difference where possible, one-sided second order at the
// ends of the axis.
double d1_axis(const std::vector<double>& f, const grid& g, std::size_t p,
               int axis) {
  const int i = g.ix(p), j = g.iy(p);
  const int q = axis == 0 ? i : j;
  const std::size_t stride = axis == 0 ? 1 : static_cast<std::size_t>(g.n);
  const double inv2h = 1.0 / (2.0 * g.h);
  if (q == 0) return (-3.0 * f[p] + 4.0 * f[p + stride] - f[p + 2 * stride]) * inv2h;
  if (q == g.n - 1)
    return (3.0 * f[p] - 4.0 * f[p - stride] + f[p - 2 * stride]) * inv2h;
  return (f[p + stride] - f[p - stride]) * inv2h;
}

}  // namespace

grid build_mesh(domain_kind kind, int n, side gamma) {
  if (n < 3) throw std::invalid_argument("grid needs at least 3 nodes per axis");
  grid g;
  g.kind = kind;
  g.n = n;
  g.h = 1.0 / (n - 1);
  g.gamma = gamma;

  const auto coord = [n](int i) { return static_cast<double>(i) / (n - 1); };
  const auto axis_weight = [&](int i) {
    return (i == 0 || i == n - 1) ? g.h / 2.0 : g.h;
  };

  if (kind == domain_kind::interval) {
    if (gamma != side::left && gamma != side::right)
      throw std::invalid_argument("an interval boundary has only left/right");
    g.count = static_cast<std::size_t>(n);
    g.xs.resize(g.count);
    g.quad.resize(g.count);
    g.is_boundary.assign(g.count, 0);
    g.on_gamma.assign(g.count, 0);
    for (int i = 0; i < n; ++i) {
      g.xs[i] = coord(i);
      g.quad[i] = axis_weight(i);
      if (i == 0 || i == n - 1) g.is_boundary[i] = 1;
    }
    g.on_gamma[gamma == side::right ? n - 1 : 0] = 1;
  } else {
    g.count = static_cast<std::size_t>(n) * n;
    g.xs.resize(g.count);
    g.ys.resize(g.count);
    g.quad.resize(g.count);
    g.is_boundary.assign(g.count, 0);
    g.on_gamma.assign(g.count, 0);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t p = g.id(i, j);
        g.xs[p] = coord(i);
        g.ys[p] = coord(j);
        g.quad[p] = axis_weight(i) * axis_weight(j);
        if (i == 0 || i == n - 1 || j == 0 || j == n - 1) g.is_boundary[p] = 1;
        if (node_on_side(g, p, gamma)) g.on_gamma[p] = 1;
      }
  }

  for (std::size_t p = 0; p < g.count; ++p) {
    if (g.is_boundary[p])
      g.boundary_nodes.push_back(p);
    else
      g.interior_nodes.push_back(p);
    if (g.on_gamma[p]) g.gamma_nodes.push_back(p);
  }
  return g;
}

elliptic_coeffs sample_coeffs(const grid& g, const scalar_fn& a11_in,
                              const scalar_fn& a12_in, const scalar_fn& a22_in,
                              const scalar_fn& b1_in, const scalar_fn& b2_in,
                              const scalar_fn& a0_in) {
  // absent coefficients default to the Laplacian: a = I, b = 0, a0 = 0
  static const scalar_fn one = [](double, double) { return 1.0; };
  static const scalar_fn zero = [](double, double) { return 0.0; };
  const scalar_fn& a11 = a11_in ? a11_in : one;
  const scalar_fn& a12 = a12_in ? a12_in : zero;
  const scalar_fn& a22 = a22_in ? a22_in : one;
  const scalar_fn& b1 = b1_in ? b1_in : zero;
  const scalar_fn& b2 = b2_in ? b2_in : zero;
  const scalar_fn& a0 = a0_in ? a0_in : zero;
  elliptic_coeffs c;
  const bool two_d = g.dim() == 2;
  c.a11.resize(g.count);
  c.b1.resize(g.count);
  c.a0.resize(g.count);
  if (two_d) {
    c.a12.resize(g.count);
    c.a22.resize(g.count);
    c.b2.resize(g.count);
  }
  double min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.count; ++p) {
    const double x = g.xs[p];
    const double y = two_d ? g.ys[p] : 0.0;
    c.a11[p] = a11(x, y);
    c.b1[p] = b1(x, y);
    c.a0[p] = a0(x, y);
    if (two_d) {
      c.a12[p] = a12(x, y);
      c.a22[p] = a22(x, y);
      c.b2[p] = b2(x, y);
      const double tr = c.a11[p] + c.a22[p];
      const double det = c.a11[p] * c.a22[p] - c.a12[p] * c.a12[p];
      min_eig = std::min(min_eig, (tr - std::sqrt(tr * tr - 4.0 * det)) / 2.0);
    } else {
      min_eig = std::min(min_eig, c.a11[p]);
    }
  }
  c.mu0 = min_eig;
  return c;
}

elliptic_coeffs identity_coeffs(const grid& g) {
  const auto one = [](double, double) { return 1.0; };
  const auto zero = [](double, double) { return 0.0; };
  return sample_coeffs(g, one, zero, one, zero, zero, zero);
}

void validate_coeffs(const elliptic_coeffs& c, const grid& g) {
  require(c.a11.size() == g.count && c.b1.size() == g.count &&
              c.a0.size() == g.count,
          "coefficient field shape mismatch");
  if (g.dim() == 2)
    require(c.a12.size() == g.count && c.a22.size() == g.count &&
                c.b2.size() == g.count,
            "coefficient field shape mismatch");
  for (std::size_t p = 0; p < g.count; ++p) {
    double min_eig;
    if (g.dim() == 2) {
      const double tr = c.a11[p] + c.a22[p];
      const double det = c.a11[p] * c.a22[p] - c.a12[p] * c.a12[p];
      min_eig = (tr - std::sqrt(tr * tr - 4.0 * det)) / 2.0;
    } else {
      min_eig = c.a11[p];
    }
    if (!(min_eig >= c.mu0 - 1e-12))
      throw std::invalid_argument("coefficient matrix below the ellipticity bound");
  }
}

std::vector<double> apply_A(const std::vector<double>& f,
                            const elliptic_coeffs& c, const grid& g) {
  require(f.size() == g.count, "field shape mismatch");
  std::vector<double> out(g.count, 0.0);
  const double h2 = g.h * g.h;
  const double inv2h = 1.0 / (2.0 * g.h);

  if (g.dim() == 1) {
    for (int i = 1; i < g.n - 1; ++i) {
      const double ar = 0.5 * (c.a11[i] + c.a11[i + 1]);
      const double al = 0.5 * (c.a11[i - 1] + c.a11[i]);
      double v = (ar * (f[i + 1] - f[i]) - al * (f[i] - f[i - 1])) / h2;
      v += c.b1[i] * (f[i + 1] - f[i - 1]) * inv2h;
      v += c.a0[i] * f[i];
      out[i] = v;
    }
    return out;
  }

  const bool cross = std::any_of(c.a12.begin(), c.a12.end(),
                                 [](double v) { return v != 0.0; });
  std::vector<double> gx, gy;
  if (cross) {
    gx.resize(g.count);
    gy.resize(g.count);
    for (std::size_t p = 0; p < g.count; ++p) {
      gx[p] = c.a12[p] * d1_axis(f, g, p, 1);  // a12 * D2 f
      gy[p] = c.a12[p] * d1_axis(f, g, p, 0);  // a12 * D1 f
    }
  }

  const std::size_t sy = static_cast<std::size_t>(g.n);
  for (std::size_t p : g.interior_nodes) {
    const double ar = 0.5 * (c.a11[p] + c.a11[p + 1]);
    const double al = 0.5 * (c.a11[p - 1] + c.a11[p]);
    const double at = 0.5 * (c.a22[p] + c.a22[p + sy]);
    const double ab = 0.5 * (c.a22[p - sy] + c.a22[p]);
    double v = (ar * (f[p + 1] - f[p]) - al * (f[p] - f[p - 1])) / h2 +
               (at * (f[p + sy] - f[p]) - ab * (f[p] - f[p - sy])) / h2;
    if (cross)
      v += (gx[p + 1] - gx[p - 1]) * inv2h + (gy[p + sy] - gy[p - sy]) * inv2h;
    v += c.b1[p] * (f[p + 1] - f[p - 1]) * inv2h +
         c.b2[p] * (f[p + sy] - f[p - sy]) * inv2h;
    v += c.a0[p] * f[p];
    out[p] = v;
  }
  return out;
}

std::vector<double> conormal_derivative(const std::vector<double>& f,
                                        const elliptic_coeffs& c, const grid& g,
                                        const std::vector<std::size_t>& patch,
                                        side patch_side) {
  require(f.size() == g.count, "field shape mismatch");
  std::vector<double> out;
  out.reserve(patch.size());
  for (std::size_t p : patch) {
    if (!g.is_boundary[p] || !node_on_side(g, p, patch_side))
      throw std::domain_error("patch node is not on the named boundary side");
    const double dx = d1_axis(f, g, p, 0);
    double nx = 0.0, ny = 0.0;
    switch (patch_side) {
      case side::left: nx = -1.0; break;
      case side::right: nx = 1.0; break;
      case side::bottom: ny = -1.0; break;
      case side::top: ny = 1.0; break;
    }
    if (g.dim() == 1) {
      out.push_back(c.a11[p] * dx * nx);
    } else {
      const double dy = d1_axis(f, g, p, 1);
      const double fx = c.a11[p] * dx + c.a12[p] * dy;
      const double fy = c.a12[p] * dx + c.a22[p] * dy;
      out.push_back(fx * nx + fy * ny);
    }
  }
  return out;
}

double conormal_derivative(const std::vector<double>& f,
                           const elliptic_coeffs& c, const grid& g,
                           std::size_t node, side patch_side) {
  return conormal_derivative(f, c, g, std::vector<std::size_t>{node},
                             patch_side)[0];
}

double integrate(const std::vector<double>& f, const grid& g) {
  require(f.size() == g.count, "field shape mismatch");
  double s = 0.0;
  for (std::size_t p = 0; p < g.count; ++p) s += g.quad[p] * f[p];
  return s;
}

double inner(const std::vector<double>& f, const std::vector<double>& g,
             const grid& m) {
  require(f.size() == m.count && g.size() == m.count, "field shape mismatch");
  double s = 0.0;
  for (std::size_t p = 0; p < m.count; ++p) s += m.quad[p] * f[p] * g[p];
  return s;
}

double norm_l2(const std::vector<double>& f, const grid& g) {
  return std::sqrt(inner(f, f, g));
}

double grad_norm_sq(const std::vector<double>& f, const grid& g) {
  require(f.size() == g.count, "field shape mismatch");
  const double inv2h = 1.0 / (2.0 * g.h);
  double s = 0.0;
  if (g.dim() == 1) {
    for (std::size_t p : g.interior_nodes) {
      const double dx = (f[p + 1] - f[p - 1]) * inv2h;
      s += g.quad[p] * dx * dx;
    }
    return s;
  }
  const std::size_t sy = static_cast<std::size_t>(g.n);
  for (std::size_t p : g.interior_nodes) {
    const double dx = (f[p + 1] - f[p - 1]) * inv2h;
    const double dy = (f[p + sy] - f[p - sy]) * inv2h;
    s += g.quad[p] * (dx * dx + dy * dy);
  }
  return s;
}

time_grid time_grid::make(double T, int nt) {
  if (!(T > 0.0) || nt < 1) throw std::domain_error("bad time grid");
  time_grid tg;
  tg.T = T;
  tg.nt = nt;
  tg.dt = T / nt;
  return tg;
}

space_time_field sample_field(
    const grid& g, const time_grid& tg,
    const std::function<double(double, double, double)>& f) {
  space_time_field u(tg.nt, g.count);
  for (int k = 0; k <= tg.nt; ++k) {
    const double t = tg.node(k);
    double* lev = u.level(k);
    for (std::size_t p = 0; p < g.count; ++p)
      lev[p] = f(t, g.xs[p], g.dim() == 2 ? g.ys[p] : 0.0);
  }
  return u;
}

std::vector<double> window_weights(const time_grid& tg, double t1, double t2) {
  std::vector<double> w(static_cast<std::size_t>(tg.nt) + 1, 0.0);
  const double lo = std::max(t1, 0.0);
  const double hi = std::min(t2, tg.T);
  if (!(hi > lo)) return w;
  for (int k = 0; k < tg.nt; ++k) {
    const double s0 = tg.node(k), s1 = tg.node(k + 1);
    const double a = std::max(s0, lo), b = std::min(s1, hi);
    if (b <= a) continue;
    const double theta = ((a + b) / 2.0 - s0) / (s1 - s0);
    w[k] += (b - a) * (1.0 - theta);
    w[k + 1] += (b - a) * theta;
  }
  return w;
}

std::vector<double> trapezoid_weights(const time_grid& tg) {
  std::vector<double> w(static_cast<std::size_t>(tg.nt) + 1, tg.dt);
  w.front() = tg.dt / 2.0;
  w.back() = tg.dt / 2.0;
  return w;
}

namespace {
double integrate_weighted(const space_time_field& f, const grid& g,
                          const std::vector<double>& wt) {
  double s = 0.0;
  for (int k = 0; k <= f.nt; ++k) {
    if (wt[k] == 0.0) continue;
    const double* lev = f.level(k);
    double sl = 0.0;
    for (std::size_t p = 0; p < g.count; ++p) sl += g.quad[p] * lev[p];
    s += wt[k] * sl;
  }
  return s;
}
}  // namespace

double integrate(const space_time_field& f, const grid& g, const time_grid& tg) {
  require(f.nx == g.count && f.nt == tg.nt, "trajectory shape mismatch");
  return integrate_weighted(f, g, trapezoid_weights(tg));
}

double integrate(const space_time_field& f, const grid& g, const time_grid& tg,
                 double t1, double t2) {
  require(f.nx == g.count && f.nt == tg.nt, "trajectory shape mismatch");
  return integrate_weighted(f, g, window_weights(tg, t1, t2));
}

std::vector<double> at_time(const space_time_field& f, const time_grid& tg,
                            double t) {
  if (t < 0.0 || t > tg.T) throw std::domain_error("time outside [0,T]");
  const double pos = t / tg.dt;
  int k = std::min(static_cast<int>(pos), tg.nt - 1);
  const double theta = std::clamp(pos - k, 0.0, 1.0);
  std::vector<double> out(f.nx);
  const double* a = f.level(k);
  const double* b = f.level(k + 1);
  for (std::size_t p = 0; p < f.nx; ++p)
    out[p] = (1.0 - theta) * a[p] + theta * b[p];
  return out;
}

}  // namespace lcp::mesh
