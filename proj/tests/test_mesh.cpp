#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lcp/mesh.hpp"

using namespace lcp;

namespace {

std::vector<double> random_interior_field(const mesh::grid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> f(g.count, 0.0);
  for (auto i : g.interior_nodes) f[i] = u(rng);
  return f;
}

double order_from(double e_coarse, double e_fine) {
  return std::log2(e_coarse / e_fine);
}

}  // namespace

TEST_CASE("interval mesh nodes, masks, quadrature weights") {
  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 5, mesh::side::right);
  REQUIRE(g.count == 5u);
  const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i < 5; ++i) CHECK(g.xs[i] == expect[i]);
  CHECK(g.h == 0.25);
  CHECK(g.is_boundary[0]);
  CHECK(g.is_boundary[4]);
  CHECK_FALSE(g.is_boundary[2]);
  CHECK(g.on_gamma[4]);
  CHECK_FALSE(g.on_gamma[0]);
  CHECK(g.interior_nodes.size() == 3u);
  CHECK(g.gamma_nodes.size() == 1u);
  double total = 0.0;
  for (double w : g.quad) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.quad[0] == doctest::Approx(0.125));
  CHECK(g.quad[2] == doctest::Approx(0.25));
  CHECK_THROWS_AS(mesh::build_mesh(mesh::domain_kind::interval, 2, mesh::side::right),
                  std::invalid_argument);
}

TEST_CASE("rectangle mesh counts") {
  const auto g = mesh::build_mesh(mesh::domain_kind::rectangle, 4, mesh::side::right);
  CHECK(g.count == 16u);
  CHECK(g.boundary_nodes.size() == 12u);
  CHECK(g.gamma_nodes.size() == 4u);
  CHECK(g.interior_nodes.size() == 4u);
  double total = 0.0;
  for (double w : g.quad) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("second order operator is exact on low degree polynomials") {
  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 41, mesh::side::right);
  const auto c = mesh::identity_coeffs(g);

  std::vector<double> lin(g.count), quad(g.count), one(g.count, 1.0);
  for (std::size_t i = 0; i < g.count; ++i) {
    lin[i] = g.xs[i];
    quad[i] = g.xs[i] * g.xs[i];
  }
  const auto a_lin = mesh::apply_A(lin, c, g);
  const auto a_quad = mesh::apply_A(quad, c, g);
  for (auto i : g.interior_nodes) {
    CHECK(a_lin[i] == doctest::Approx(0.0).epsilon(1e-11));
    CHECK(std::abs(a_quad[i] - 2.0) < 1e-10);
  }

  auto c0 = c;
  c0.a0.assign(g.count, 1.0);
  const auto a_one = mesh::apply_A(one, c0, g);
  for (auto i : g.interior_nodes) CHECK(a_one[i] == doctest::Approx(1.0));
}

TEST_CASE("conormal derivative on named sides") {
  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 101, mesh::side::right);
  const auto c = mesh::identity_coeffs(g);
  std::vector<double> lin(g.count), cst(g.count, 3.0);
  for (std::size_t i = 0; i < g.count; ++i) lin[i] = g.xs[i];

  CHECK(mesh::conormal_derivative(lin, c, g, g.count - 1, mesh::side::right) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mesh::conormal_derivative(cst, c, g, 0, mesh::side::left) ==
        doctest::Approx(0.0).epsilon(1e-12));

  auto c2 = c;
  c2.a11.assign(g.count, 2.0);
  CHECK(mesh::conormal_derivative(lin, c2, g, 0, mesh::side::left) ==
        doctest::Approx(-2.0).epsilon(1e-10));
  CHECK_THROWS_AS(mesh::conormal_derivative(lin, c, g, 5, mesh::side::left),
                  std::domain_error);
}

TEST_CASE("quadrature on space and space-time") {
  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 101, mesh::side::right);
  std::vector<double> one(g.count, 1.0), sq(g.count);
  for (std::size_t i = 0; i < g.count; ++i) sq[i] = g.xs[i] * g.xs[i];
  CHECK(mesh::integrate(one, g) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(mesh::integrate(sq, g) ==
        doctest::Approx(0.33335000000000015).epsilon(1e-15));
  CHECK(std::abs(mesh::integrate(sq, g) - 1.0 / 3.0) < 1e-4);

  const auto tg = mesh::time_grid::make(1.0, 100);
  mesh::space_time_field f(tg.nt, g.count, 1.0);
  CHECK(mesh::integrate(f, g, tg) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(mesh::integrate(f, g, tg, 0.25, 0.5) ==
        doctest::Approx(0.25).epsilon(1e-13));
  // window ends that fall strictly inside a time cell are handled exactly
  CHECK(mesh::integrate(f, g, tg, 0.123, 0.671) ==
        doctest::Approx(0.548).epsilon(1e-12));
}

TEST_CASE("discrete operator is symmetric for divergence form coefficients") {
  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 33, mesh::side::right);
  auto c = mesh::sample_coeffs(
      g, [](double x, double) { return 1.0 + 0.5 * x * x; }, nullptr, nullptr,
      nullptr, nullptr, nullptr);
  const auto f = random_interior_field(g, 11);
  const auto w = random_interior_field(g, 29);
  const double lhs = mesh::inner(mesh::apply_A(f, c, g), w, g);
  const double rhs = mesh::inner(f, mesh::apply_A(w, c, g), g);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  const auto g2 = mesh::build_mesh(mesh::domain_kind::rectangle, 17, mesh::side::top);
  auto c2 = mesh::sample_coeffs(
      g2, [](double x, double y) { return 1.0 + 0.25 * x * y; },
      [](double, double) { return 0.25; },
      [](double x, double) { return 1.0 + 0.1 * x; }, nullptr, nullptr, nullptr);
  const auto f2 = random_interior_field(g2, 7);
  const auto w2 = random_interior_field(g2, 13);
  const double l2 = mesh::inner(mesh::apply_A(f2, c2, g2), w2, g2);
  const double r2 = mesh::inner(f2, mesh::apply_A(w2, c2, g2), g2);
  CHECK(l2 == doctest::Approx(r2).epsilon(1e-12));
}

TEST_CASE("negative quadratic form controls the gradient") {
  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 41, mesh::side::right);
  auto c = mesh::sample_coeffs(g, nullptr, nullptr, nullptr,
                               [](double, double) { return 1.0; }, nullptr,
                               nullptr);
  CHECK(c.mu0 == doctest::Approx(1.0));
  const double mu1 = 0.5;  // |a0| + |b|^2 / (2 mu0) with a0 = 0, b1 = 1
  for (unsigned seed = 0; seed < 100; ++seed) {
    const auto w = random_interior_field(g, 1000 + seed);
    const double quad_form = -mesh::inner(mesh::apply_A(w, c, g), w, g);
    const double grad = mesh::grad_norm_sq(w, g);
    const double mass = mesh::inner(w, w, g);
    CHECK(quad_form >= 0.5 * c.mu0 * grad - mu1 * mass - 1e-12 * (grad + mass));
  }
}

TEST_CASE("second order convergence of the interior stencil") {
  const double pi = std::acos(-1.0);
  auto run_1d = [&](std::size_t n) {
    const auto g = mesh::build_mesh(mesh::domain_kind::interval, n, mesh::side::right);
    auto c = mesh::sample_coeffs(
        g, [](double x, double) { return 1.0 + x * x; }, nullptr, nullptr,
        nullptr, nullptr, nullptr);
    std::vector<double> f(g.count), exact(g.count);
    for (std::size_t i = 0; i < g.count; ++i) {
      const double x = g.xs[i];
      f[i] = std::sin(pi * x);
      // d/dx[(1+x^2) d/dx sin(pi x)]
      exact[i] = 2.0 * x * pi * std::cos(pi * x) -
                 pi * pi * (1.0 + x * x) * std::sin(pi * x);
    }
    const auto a = mesh::apply_A(f, c, g);
    double err = 0.0;
    for (auto i : g.interior_nodes) err = std::max(err, std::abs(a[i] - exact[i]));
    return err;
  };
  const double e1 = run_1d(26), e2 = run_1d(51), e3 = run_1d(101);
  CHECK(order_from(e1, e2) > 1.8);
  CHECK(order_from(e2, e3) > 1.8);

  auto run_2d = [&](std::size_t n) {
    const auto g = mesh::build_mesh(mesh::domain_kind::rectangle, n, mesh::side::right);
    auto c = mesh::sample_coeffs(
        g, [](double, double) { return 1.0; },
        [](double, double) { return 0.25; }, [](double, double) { return 1.0; },
        nullptr, nullptr, nullptr);
    std::vector<double> f(g.count), exact(g.count);
    for (std::size_t i = 0; i < g.count; ++i) {
      const double x = g.xs[i], y = g.ys[i];
      const double sx = std::sin(pi * x), sy = std::sin(pi * y);
      const double cx = std::cos(pi * x), cy = std::cos(pi * y);
      f[i] = sx * sy;
      exact[i] = -2.0 * pi * pi * sx * sy + 2.0 * 0.25 * pi * pi * cx * cy;
    }
    const auto a = mesh::apply_A(f, c, g);
    double err = 0.0;
    for (auto i : g.interior_nodes) err = std::max(err, std::abs(a[i] - exact[i]));
    return err;
  };
  const double q1 = run_2d(11), q2 = run_2d(21), q3 = run_2d(41);
  CHECK(order_from(q1, q2) > 1.8);
  CHECK(order_from(q2, q3) > 1.8);
}

TEST_CASE("time grid and trajectory helpers") {
  const auto tg = mesh::time_grid::make(1.0, 4);
  CHECK(tg.dt == 0.25);
  CHECK(tg.node(0) == 0.0);
  CHECK(tg.node(4) == 1.0);
  CHECK(tg.node(2) == 0.5);
  CHECK_THROWS_AS(mesh::time_grid::make(0.0, 4), std::domain_error);
  CHECK_THROWS_AS(mesh::time_grid::make(1.0, 0), std::domain_error);

  const auto g = mesh::build_mesh(mesh::domain_kind::interval, 11, mesh::side::right);
  auto f = mesh::sample_field(g, tg, [](double t, double x, double) { return t * x; });
  CHECK(f.at(2, 5) == doctest::Approx(0.25));
  const auto mid = mesh::at_time(f, tg, 0.375);
  CHECK(mid[10] == doctest::Approx(0.375).epsilon(1e-14));
  CHECK_THROWS_AS(mesh::at_time(f, tg, -0.1), std::domain_error);

  const auto w = mesh::window_weights(tg, 0.25, 0.5);
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(0.25).epsilon(1e-14));
  // off-grid window is reproduced exactly for piecewise linear integrands
  const auto w2 = mesh::window_weights(tg, 0.1, 0.6);
  double s2 = 0.0, s2t = 0.0;
  for (std::size_t k = 0; k < w2.size(); ++k) {
    s2 += w2[k];
    s2t += w2[k] * tg.node(k);
  }
  CHECK(s2 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s2t == doctest::Approx(0.5 * (0.36 - 0.01)).epsilon(1e-13));
}
