#include "lcp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lcp/forward.hpp"
#include "lcp/inverse.hpp"
#include "lcp/nonlocal.hpp"
#include "lcp/version.hpp"
#include "lcp/weights.hpp"

namespace lcp::experiments {

namespace {

constexpr double kPi = 3.14159265358979323846;

using scenario::experiment_kind;
using scenario::scenario_config;
using scenario::scenario_setup;

std::string fmt(double v) { return io::format_double(v); }

/// Report for a plain inequality lhs <= rhs with no discretization slack.
estimates::estimate_report bound_report(const std::string& name,
                                        const scenario_config& c, double lhs,
                                        double rhs, const std::string& note) {
  estimates::estimate_report r;
  r.name = name;
  r.scenario = c.name;
  r.n = c.n;
  r.nt = c.nt;
  r.s = c.s0;
  r.lambda = c.lambda;
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = rhs - lhs;
  r.tolerance = 0.0;
  r.pass = r.margin >= 0.0;
  r.note = note;
  return r;
}

double rel_l2_error(const mesh::space_time_field& u,
                    const mesh::space_time_field& ref,
                    const forward::problem_data& p) {
  mesh::space_time_field d(u.nt, u.nx);
  for (std::size_t i = 0; i < d.data.size(); ++i)
    d.data[i] = u.data[i] - ref.data[i];
  const double den = forward::trajectory_norm(ref, p.grid, p.tg);
  const double num = forward::trajectory_norm(d, p.grid, p.tg);
  return den > 0 ? num / den : num;
}

double max_contraction(const forward::picard_stats& stats) {
  double worst = 0.0;
  for (std::size_t m = 1; m < stats.residuals.size(); ++m)
    if (stats.residuals[m - 1] > 0)
      worst = std::max(worst, stats.residuals[m] / stats.residuals[m - 1]);
  return worst;
}

/// Time-space samples of the exact state used by every manufactured case.
mesh::space_time_field sample_u_star(const forward::problem_data& p) {
  const bool two_d = p.grid.dim() == 2;
  return mesh::sample_field(
      p.grid, p.tg, [two_d](double t, double x, double y) {
        return std::exp(-t) * std::sin(kPi * x) *
               (two_d ? std::sin(kPi * y) : 1.0);
      });
}

/// Closed-form D_t u* - A u* for the coefficient presets; the memory part is
/// subtracted separately with the discrete operator, which both cancels the
/// quadrature error of the march exactly and needs no closed form.
mesh::space_time_field sample_analytic_source(const forward::problem_data& p,
                                              const std::string& preset) {
  const bool two_d = p.grid.dim() == 2;
  const bool variable = preset == "variable";
  return mesh::sample_field(
      p.grid, p.tg, [two_d, variable](double t, double x, double y) {
        const double et = std::exp(-t);
        const double sx = std::sin(kPi * x), cx = std::cos(kPi * x);
        if (!two_d) {
          if (!variable) return (kPi * kPi - 1.0) * et * sx;
          return et * ((kPi * kPi * (1.0 + 0.3 * x) - 1.2) * sx -
                       0.7 * kPi * cx);
        }
        const double sy = std::sin(kPi * y), cy = std::cos(kPi * y);
        if (!variable) return (2.0 * kPi * kPi - 1.0) * et * sx * sy;
        return et * ((kPi * kPi * (2.0 + 0.3 * x + 0.2 * y) - 1.2) * sx * sy -
                     0.7 * kPi * cx * sy + 0.1 * kPi * sx * cy -
                     0.3 * kPi * kPi * cx * cy);
      });
}

bool memory_present(const nonlocal::kernel_set& ks) {
  if (ks.k_present()) return true;
  for (const auto* f : {&ks.f1, &ks.f2, &ks.f3, &ks.f4})
    for (double v : f->data)
      if (v != 0.0) return true;
  return false;
}

struct mms_cell {
  std::string study;
  int n = 0, nt = 0;
  double h = 0, dt = 0, error = 0;
  int iterations = 0;
  double contraction = 0;
};

experiment_output run_forward_mms(const scenario_config& c) {
  if (c.kernel_preset == "file")
    throw scenario::config_error(
        "config key 'kernel.preset': a kernel loaded from a file is tied to "
        "one mesh and cannot be refined; pick a closed-form preset for "
        "forward-mms");

  experiment_output out;
  out.name = kind_name(experiment_kind::forward_mms);
  out.table.header = table_header(experiment_kind::forward_mms);

  const bool two_d = c.domain == "rectangle";
  const int n_dt = two_d ? std::min(c.n, 65) : c.n;
  const int nt_dt = std::min(c.nt, two_d ? 256 : 1024);
  const int n_h = std::min(c.n, two_d ? 33 : 129);
  const int nt_h = std::min(c.nt, two_d ? 16 : 64);

  double apriori = -1.0;
  auto run_cell = [&](const std::string& study, int n, int nt) {
    scenario_config cc = c;
    cc.n = n;
    cc.nt = nt;
    auto setup = scenario::build_scenario(cc);
    auto& p = setup.p;
    const auto u_star = sample_u_star(p);
    p.dirichlet = u_star;
    if (study == "dt") {
      p.f0 = forward::manufacture(p, u_star);
    } else {
      p.f0 = sample_analytic_source(p, c.coeff_preset);
      const auto mem =
          nonlocal::apply_calB_trajectory(u_star, p.kernels, p.grid, p.tg);
      for (std::size_t i = 0; i < p.f0.data.size(); ++i)
        p.f0.data[i] -= mem.data[i];
    }
    if (apriori < 0) {
      const auto consts =
          nonlocal::hypothesis_constants(p.kernels, setup.cfg, p.grid, p.tg);
      apriori = forward::picard_apriori_factor(p, consts);
    }
    std::vector<double> u0(u_star.level(0), u_star.level(0) + p.grid.count);
    const auto sol = forward::solve_ivp(p, u0);
    mms_cell cell;
    cell.study = study;
    cell.n = n;
    cell.nt = nt;
    cell.h = p.grid.h;
    cell.dt = p.tg.dt;
    cell.error = rel_l2_error(sol.u, u_star, p);
    cell.iterations = sol.stats.iterations;
    cell.contraction = max_contraction(sol.stats);
    return cell;
  };

  std::vector<mms_cell> cells;
  for (int i = 0; i < 3; ++i) cells.push_back(run_cell("dt", n_dt, nt_dt << i));
  for (int i = 0; i < 3; ++i)
    cells.push_back(run_cell("h", ((n_h - 1) << i) + 1, nt_h << (2 * i)));

  double order_dt = std::numeric_limits<double>::infinity();
  double order_h = std::numeric_limits<double>::infinity();
  double worst_contraction = 0.0;
  std::string prev_study;
  const mms_cell* prev = nullptr;
  for (const auto& cell : cells) {
    std::string order;
    if (prev && prev_study == cell.study && cell.error > 0 &&
        prev->error > 0) {
      const double o =
          cell.study == "dt"
              ? std::log2(prev->error / cell.error)
              : std::log(prev->error / cell.error) / std::log(prev->h / cell.h);
      order = fmt(o);
      (cell.study == "dt" ? order_dt : order_h) =
          std::min(cell.study == "dt" ? order_dt : order_h, o);
    }
    worst_contraction = std::max(worst_contraction, cell.contraction);
    out.table.rows.push_back({cell.study, std::to_string(cell.n),
                              std::to_string(cell.nt), fmt(cell.h),
                              fmt(cell.dt), fmt(cell.error), order,
                              std::to_string(cell.iterations),
                              fmt(cell.contraction), fmt(apriori)});
    prev_study = cell.study;
    prev = &cell;
  }

  out.reports.push_back(bound_report(
      "time refinement order", c, 0.9, order_dt,
      "worst measured order over successive step halvings against the "
      "first-order march"));
  out.reports.push_back(bound_report(
      "mesh refinement order", c, 1.8, order_h,
      "worst measured order over successive mesh halvings with the time step "
      "refined in lockstep"));
  if (apriori > 0)
    out.reports.push_back(bound_report(
        "memory iteration contraction", c, worst_contraction, apriori + 0.05,
        "observed residual ratios of the trajectory iteration against the "
        "a-priori factor " +
            fmt(apriori)));
  return out;
}

/// The five memory terms of a trajectory as separate trajectories.
std::vector<mesh::space_time_field> memory_term_fields(
    const mesh::space_time_field& v, const forward::problem_data& p) {
  std::vector<mesh::space_time_field> terms(
      5, mesh::space_time_field(p.tg.nt, p.grid.count));
  for (int k = 0; k <= p.tg.nt; ++k) {
    const auto mt =
        nonlocal::apply_calB_terms(v, p.kernels, p.tg.node(k), p.grid, p.tg);
    const std::vector<double>* parts[5] = {&mt.b1, &mt.b2, &mt.b3, &mt.b4,
                                           &mt.b5};
    for (int j = 0; j < 5; ++j)
      std::copy(parts[j]->begin(), parts[j]->end(), terms[j].level(k));
  }
  return terms;
}

/// Interior-supported manufactured trajectory with its matching reduced
/// source. Both Cauchy traces vanish on the observation patch, so the pair
/// sits squarely in the class the weighted estimates address; feeding a
/// state with a live conormal trace instead makes the calibrated constant
/// grow like s^3 with the weight parameter.
struct calibration_pair {
  mesh::space_time_field v;
  mesh::space_time_field f;
  std::vector<mesh::space_time_field> terms;
};

mesh::space_time_field pinched_state(const mesh::grid& g,
                                     const mesh::time_grid& tg) {
  const bool two_d = g.dim() == 2;
  return mesh::sample_field(g, tg, [two_d](double t, double x, double y) {
    const double sx = std::sin(kPi * x);
    const double sy = two_d ? std::sin(kPi * y) : 1.0;
    return std::exp(-t) * sx * sx * sy * sy;
  });
}

calibration_pair make_calibration_pair(const forward::problem_data& p) {
  calibration_pair out;
  out.v = pinched_state(p.grid, p.tg);
  if (memory_present(p.kernels)) out.terms = memory_term_fields(out.v, p);

  const auto dv = forward::time_derivative(out.v, p.tg);
  out.f = mesh::space_time_field(p.tg.nt, p.grid.count);
  std::vector<double> slice(p.grid.count);
  for (int k = 0; k <= p.tg.nt; ++k) {
    std::copy(out.v.level(k), out.v.level(k) + p.grid.count, slice.begin());
    const auto av = mesh::apply_A(slice, p.coeffs, p.grid);
    for (std::size_t q = 0; q < p.grid.count; ++q) {
      double mem = 0.0;
      for (const auto& term : out.terms) mem += term.at(k, q);
      out.f.at(k, q) = dv.at(k, q) - av[q] - mem;
    }
  }
  return out;
}

struct reduced_state {
  forward::problem_data p;
  weights::weight_config cfg;
  mesh::space_time_field u;
  mesh::space_time_field v;
  mesh::space_time_field f_tilde;
};

reduced_state solve_and_reduce(const scenario_config& c) {
  auto setup = scenario::build_scenario(c);
  reduced_state st;
  st.p = std::move(setup.p);
  st.cfg = std::move(setup.cfg);
  if (st.p.kernels.k_present())
    nonlocal::build_dense_cache(st.p.kernels, st.p.grid, st.p.tg);
  st.u = forward::solve_ivp(st.p, setup.u0).u;
  auto red = forward::reduce_homogeneous(st.u, st.p);
  st.v = std::move(red.v);
  st.f_tilde = std::move(red.f_tilde);
  return st;
}

experiment_output run_carleman(const scenario_config& c) {
  experiment_output out;
  out.name = kind_name(experiment_kind::carleman);
  out.table.header = table_header(experiment_kind::carleman);

  auto setup = scenario::build_scenario(c);
  if (setup.p.kernels.k_present())
    nonlocal::build_dense_cache(setup.p.kernels, setup.p.grid, setup.p.tg);
  const auto pair = make_calibration_pair(setup.p);

  // rungs beyond this see weight layers thinner than a lattice cell, where
  // the calibrated constant drifts upward until refinement restores it
  const double s_cap =
      std::min((c.n - 1) / (6.0 * c.lambda), c.nt / 12.0);

  std::vector<double> grid = c.s_values;
  if (grid.empty()) {
    const double s_lo = std::max(1.0, c.s0 / 4.0);
    for (double s = s_lo; s <= s_cap; s *= 2.0) grid.push_back(s);
    if (grid.empty()) grid = {s_lo};
  }
  std::sort(grid.begin(), grid.end());

  std::vector<estimates::carleman_report> cals;
  double c1_use = c.C1;
  for (double s : grid) {
    cals.push_back(estimates::carleman_sides(pair.v, pair.f, pair.terms, s,
                                             0.0, setup.cfg, setup.p.grid,
                                             setup.p.tg));
    if (c.C1 <= 0) c1_use = std::max(c1_use, cals.back().empirical_c1);
  }
  if (c1_use <= 0) c1_use = 1.0;  // zero state: any constant verifies

  bool all_finite = true;
  double worst_ratio = 0.0;
  std::size_t resolved = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto ver =
        estimates::carleman_sides(pair.v, pair.f, pair.terms, grid[i], c1_use,
                                  setup.cfg, setup.p.grid, setup.p.tg);
    auto rep = ver.report;
    rep.scenario = c.name;
    rep.note += " | calibrated constant " + fmt(cals[i].empirical_c1) +
                ", verified at " + fmt(c1_use);
    out.table.rows.push_back(
        {fmt(grid[i]), fmt(cals[i].empirical_c1), fmt(ver.report.lhs),
         fmt(ver.mid), fmt(ver.rhs_raw), ver.chain_pass ? "true" : "false",
         fmt(rep.margin), rep.pass ? "true" : "false"});
    out.reports.push_back(std::move(rep));
    all_finite = all_finite && std::isfinite(cals[i].empirical_c1);
    if (grid[i] <= s_cap) resolved = i + 1;
  }
  for (std::size_t i = 0; i + 1 < resolved; ++i) {
    const double a = cals[i].empirical_c1, b = cals[i + 1].empirical_c1;
    worst_ratio = std::max(worst_ratio, a > 0 ? b / a : (b > 0 ? 2.0 : 1.0));
  }

  out.reports.push_back(bound_report(
      "calibration finite", c, all_finite ? 0.0 : 1.0, 0.0,
      "every calibrated constant on the parameter grid is a finite number"));
  if (resolved >= 2)
    out.reports.push_back(bound_report(
        "calibration monotone", c, worst_ratio, 1.05,
        "calibrated constants are non-increasing (within 5%) across the " +
            std::to_string(resolved) +
            " rungs the lattice resolves (s <= " + fmt(s_cap) +
            "); coarser lattices shed the larger rungs"));
  return out;
}

experiment_output run_trace(const scenario_config& c) {
  experiment_output out;
  out.name = kind_name(experiment_kind::trace);
  out.table.header = table_header(experiment_kind::trace);

  auto st = solve_and_reduce(c);
  for (int j : {1, 2})
    for (double r0 : {0.0, c.s0})
      for (double eps : {0.5, 2.0}) {
        auto rep = estimates::trace_check(st.v, r0, eps, j, st.p.kernels,
                                          st.cfg, st.p.grid, st.p.tg);
        rep.scenario = c.name;
        out.table.rows.push_back({std::to_string(j), fmt(r0), fmt(eps),
                                  fmt(rep.lhs), fmt(rep.rhs), fmt(rep.margin),
                                  fmt(rep.tolerance),
                                  rep.pass ? "true" : "false"});
        out.reports.push_back(std::move(rep));
      }
  return out;
}

experiment_output run_terms(const scenario_config& c) {
  experiment_output out;
  out.name = kind_name(experiment_kind::terms);
  out.table.header = table_header(experiment_kind::terms);

  auto setup = scenario::build_scenario(c);
  if (setup.p.kernels.k_present())
    nonlocal::build_dense_cache(setup.p.kernels, setup.p.grid, setup.p.tg);
  const auto pair = make_calibration_pair(setup.p);
  const auto consts = nonlocal::hypothesis_constants(setup.p.kernels, setup.cfg,
                                                     setup.p.grid, setup.p.tg);
  auto reps = estimates::term_bounds(pair.v, setup.p.kernels, consts, setup.cfg,
                                     setup.p.grid, setup.p.tg);
  reps.push_back(estimates::kernel_split_check(setup.p.kernels, consts,
                                               setup.cfg, setup.p.grid,
                                               setup.p.tg));
  for (auto& rep : reps) {
    rep.scenario = c.name;
    out.table.rows.push_back({rep.name, fmt(rep.lhs), fmt(rep.rhs),
                              fmt(rep.margin), fmt(rep.tolerance),
                              rep.pass ? "true" : "false", rep.note});
    out.reports.push_back(std::move(rep));
  }
  return out;
}

experiment_output run_bihari(const scenario_config& c) {
  experiment_output out;
  out.name = kind_name(experiment_kind::bihari);
  out.table.header = table_header(experiment_kind::bihari);

  {  // constant absorption against the exponential closed form
    const auto tg = mesh::time_grid::make(c.T, 400);
    const std::size_t m = tg.nt + 1;
    const double a = 2.3, b0 = 0.7;
    const auto bound = inverse::bihari_bound(
        a, std::vector<double>(m, b0), std::vector<double>(m, 0.0), tg);
    double worst = 0.0;
    for (int k = 0; k <= tg.nt; ++k) {
      const double exact = a * std::exp(b0 * tg.node(k));
      worst = std::max(worst, std::abs(bound[k] - exact) / exact);
    }
    out.reports.push_back(
        bound_report("comparison bound: exponential closed form", c, worst,
                     1e-12, "constant absorption, no root term"));
  }
  {  // pure root term against the extremal parabola
    const auto tg = mesh::time_grid::make(1.0, 1000);
    const std::size_t m = tg.nt + 1;
    const auto bound = inverse::bihari_bound(
        0.0, std::vector<double>(m, 0.0), std::vector<double>(m, 1.0), tg);
    double worst = 0.0;
    for (int k = 0; k <= tg.nt; ++k) {
      const double tau = tg.node(k);
      worst = std::max(worst, std::abs(bound[k] - tau * tau / 4.0));
    }
    out.reports.push_back(
        bound_report("comparison bound: extremal root profile", c, worst, 1e-6,
                     "the bound is attained by the parabola (tau/2)^2"));
  }

  // the scenario's operator, kernels, and weights wrapped around the
  // interior-supported manufactured trajectory
  auto setup = scenario::build_scenario(c);
  auto& p = setup.p;
  if (p.kernels.k_present())
    nonlocal::build_dense_cache(p.kernels, p.grid, p.tg);
  const auto w_star = pinched_state(p.grid, p.tg);
  p.f0 = forward::manufacture(p, w_star);
  p.dirichlet = mesh::space_time_field(p.tg.nt, p.grid.count);
  std::vector<double> u0(w_star.level(0), w_star.level(0) + p.grid.count);
  const auto sol = forward::solve_ivp(p, u0);
  const auto red = forward::reduce_homogeneous(sol.u, p);

  double c1 = c.C1;
  if (c1 <= 0) {
    const auto cal = estimates::stability_sides(red.v, red.f_tilde, c.s0, 0.0,
                                                setup.cfg, p.grid, p.tg);
    c1 = std::max(cal.empirical_c1, 1e-12);
  }
  const auto consts =
      nonlocal::hypothesis_constants(p.kernels, setup.cfg, p.grid, p.tg);
  const auto bundle = estimates::dependence_constants(
      c.eps, p.kernels, consts, setup.cfg, c1, p.coeffs, p.grid, p.tg);
  const auto prof = inverse::make_energy_profile(sol.u, p, bundle);
  auto rep = inverse::verify_bihari(prof.z, prof.a, prof.b, prof.kk, p.tg);
  rep.scenario = c.name;
  out.reports.push_back(rep);

  const auto bound = inverse::bihari_bound(prof.a, prof.b, prof.kk, p.tg);
  for (int k = 0; k <= p.tg.nt; ++k)
    out.table.rows.push_back({std::to_string(k), fmt(p.tg.node(k)),
                              fmt(prof.z[k]), fmt(bound[k]), fmt(prof.b[k]),
                              fmt(prof.kk[k])});
  return out;
}

experiment_output run_complete(const scenario_config& c, int jobs) {
  experiment_output out;
  out.name = kind_name(experiment_kind::complete);
  out.table.header = table_header(experiment_kind::complete);

  auto setup = scenario::build_scenario(c);
  auto& p = setup.p;
  const auto truth = forward::solve_ivp(p, setup.u0).u;
  const auto obs = forward::extract_lateral_data(truth, p).conormal;

  inverse::completion_options opts;
  opts.jobs = jobs;
  const auto rec =
      c.beta >= 0 ? inverse::complete_lateral_cauchy(p, obs, c.beta, opts)
                  : inverse::complete_lateral_cauchy(p, obs, opts);

  const auto win = mesh::window_weights(p.tg, c.eps * p.tg.T, p.tg.T);
  double num = 0.0, den = 0.0;
  std::vector<double> diff(p.grid.count), lvl(p.grid.count);
  for (int k = 0; k <= p.tg.nt; ++k) {
    if (win[k] == 0.0) continue;
    for (std::size_t q = 0; q < p.grid.count; ++q) {
      diff[q] = rec.u.at(k, q) - truth.at(k, q);
      lvl[q] = truth.at(k, q);
    }
    num += win[k] * mesh::inner(diff, diff, p.grid);
    den += win[k] * mesh::inner(lvl, lvl, p.grid);
  }
  const double window_err =
      den > 0 ? std::sqrt(num / den) : std::sqrt(num);

  out.reports.push_back(bound_report(
      "completion window error", c, window_err, 1e-3,
      "relative trajectory error against the truth on the late-time window, "
      "beta = " + fmt(rec.beta)));
  out.reports.push_back(bound_report(
      "completion boundary residual", c, rec.gamma_residual, 1e-6,
      "weighted relative misfit of the reconstructed conormal trace"));
  out.reports.push_back(bound_report(
      "completion converged", c, (rec.converged && !rec.partial) ? 0.0 : 1.0,
      0.0,
      std::to_string(rec.iterations) + " iterations, converged = " +
          (rec.converged ? "true" : "false") +
          ", partial = " + (rec.partial ? "true" : "false")));

  for (std::size_t i = 0; i < rec.misfit_history.size(); ++i)
    out.table.rows.push_back(
        {std::to_string(i), fmt(rec.misfit_history[i])});
  return out;
}

experiment_output run_dependence(const scenario_config& c, int jobs) {
  experiment_output out;
  out.name = kind_name(experiment_kind::dependence);
  out.table.header = table_header(experiment_kind::dependence);

  auto setup = scenario::build_scenario(c);
  auto& p = setup.p;
  const auto truth = forward::solve_ivp(p, setup.u0).u;

  inverse::completion_options opts;
  opts.jobs = jobs;
  const auto table = inverse::dependence_experiment(
      p, truth, c.noise_levels, c.eps, c.seeds, c.beta, opts);

  for (const auto& row : table.rows)
    out.table.rows.push_back({c.name, fmt(row.eps), fmt(row.eta),
                              std::to_string(row.seed), fmt(row.beta),
                              fmt(row.error_e), fmt(row.data_d2),
                              fmt(table.slope), fmt(table.c_eps)});

  // error functional of the truth itself, the scale the floor is judged by
  const auto win = mesh::window_weights(p.tg, 2.0 * c.eps * p.tg.T, p.tg.T);
  std::vector<double> lvl(p.grid.count);
  std::copy(truth.level(p.tg.nt), truth.level(p.tg.nt) + p.grid.count,
            lvl.begin());
  double scale = mesh::inner(lvl, lvl, p.grid);
  for (int k = 0; k <= p.tg.nt; ++k) {
    if (win[k] == 0.0) continue;
    std::copy(truth.level(k), truth.level(k) + p.grid.count, lvl.begin());
    scale += 2.0 * p.coeffs.mu0 * win[k] *
             mesh::integrate(estimates::grad_sq_field(lvl, p.grid), p.grid);
  }

  out.reports.push_back(bound_report(
      "dependence noiseless floor", c, table.floor_e,
      1e-6 * std::max(scale, 1e-300),
      "reconstruction error with unperturbed data, relative to the truth's "
      "own energy " + fmt(scale)));

  std::set<double> etas(c.noise_levels.begin(), c.noise_levels.end());
  if (etas.size() >= 2) {
    std::vector<double> medians;
    for (double eta : etas) {
      std::vector<double> es;
      for (const auto& row : table.rows)
        if (row.eta == eta) es.push_back(row.error_e);
      std::sort(es.begin(), es.end());
      medians.push_back(es[es.size() / 2]);
    }
    double worst_drop = 0.0;
    for (std::size_t i = 0; i + 1 < medians.size(); ++i)
      worst_drop = std::max(worst_drop, medians[i] - medians[i + 1]);
    out.reports.push_back(bound_report(
        "dependence median monotone", c, worst_drop, 0.0,
        "median reconstruction error may not drop as the noise grows"));
    out.reports.push_back(bound_report(
        "dependence scaling slope", c, std::abs(table.slope - 1.0), 0.5,
        "log-log slope of error against squared data distance is " +
            fmt(table.slope) + ", required inside [0.5, 1.5]"));
  }
  out.reports.push_back(bound_report(
      "dependence ratio positive", c, table.c_eps > 0 ? 0.0 : 1.0, 0.0,
      "largest observed error to squared-data ratio is " + fmt(table.c_eps)));
  return out;
}

}  // namespace

std::vector<std::string> table_header(scenario::experiment_kind k) {
  switch (k) {
    case experiment_kind::forward_mms:
      return {"study", "n",     "nt",         "h",           "dt",
              "error", "order", "iterations", "contraction", "apriori"};
    case experiment_kind::carleman:
      return {"s",       "empirical_c1", "lhs",    "mid",
              "rhs_raw", "chain_pass",   "margin", "pass"};
    case experiment_kind::trace:
      return {"endpoint", "r0",     "eps",       "lhs",
              "rhs",      "margin", "tolerance", "pass"};
    case experiment_kind::terms:
      return {"name", "lhs", "rhs", "margin", "tolerance", "pass", "note"};
    case experiment_kind::bihari:
      return {"level", "tau", "state", "bound", "absorption", "root_weight"};
    case experiment_kind::complete:
      return {"iteration", "misfit"};
    case experiment_kind::dependence:
      return {"scenario", "eps",     "eta",   "seed", "beta",
              "error_e",  "data_d2", "slope", "c_eps"};
  }
  return {};
}

run_output run_scenario(const scenario_config& c, int jobs) {
  run_output out;

  const auto setup = scenario::build_scenario(c);

  {
    const auto ad = weights::check_psi_admissible(setup.cfg.psi, setup.p.grid,
                                                  setup.p.coeffs);
    auto rep = bound_report("weight admissibility", c, ad.pass ? 0.0 : 1.0,
                            0.0, ad.summary());
    rep.lhs_terms = {{"min interior value", ad.min_interior_value},
                     {"min gradient norm", ad.min_gradient_norm}};
    rep.rhs_terms = {{"max off-patch conormal", ad.max_off_gamma_conormal}};
    out.preflight.push_back(std::move(rep));
  }
  {
    const auto idr =
        weights::check_weight_identities(setup.cfg, setup.p.grid, c.nt);
    std::ostringstream note;
    note << "bounds " << (idr.bounds_hold ? "ok" : "FAIL") << ", symmetry "
         << (idr.symmetric ? "ok" : "FAIL") << ", negativity "
         << (idr.alpha_negative ? "ok" : "FAIL") << ", endpoints "
         << (idr.endpoints_zero ? "ok" : "FAIL") << ", "
         << idr.points_checked << " points";
    out.preflight.push_back(bound_report("weight identities", c,
                                         idr.pass ? 0.0 : 1.0, 0.0,
                                         note.str()));
  }

  bool gates_pass = true;
  for (const auto& r : out.preflight) gates_pass = gates_pass && r.pass;
  if (!gates_pass) {
    out.ran_experiments = false;
    out.pass = false;
    return out;
  }

  std::vector<experiment_kind> kinds;
  for (auto k : c.experiments)
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end())
      kinds.push_back(k);

  out.pass = true;
  for (auto k : kinds) {
    const auto t0 = std::chrono::steady_clock::now();
    experiment_output exp;
    switch (k) {
      case experiment_kind::forward_mms:
        exp = run_forward_mms(c);
        break;
      case experiment_kind::carleman:
        exp = run_carleman(c);
        break;
      case experiment_kind::trace:
        exp = run_trace(c);
        break;
      case experiment_kind::terms:
        exp = run_terms(c);
        break;
      case experiment_kind::bihari:
        exp = run_bihari(c);
        break;
      case experiment_kind::complete:
        exp = run_complete(c, jobs);
        break;
      case experiment_kind::dependence:
        exp = run_dependence(c, jobs);
        break;
    }
    exp.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    for (const auto& r : exp.reports) out.pass = out.pass && r.pass;
    out.experiments.push_back(std::move(exp));
  }
  out.ran_experiments = true;
  return out;
}

std::string report_text(const scenario_config& c, const run_output& out) {
  std::ostringstream os;
  os << "scenario " << c.name << ": " << c.domain << ", n = " << c.n
     << ", nt = " << c.nt << ", T = " << fmt(c.T) << ", window = ["
     << fmt(c.T1) << ", " << fmt(c.T2) << "]\n";
  os << "kernel " << c.kernel_preset << ", coefficients " << c.coeff_preset
     << ", s0 = " << fmt(c.s0) << ", lambda = " << fmt(c.lambda) << "\n\n";

  int passed = 0, total = 0;
  auto line = [&](const estimates::estimate_report& r) {
    ++total;
    passed += r.pass ? 1 : 0;
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
    if (r.s > 0) os << " (s = " << fmt(r.s) << ")";
    os << ": lhs = " << fmt(r.lhs) << ", rhs = " << fmt(r.rhs)
       << ", margin = " << fmt(r.margin) << ", tolerance = "
       << fmt(r.tolerance);
    if (!r.note.empty()) os << "\n       " << r.note;
    os << "\n";
  };

  os << "gates:\n";
  for (const auto& r : out.preflight) line(r);
  if (!out.ran_experiments) {
    os << "\nhypothesis gates failed; experiments were not run\n";
    os << "summary: " << passed << "/" << total << " checks passed\n";
    return os.str();
  }
  for (const auto& e : out.experiments) {
    os << "\nexperiment " << e.name << ":\n";
    if (e.reports.empty()) os << "  (no checks)\n";
    for (const auto& r : e.reports) line(r);
  }
  os << "\nsummary: " << passed << "/" << total << " checks passed\n";
  return os.str();
}

void write_artifacts(const std::filesystem::path& dir,
                     const scenario_config& c, const run_output& out) {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "report.txt", report_text(c, out));

  nlohmann::json manifest;
  manifest["scenario"] = c.name;
  manifest["version"] = lcp::version;
  manifest["config_hash"] = io::hex64(io::fnv1a64(c.source_text));
  manifest["pass"] = out.pass;
  manifest["gates_passed"] = out.ran_experiments;
  double total_ms = 0.0;
  manifest["experiments"] = nlohmann::json::array();
  for (const auto& e : out.experiments) {
    io::write_text(dir / (e.name + ".csv"), e.table.to_string());
    int exp_passed = 0;
    for (const auto& r : e.reports) exp_passed += r.pass ? 1 : 0;
    manifest["experiments"].push_back(
        {{"name", e.name},
         {"wall_ms", e.wall_ms},
         {"rows", e.table.rows.size()},
         {"checks_passed", exp_passed},
         {"checks_total", e.reports.size()}});
    total_ms += e.wall_ms;
  }
  manifest["total_wall_ms"] = total_ms;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace lcp::experiments
