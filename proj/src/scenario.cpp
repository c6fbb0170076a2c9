#include "lcp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "lcp/io.hpp"
#include "lcp/nonlocal.hpp"

namespace lcp::scenario {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct entry {
  std::string value;
  int line = 0;
};

[[noreturn]] void bad(const std::string& key, int line, const std::string& why) {
  std::ostringstream os;
  os << "config key '" << key << "'";
  if (line > 0) os << " (line " << line << ")";
  os << ": " << why;
  throw config_error(os.str());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, entry> tokenize(const std::string& text) {
  std::map<std::string, entry> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      bad(stripped, line, "expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) bad("(empty)", line, "missing key before '='");
    if (out.count(key))
      bad(key, line, "duplicate key, first set on line " +
                         std::to_string(out[key].line));
    out[key] = {value, line};
  }
  return out;
}

double parse_double(const std::string& key, const entry& e) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(e.value, &used);
  } catch (const std::exception&) {
    bad(key, e.line, "not a number: '" + e.value + "'");
  }
  if (used != e.value.size())
    bad(key, e.line, "trailing characters after the number: '" + e.value + "'");
  return v;
}

int parse_int(const std::string& key, const entry& e) {
  const double v = parse_double(key, e);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    bad(key, e.line, "expected an integer, got '" + e.value + "'");
  return int(v);
}

std::uint64_t parse_u64(const std::string& key, const entry& e) {
  const double v = parse_double(key, e);
  if (v < 0 || v != std::floor(v))
    bad(key, e.line, "expected a nonnegative integer, got '" + e.value + "'");
  return std::uint64_t(v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

std::vector<double> parse_double_list(const std::string& key, const entry& e) {
  std::vector<double> out;
  for (const auto& p : split_list(e.value))
    out.push_back(parse_double(key, {p, e.line}));
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& key,
                                          const entry& e) {
  std::vector<std::uint64_t> out;
  for (const auto& p : split_list(e.value))
    out.push_back(parse_u64(key, {p, e.line}));
  return out;
}

const std::vector<std::pair<std::string, experiment_kind>> kKinds = {
    {"forward-mms", experiment_kind::forward_mms},
    {"carleman", experiment_kind::carleman},
    {"trace", experiment_kind::trace},
    {"terms", experiment_kind::terms},
    {"bihari", experiment_kind::bihari},
    {"complete", experiment_kind::complete},
    {"dependence", experiment_kind::dependence},
};

void expect_choice(const std::string& key, const entry& e,
                   std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (e.value == a) return;
  std::string list;
  for (const char* a : allowed) {
    if (!list.empty()) list += " | ";
    list += a;
  }
  bad(key, e.line, "unknown value '" + e.value + "', expected " + list);
}

}  // namespace

std::string kind_name(experiment_kind k) {
  for (const auto& [name, kind] : kKinds)
    if (kind == k) return name;
  return "unknown";
}

scenario_config parse_scenario(const std::string& text) {
  auto entries = tokenize(text);
  scenario_config c;
  c.source_text = text;
  c.experiments.clear();

  auto take = [&](const char* key) -> std::optional<entry> {
    const auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    entry held = it->second;
    entries.erase(it);
    return held;
  };

  if (const auto e = take("name")) c.name = e->value;
  if (const auto e = take("mesh.domain")) {
    expect_choice("mesh.domain", *e, {"interval", "rectangle"});
    c.domain = e->value;
  }
  if (const auto e = take("mesh.n")) c.n = parse_int("mesh.n", *e);
  if (const auto e = take("mesh.nt")) c.nt = parse_int("mesh.nt", *e);
  if (const auto e = take("mesh.gamma")) {
    expect_choice("mesh.gamma", *e, {"left", "right", "bottom", "top"});
    c.gamma = e->value;
  }
  if (const auto e = take("times.T")) c.T = parse_double("times.T", *e);
  if (const auto e = take("times.T1")) c.T1 = parse_double("times.T1", *e);
  if (const auto e = take("times.T2")) c.T2 = parse_double("times.T2", *e);
  if (const auto e = take("coeffs.preset")) {
    expect_choice("coeffs.preset", *e, {"identity", "variable"});
    c.coeff_preset = e->value;
  }
  if (const auto e = take("kernel.preset")) {
    expect_choice("kernel.preset", *e,
                  {"zero", "separable-gaussian", "hypothesis-saturating",
                   "file"});
    c.kernel_preset = e->value;
  }
  if (const auto e = take("kernel.amplitude"))
    c.kernel_amplitude = parse_double("kernel.amplitude", *e);
  if (const auto e = take("kernel.sigma"))
    c.kernel_sigma = parse_double("kernel.sigma", *e);
  if (const auto e = take("kernel.up"))
    c.kernel_up = parse_double("kernel.up", *e);
  if (const auto e = take("kernel.down"))
    c.kernel_down = parse_double("kernel.down", *e);
  if (const auto e = take("kernel.gamma"))
    c.kernel_gamma = parse_double("kernel.gamma", *e);
  if (const auto e = take("kernel.path")) c.kernel_path = e->value;
  if (const auto e = take("kernel.multipliers")) {
    expect_choice("kernel.multipliers", *e, {"zero", "smooth-small"});
    c.multiplier_preset = e->value;
  }
  if (const auto e = take("weights.psi")) {
    expect_choice("weights.psi", *e, {"default", "constant"});
    c.psi_preset = e->value;
  }
  if (const auto e = take("weights.lambda"))
    c.lambda = parse_double("weights.lambda", *e);
  if (const auto e = take("weights.s0")) c.s0 = parse_double("weights.s0", *e);
  if (const auto e = take("weights.delta"))
    c.delta = parse_double("weights.delta", *e);
  if (const auto e = take("weights.C1")) c.C1 = parse_double("weights.C1", *e);
  if (const auto e = take("data.source")) {
    expect_choice("data.source", *e, {"mms", "zero"});
    c.source_preset = e->value;
  }
  if (const auto e = take("data.initial")) {
    expect_choice("data.initial", *e, {"sine", "zero"});
    c.initial_preset = e->value;
  }
  if (const auto e = take("experiment")) {
    for (const auto& part : split_list(e->value)) {
      if (part == "all") {
        for (const auto& [_, kind] : kKinds) c.experiments.push_back(kind);
        continue;
      }
      bool found = false;
      for (const auto& [name, kind] : kKinds)
        if (part == name) {
          c.experiments.push_back(kind);
          found = true;
        }
      if (!found)
        bad("experiment", e->line,
            "unknown selector '" + part +
                "', expected all or one of forward-mms | carleman | trace | "
                "terms | bihari | complete | dependence");
    }
  }
  if (const auto e = take("dependence.eps"))
    c.eps = parse_double("dependence.eps", *e);
  if (const auto e = take("dependence.noise"))
    c.noise_levels = parse_double_list("dependence.noise", *e);
  if (const auto e = take("dependence.seeds"))
    c.seeds = parse_u64_list("dependence.seeds", *e);
  if (const auto e = take("dependence.beta"))
    c.beta = parse_double("dependence.beta", *e);
  if (const auto e = take("carleman.s_values"))
    c.s_values = parse_double_list("carleman.s_values", *e);
  if (const auto e = take("seed")) c.seed = parse_u64("seed", *e);
  if (const auto e = take("output.dir")) c.out_dir = e->value;

  if (!entries.empty()) {
    const auto& [key, e] = *entries.begin();
    bad(key, e.line, "unknown key");
  }

  if (c.experiments.empty())
    for (const auto& [_, kind] : kKinds) c.experiments.push_back(kind);

  // structural invariants; anything the builders check again is fine to
  // repeat here because these messages carry the key names
  if (c.n < 3 || c.n > 513)
    bad("mesh.n", 0, "must lie in [3, 513], got " + std::to_string(c.n));
  if (c.nt < 1 || c.nt > 4096)
    bad("mesh.nt", 0, "must lie in [1, 4096], got " + std::to_string(c.nt));
  if (!(c.T > 0)) bad("times.T", 0, "horizon must be positive");
  if (!(0 < c.T1 && c.T1 < c.T2 && c.T2 < c.T))
    bad("times.T1", 0, "window must satisfy 0 < T1 < T2 < T, got T1 = " +
                           io::format_double(c.T1) +
                           ", T2 = " + io::format_double(c.T2) +
                           ", T = " + io::format_double(c.T));
  if (!(c.lambda >= 1.0)) bad("weights.lambda", 0, "must be at least 1");
  if (!(c.s0 > 0)) bad("weights.s0", 0, "must be positive");
  if (!(c.delta > 0 && c.delta < 1))
    bad("weights.delta", 0, "must lie in (0, 1)");
  if (c.C1 < 0) bad("weights.C1", 0, "must be nonnegative (0 calibrates)");
  if (!(c.kernel_gamma > 0 && c.kernel_gamma <= 3))
    bad("kernel.gamma", 0, "exponent must lie in (0, 3]");
  if (c.kernel_preset == "file" && c.kernel_path.empty())
    bad("kernel.path", 0, "required when kernel.preset = file");
  if (!(c.eps > 0 && c.eps < 0.5))
    bad("dependence.eps", 0, "cutoff fraction must lie in (0, 0.5)");
  for (double eta : c.noise_levels)
    if (eta < 0) bad("dependence.noise", 0, "noise levels must be nonnegative");
  if (c.noise_levels.empty())
    bad("dependence.noise", 0, "needs at least one noise level");
  if (c.seeds.empty()) bad("dependence.seeds", 0, "needs at least one seed");
  for (double s : c.s_values)
    if (!(s > 0)) bad("carleman.s_values", 0, "entries must be positive");
  if (c.domain == "interval" &&
      (c.gamma == "bottom" || c.gamma == "top"))
    bad("mesh.gamma", 0, "an interval has only left and right endpoints");

  return c;
}

scenario_config load_scenario(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }
  return parse_scenario(text);
}

void apply_numeric(scenario_config& c, const std::string& key, double value) {
  auto as_int = [&](int lo, int hi) {
    if (value != std::floor(value) || value < lo || value > hi)
      bad(key, 0, "sweep value must be an integer in [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "], got " +
                      io::format_double(value));
    return int(value);
  };
  if (key == "mesh.n")
    c.n = as_int(3, 513);
  else if (key == "mesh.nt")
    c.nt = as_int(1, 4096);
  else if (key == "weights.s0")
    c.s0 = value;
  else if (key == "weights.lambda")
    c.lambda = value;
  else if (key == "weights.delta")
    c.delta = value;
  else if (key == "weights.C1")
    c.C1 = value;
  else if (key == "kernel.amplitude")
    c.kernel_amplitude = value;
  else if (key == "kernel.sigma")
    c.kernel_sigma = value;
  else if (key == "kernel.gamma")
    c.kernel_gamma = value;
  else if (key == "times.T1")
    c.T1 = value;
  else if (key == "times.T2")
    c.T2 = value;
  else if (key == "eps" || key == "dependence.eps")
    c.eps = value;
  else if (key == "eta" || key == "dependence.noise")
    c.noise_levels = {value};
  else if (key == "beta" || key == "dependence.beta")
    c.beta = value;
  else if (key == "seed")
    c.seed = std::uint64_t(as_int(0, 1000000000));
  else
    bad(key, 0, "not a sweepable numeric key");
}

scenario_setup build_scenario(const scenario_config& c) {
  scenario_setup s;

  mesh::side gamma = mesh::side::right;
  if (c.gamma == "left") gamma = mesh::side::left;
  if (c.gamma == "bottom") gamma = mesh::side::bottom;
  if (c.gamma == "top") gamma = mesh::side::top;
  const auto kind = c.domain == "interval" ? mesh::domain_kind::interval
                                           : mesh::domain_kind::rectangle;
  s.p.grid = mesh::build_mesh(kind, c.n, gamma);
  s.p.tg = mesh::time_grid::make(c.T, c.nt);

  if (c.coeff_preset == "identity") {
    s.p.coeffs = mesh::identity_coeffs(s.p.grid);
  } else {
    s.p.coeffs = mesh::sample_coeffs(
        s.p.grid, [](double x, double) { return 1.0 + 0.3 * x; },
        [](double, double) { return 0.15; },
        [](double, double y) { return 1.0 + 0.2 * y; },
        [](double, double) { return 0.4; },
        [](double, double) { return -0.3; },
        [](double, double) { return 0.2; });
  }

  s.cfg.lambda = c.lambda;
  s.cfg.s0 = c.s0;
  s.cfg.delta = c.delta;
  s.cfg.T = c.T;
  if (c.psi_preset == "default") {
    s.cfg.psi = weights::default_psi(s.p.grid);
    if (s.p.grid.dim() == 2) {
      // bow the level sets away from the untracked edges so the conormal
      // stays nonpositive there under every coefficient preset
      const bool lateral = s.p.grid.gamma == mesh::side::left ||
                           s.p.grid.gamma == mesh::side::right;
      for (std::size_t p = 0; p < s.p.grid.count; ++p) {
        const double eta = lateral ? s.p.grid.ys[p] : s.p.grid.xs[p];
        s.cfg.psi.values[p] += 0.2 * eta * (1.0 - eta);
        const double slope = 0.2 * (1.0 - 2.0 * eta);
        if (lateral)
          s.cfg.psi.grad_y[p] += slope;
        else
          s.cfg.psi.grad_x[p] += slope;
      }
      s.cfg.psi.psi_min = std::numeric_limits<double>::infinity();
      s.cfg.psi.psi_max = -std::numeric_limits<double>::infinity();
      for (double v : s.cfg.psi.values) {
        s.cfg.psi.psi_min = std::min(s.cfg.psi.psi_min, v);
        s.cfg.psi.psi_max = std::max(s.cfg.psi.psi_max, v);
      }
    }
  } else {
    // designed inadmissible profile: flat, so the gradient check must fail
    s.cfg.psi.values.assign(s.p.grid.count, 1.0);
    s.cfg.psi.grad_x.assign(s.p.grid.count, 0.0);
    if (s.p.grid.dim() == 2) s.cfg.psi.grad_y.assign(s.p.grid.count, 0.0);
    s.cfg.psi.psi_max = 1.0;
    s.cfg.psi.psi_min = 1.0;
  }

  s.p.kernels = nonlocal::zero_kernels(s.p.grid, s.p.tg, c.T1, c.T2);
  s.p.kernels.gamma_exp = c.kernel_gamma;
  if (c.kernel_preset == "separable-gaussian") {
    s.p.kernels.k = nonlocal::separable_gaussian_kernel(
        s.cfg, {c.kernel_amplitude, c.kernel_sigma});
  } else if (c.kernel_preset == "hypothesis-saturating") {
    const bool two_d = s.p.grid.dim() == 2;
    mesh::scalar_fn psi_fn =
        two_d ? mesh::scalar_fn([](double x, double y) {
          return 0.5 * (x + y);
        })
              : mesh::scalar_fn([](double x, double) { return x; });
    s.p.kernels.k = nonlocal::saturating_kernel(
        s.cfg, psi_fn, c.kernel_gamma, {c.kernel_up, c.kernel_down});
  } else if (c.kernel_preset == "file") {
    const auto a = io::load_array(c.kernel_path);
    const std::uint64_t nx = s.p.grid.count;
    if (a.dims.size() != 3 || a.dims[0] != std::uint64_t(c.nt) + 1 ||
        a.dims[1] != nx || a.dims[2] != nx)
      bad("kernel.path", 0,
          "dense kernel must have extents (nt+1, nodes, nodes) = (" +
              std::to_string(c.nt + 1) + ", " + std::to_string(nx) + ", " +
              std::to_string(nx) + ")");
    s.p.kernels.k_dense = a.data;
    s.p.kernels.k_dense_valid = true;
  }
  if (c.multiplier_preset == "smooth-small") {
    s.p.kernels.f1 = mesh::sample_field(
        s.p.grid, s.p.tg,
        [](double t, double x, double) { return 0.1 * std::sin(t + x); });
    s.p.kernels.f2 = mesh::sample_field(
        s.p.grid, s.p.tg,
        [](double t, double x, double) { return 0.08 * std::cos(t) * x; });
    s.p.kernels.f3 = mesh::sample_field(
        s.p.grid, s.p.tg,
        [](double, double x, double) { return 0.15 * x; });
    s.p.kernels.f4 = mesh::sample_field(
        s.p.grid, s.p.tg,
        [](double t, double, double) { return 0.1 + 0.05 * t; });
    // the all-time trace multiplier must be dominated by the inverse
    // weight, which a window-supported bump satisfies with a finite norm
    const double T1 = c.T1, T2 = c.T2;
    s.p.kernels.rho1 = mesh::sample_field(
        s.p.grid, s.p.tg, [T1, T2](double t, double x, double) {
          if (t <= T1 || t >= T2) return 0.0;
          const double arg = std::sin(kPi * (t - T1) / (T2 - T1));
          return (1.0 + t * x) * arg * arg;
        });
    s.p.kernels.rho2 = mesh::sample_field(
        s.p.grid, s.p.tg,
        [](double t, double, double) { return std::sin(t); });
  }
  nonlocal::validate_kernel_set(s.p.kernels, s.p.tg);

  const bool two_d = s.p.grid.dim() == 2;
  s.u_star = mesh::sample_field(
      s.p.grid, s.p.tg, [two_d](double t, double x, double y) {
        const double core = std::sin(kPi * x) * (two_d ? std::sin(kPi * y) : 1.0);
        return std::exp(-t) * core;
      });
  s.has_u_star = c.source_preset == "mms";

  // the manufactured state vanishes on the whole boundary, so the lateral
  // data of every preset is the zero field
  s.p.dirichlet = mesh::space_time_field(c.nt, s.p.grid.count);
  if (s.has_u_star)
    s.p.f0 = forward::manufacture(s.p, s.u_star);
  else
    s.p.f0 = mesh::space_time_field(c.nt, s.p.grid.count);

  if (c.initial_preset == "sine") {
    s.u0.assign(s.u_star.level(0), s.u_star.level(0) + s.p.grid.count);
  } else {
    s.u0.assign(s.p.grid.count, 0.0);
  }

  forward::validate_problem(s.p);
  return s;
}

}  // namespace lcp::scenario
