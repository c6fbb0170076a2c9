#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcp/experiments.hpp"
#include "lcp/forward.hpp"
#include "lcp/io.hpp"
#include "lcp/scenario.hpp"
#include "lcp/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lcp;

// exit codes: 0 all checks pass, 1 a check failed, 2 configuration or usage
// error, 3 a hypothesis violation or numerical failure aborted the run

std::vector<double> parse_values(const std::string& joined) {
  std::vector<double> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty())
      throw scenario::config_error("--values: empty entry in '" + joined + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cur, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cur.size())
      throw scenario::config_error("--values: not a number: '" + cur + "'");
    out.push_back(v);
    cur.clear();
  };
  for (char ch : joined) {
    if (ch == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(ch)))
      cur += ch;
  }
  if (!cur.empty()) flush();
  return out;
}

int cmd_run(const std::string& config_path, int jobs,
            const std::string& out_override) {
  const auto cfg = scenario::load_scenario(config_path);
  const fs::path dir = !out_override.empty()
                           ? fs::path(out_override)
                           : !cfg.out_dir.empty() ? fs::path(cfg.out_dir)
                                                  : fs::path("out") / cfg.name;
  const auto res = experiments::run_scenario(cfg, jobs);
  experiments::write_artifacts(dir, cfg, res);
  std::cout << experiments::report_text(cfg, res);
  std::cout << "\nartifacts written to " << dir.string() << "\n";
  return res.pass ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& values_joined, int jobs,
              const std::string& out_override) {
  const auto base = scenario::load_scenario(config_path);
  auto values = parse_values(values_joined);
  std::sort(values.begin(), values.end());

  // reject a bad axis before spending any work
  {
    auto probe = base;
    if (!values.empty()) scenario::apply_numeric(probe, axis, values.front());
  }

  const fs::path dir =
      !out_override.empty()
          ? fs::path(out_override)
          : fs::path(!base.out_dir.empty() ? base.out_dir + "-sweep"
                                           : "out/" + base.name + "-sweep");

  struct cell {
    double value = 0.0;
    experiments::run_output out;
    std::exception_ptr error;
  };
  std::vector<cell> cells(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) cells[i].value = values[i];

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(
      std::max<std::size_t>(cells.size(), 1),
      jobs > 0 ? unsigned(jobs) : std::min(hw, 8u));
  auto run_cell = [&](std::size_t i) {
    try {
      auto cc = base;
      scenario::apply_numeric(cc, axis, cells[i].value);
      cells[i].out = experiments::run_scenario(cc, 1);
    } catch (...) {
      cells[i].error = std::current_exception();
    }
  };
  if (workers <= 1 || cells.size() <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1))
          run_cell(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& c : cells)
    if (c.error) std::rethrow_exception(c.error);

  fs::create_directories(dir);
  std::vector<scenario::experiment_kind> kinds;
  for (auto k : base.experiments)
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end())
      kinds.push_back(k);

  // concatenated experiment tables, keyed by the swept value
  for (auto k : kinds) {
    io::csv_table merged;
    merged.header = {axis};
    const auto cols = experiments::table_header(k);
    merged.header.insert(merged.header.end(), cols.begin(), cols.end());
    for (const auto& c : cells)
      for (const auto& e : c.out.experiments) {
        if (e.name != scenario::kind_name(k)) continue;
        for (const auto& row : e.table.rows) {
          std::vector<std::string> merged_row = {io::format_double(c.value)};
          merged_row.insert(merged_row.end(), row.begin(), row.end());
          merged.rows.push_back(std::move(merged_row));
        }
      }
    io::write_text(dir / ("sweep_" + scenario::kind_name(k) + ".csv"),
                   merged.to_string());
  }

  bool pass = true;
  std::string text;
  for (const auto& c : cells) {
    auto cc = base;
    scenario::apply_numeric(cc, axis, c.value);
    text += "=== " + axis + " = " + io::format_double(c.value) + " ===\n";
    text += experiments::report_text(cc, c.out);
    text += "\n";
    pass = pass && c.out.pass;
  }
  if (cells.empty()) {
    text = "empty sweep: no values given for axis " + axis + "\n";
  }
  io::write_text(dir / "report.txt", text);

  nlohmann::json manifest;
  manifest["scenario"] = base.name;
  manifest["version"] = lcp::version;
  manifest["config_hash"] = io::hex64(io::fnv1a64(base.source_text));
  manifest["axis"] = axis;
  manifest["pass"] = pass;
  manifest["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    double wall = 0.0;
    for (const auto& e : c.out.experiments) wall += e.wall_ms;
    manifest["cells"].push_back({{"value", c.value},
                                 {"pass", c.out.pass},
                                 {"wall_ms", wall}});
  }
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << text;
  std::cout << "artifacts written to " << dir.string() << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "laboratory for the one-sided data completion problem of "
      "integro-differential parabolic equations"};
  app.set_version_flag("--version", lcp::version);
  app.require_subcommand(1);

  std::string config_path, out_dir, axis, values;
  int jobs = 0;

  auto* run = app.add_subcommand(
      "run", "execute the experiments a scenario file selects");
  run->add_option("config", config_path, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "worker thread cap (0 = automatic)");
  run->add_option("--out", out_dir, "artifact directory");

  auto* sweep = app.add_subcommand(
      "sweep", "rerun a scenario across values of one numeric key");
  sweep->add_option("config", config_path, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "numeric config key to vary")->required();
  sweep->add_option("--values", values, "comma-separated value list")
      ->required();
  sweep->add_option("--jobs", jobs, "worker thread cap (0 = automatic)");
  sweep->add_option("--out", out_dir, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, jobs, out_dir);
    return cmd_sweep(config_path, axis, values, jobs, out_dir);
  } catch (const scenario::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const forward::picard_failure& e) {
    std::cerr << "hypothesis violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
