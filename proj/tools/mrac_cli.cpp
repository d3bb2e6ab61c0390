#include "mrac/batch.hpp"
#include "mrac/scenario.hpp"
#include "mrac/trace_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace mrac;

namespace {

enum Exit { ok = 0, invalid = 1, diverged = 2, violated = 3 };

int report(const ValidationError& err) {
  if (err.issues().empty()) std::cerr << "error: " << err.what() << '\n';
  for (const auto& s : err.issues()) std::cerr << "error: " << s << '\n';
  return invalid;
}

int cmd_validate(const std::string& path) {
  try {
    const ScenarioConfig cfg = load_config(path);
    std::cout << "valid: " << to_string(cfg.scheme) << "/" << to_string(cfg.domain) << '\n';
    for (const auto& note : resolve(cfg).notes) std::cout << "note: " << note << '\n';
    return ok;
  } catch (const ValidationError& err) {
    return report(err);
  }
}

int cmd_run(const std::string& path, const std::string& out_dir, bool strict) {
  ScenarioConfig cfg;
  ResolvedScenario sc;
  try {
    cfg = load_config(path);
    sc = resolve(cfg);
  } catch (const ValidationError& err) {
    return report(err);
  }
  RunOutcome out;
  try {
    out = run(sc);
  } catch (const ValidationError& err) {
    return report(err);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return diverged;
  }
  for (const auto& note : out.notes) std::cerr << "note: " << note << '\n';

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path stem = fs::path(out_dir) / cfg.name;
  if (cfg.output.trace) {
    std::ofstream f(stem.string() + ".csv");
    write_trace_csv(f, out.trace);
  }
  if (cfg.output.params) {
    std::ofstream f(stem.string() + ".params.csv");
    write_params_csv(f, out.trace);
  }
  if (cfg.output.plot) {
    std::ofstream f(stem.string() + ".dat");
    write_plot_dat(f, out.trace);
  }
  if (cfg.output.summary) {
    Json s = summary_json(out.trace);
    s["name"] = cfg.name;
    s["invariants"] = {{"evaluated", out.invariants.evaluated},
                       {"delta_v", out.invariants.delta_v},
                       {"projection", out.invariants.projection},
                       {"diagonal", out.invariants.diagonal},
                       {"violations", out.invariants.violations}};
    s["notes"] = out.notes;
    std::ofstream f(stem.string() + ".summary.json");
    f << s.dump(2) << '\n';
  }

  std::cout << cfg.name << ": " << out.trace.records.size() << " records, last-window max |e| "
            << format_double(out.trace.summary.last_window_max_e) << ", invariants "
            << (out.invariants.pass() ? "pass" : "FAIL") << '\n';
  for (const auto& v : out.invariants.violations) std::cerr << "violation: " << v << '\n';
  if (out.trace.diverged) {
    std::cerr << "diverged: " << out.trace.failure << '\n';
    return diverged;
  }
  if (strict && !out.invariants.pass()) return violated;
  return ok;
}

int cmd_batch(const std::string& path, int jobs, const std::string& out_file) {
  std::vector<BatchItem> items;
  try {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open file"});
    Json spec;
    try {
      spec = Json::parse(in);
    } catch (const Json::parse_error& err) {
      throw ConfigError({path + ": " + err.what()});
    }
    items = expand_batch(spec, std::filesystem::path(path).parent_path().string());
  } catch (const ValidationError& err) {
    return report(err);
  }
  const auto rows = jobs == 1 ? run_batch_serial(items) : run_batch_parallel(items, jobs);
  if (out_file.empty()) {
    write_batch_csv(std::cout, rows);
  } else {
    std::ofstream f(out_file);
    write_batch_csv(f, rows);
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-reference adaptive control scenario runner"};
  app.require_subcommand(1);

  std::string config, out_dir = ".", spec, table;
  bool strict = false, paper = false;
  int jobs = 0;

  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario config");
  validate->add_option("config", config, "Config file")->required();

  auto* runc = app.add_subcommand("run", "Run a scenario and write its trace");
  runc->add_option("config", config, "Config file")->required();
  runc->add_option("--out", out_dir, "Output directory");
  runc->add_flag("--strict", strict, "Exit 3 when an invariant check fails");

  auto* batch = app.add_subcommand("batch", "Run a batch or sweep spec, print a summary table");
  batch->add_option("spec", spec, "Batch spec file")->required();
  batch->add_option("--jobs", jobs, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  batch->add_option("--table", table, "Write the table here instead of stdout");

  auto* example = app.add_subcommand("example", "Print a bundled config");
  example->add_flag("--paper", paper, "The discrete single-input direct example")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : invalid;
  }

  if (*validate) return cmd_validate(config);
  if (*runc) return cmd_run(config, out_dir, strict);
  if (*batch) return cmd_batch(spec, jobs, table);
  std::cout << serialize(parse_config(paper_example_config()));
  return ok;
}
