// Command-line front end: solves the constrained sampling/offloading problem,
// simulates policies and writes CSV/JSON artifacts for plotting.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aop/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kSolver = 2, kSimulation = 3 };

struct Flags {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::size_t n_updates = 100000;
  std::string step_rule;
  std::vector<std::string> overrides;
  unsigned workers = 1;
  std::vector<double> grid;
  std::string policy = "optimal";
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (defaults to the built-in reference setup)");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Simulation seed")->capture_default_str();
  cmd->add_option("--n-updates", f.n_updates, "Updates per simulated trajectory")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--step-rule", f.step_rule, "Multiplier step rule")
      ->check(CLI::IsMember({"harmonic", "scaled", "both"}));
  cmd->add_option("--set", f.overrides, "Config override KEY=VALUE (repeatable)");
  cmd->add_option("--workers", f.workers, "Concurrent sweep points")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-processing sampling and offloading solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", aop::tool_version());

  Flags flags;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"solve", "Multiplier search, perturbed policies and mixture factor"},
      {"simulate", "Simulate one policy and write its trajectory"},
      {"lambda-trace", "Multiplier trajectories for the step rules"},
      {"ratio-check", "Running ratio of the exact and relaxed AoP estimators"},
      {"policy-dump", "Policy tables, their differences and the threshold report"},
      {"bench", "Optimal mixture against the three benchmark policies"},
      {"sweep-tx", "Sweep the medium-state transmission time"},
      {"sweep-cycles", "Sweep the per-update computation demand"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    if (std::string(name).rfind("sweep", 0) == 0) {
      cmd->add_option("--grid", flags.grid, "Sweep points (default grid when omitted)");
    }
    if (std::string(name) == "simulate") {
      cmd->add_option("--policy", flags.policy, "optimal, solved, AEZW, AECW or ALCW")
          ->capture_default_str();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  aop::ExperimentSpec spec;
  spec.command = app.get_subcommands().front()->get_name();
  spec.config_path = flags.config;
  spec.output_dir = flags.out;
  spec.seed = flags.seed;
  spec.n_updates = flags.n_updates;
  spec.overrides = flags.overrides;
  spec.workers = flags.workers;
  spec.grid = flags.grid;
  spec.policy = flags.policy;

  try {
    if (!flags.step_rule.empty()) spec.step_rule = aop::parse_step_rule_choice(flags.step_rule);
    const auto files = aop::run_experiment(spec);
    for (const auto& f : files) std::cout << (spec.output_dir / f).string() << "\n";
    return kOk;
  } catch (const aop::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const aop::SimulationError& e) {
    std::cerr << "simulation failure: " << e.what() << "\n";
    return kSimulation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
