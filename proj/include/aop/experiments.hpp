#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aop/config_io.hpp"
#include "aop/lagrangian.hpp"
#include "aop/simulator.hpp"

namespace aop {

/// Which multiplier step rules a run should execute.
enum class StepRuleChoice { Scaled, Harmonic, Both };

StepRuleChoice parse_step_rule_choice(const std::string& text);

struct ExperimentSpec {
  std::string command;
  std::filesystem::path config_path;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  std::size_t n_updates = 100000;
  std::optional<StepRuleChoice> step_rule;  // command-specific default when unset
  std::vector<std::string> overrides;
  unsigned workers = 1;
  std::vector<double> grid;  // sweep points; empty means the command's default grid
  std::string policy = "optimal";  // simulate only
};

/// Everything a full constrained solve produces for one configuration.
struct SolveOutcome {
  ModelConfig config;
  AopModel model;
  TabularMdp mdp;
  std::vector<std::pair<StepRule, LambdaTrace>> traces;
  double lambda_search = 0.0;  // where the multiplier search stopped
  bool converged = false;
  double lambda_star = 0.0;    // multiplier the mixture is built around
  bool bisected = false;       // lambda_star came from the bracketing fallback
  PolicyIterationResult star;  // deterministic policy at lambda_star
  Refinement refinement;

  const MixturePolicy& mixture() const { return refinement.mixture; }
};

/// Runs the multiplier search for each requested rule, then solves at the
/// resulting multiplier and blends the perturbed policies. The search result
/// comes from the Scaled rule whenever it was requested. The stop test only
/// bounds the step length, so the search can halt while the average cycle is
/// still short of t_min; when the perturbed pair then fails to straddle t_min
/// the multiplier is located by bisection instead.
SolveOutcome solve_constrained(const ModelConfig& cfg, StepRuleChoice rules);

/// Per-(current age, channel) check that the chosen wait never decreases as
/// the previous cycle grows. Returns the offending state indices.
std::vector<std::size_t> threshold_violations(const StationaryDeterministicPolicy& policy,
                                              const AopModel& model);

/// Simulates the optimal mixture and the three benchmarks, in that order.
std::vector<Trajectory> simulate_all(const SolveOutcome& solved, std::size_t n,
                                     std::uint64_t seed);

/// Default sweep grids.
std::vector<double> default_tx_grid();      // medium tx, ms
std::vector<double> default_cycles_grid();  // Gigacycles

/// Config variants for the sweeps.
ModelConfig with_medium_tx(ModelConfig cfg, double medium_tx_ms);
ModelConfig with_cycles(ModelConfig cfg, double gigacycles);

/// Executes one command and writes its artifacts plus manifest.json into
/// spec.output_dir. Returns the list of files written (relative names).
std::vector<std::string> run_experiment(const ExperimentSpec& spec);

/// The tool version recorded in every manifest.
const char* tool_version();

}  // namespace aop
