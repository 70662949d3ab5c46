#include "aop/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

#include "aop/serialize.hpp"

#ifndef AOP_VERSION
#define AOP_VERSION "0.0.0"
#endif

namespace aop {

using nlohmann::json;

const char* tool_version() { return AOP_VERSION; }

StepRuleChoice parse_step_rule_choice(const std::string& text) {
  if (text == "scaled") return StepRuleChoice::Scaled;
  if (text == "harmonic") return StepRuleChoice::Harmonic;
  if (text == "both") return StepRuleChoice::Both;
  throw ConfigError("step rule must be harmonic, scaled or both, got '" + text + "'");
}

namespace {

std::vector<StepRule> rules_for(StepRuleChoice choice, const SystemConfig& cfg) {
  switch (choice) {
    case StepRuleChoice::Scaled:
      return {StepRule::scaled(cfg.step_factor)};
    case StepRuleChoice::Harmonic:
      return {StepRule::harmonic()};
    case StepRuleChoice::Both:
      break;
  }
  return {StepRule::scaled(cfg.step_factor), StepRule::harmonic()};
}

}  // namespace

SolveOutcome solve_constrained(const ModelConfig& cfg, StepRuleChoice choice) {
  cfg.system.validate();
  AopModel model(cfg.system, cfg.channel);
  TabularMdp mdp = TabularMdp::from_model(model);
  const SystemConfig& sys = model.config();

  std::vector<std::pair<StepRule, LambdaTrace>> traces;
  for (const StepRule& rule : rules_for(choice, sys)) {
    traces.emplace_back(rule, robbins_monro(mdp, sys.t_min_ms, rule, 0.0, sys.stop_tol,
                                            sys.max_outer_iters));
  }
  const LambdaTrace& lead = traces.front().second;
  if (!lead.converged) {
    std::cerr << "warning: " << traces.front().first.name()
              << " multiplier search stopped at the iteration cap (" << lead.iterates.size()
              << ") without meeting the stop tolerance\n";
  }
  const double lambda_search = lead.final_lambda;
  const double delta = sys.perturbation;

  double lambda_star = lambda_search;
  bool bisected = false;
  std::optional<Refinement> refinement;
  try {
    refinement.emplace(refine(mdp, sys.t_min_ms, lambda_star, delta, lead.final_policy));
  } catch (const SolverError&) {
  }
  if (!refinement || !brackets_constraint(*refinement, sys.t_min_ms)) {
    lambda_star = locate_breakpoint(mdp, sys.t_min_ms, lambda_search, delta);
    bisected = true;
    std::cerr << "note: multiplier " << lambda_search
              << " does not straddle t_min within the perturbation; bisection gives "
              << lambda_star << "\n";
    refinement.reset();
    refinement.emplace(refine(mdp, sys.t_min_ms, lambda_star, delta));
  }
  PolicyIterationResult star = policy_iteration(lambda_star, mdp, refinement->high_solve.policy);

  return SolveOutcome{cfg,           std::move(model), std::move(mdp),
                      std::move(traces), lambda_search, lead.converged,
                      lambda_star,   bisected,         std::move(star),
                      std::move(*refinement)};
}

std::vector<std::size_t> threshold_violations(const StationaryDeterministicPolicy& policy,
                                              const AopModel& model) {
  const StateSpace& space = model.space();
  if (policy.size() != space.size()) throw std::invalid_argument("policy does not fit the model");

  // Column key: (current origin, channel), which fixes the current age.
  std::map<std::pair<Origin, std::size_t>, std::vector<std::size_t>> columns;
  for (std::size_t s = 0; s < space.size(); ++s) {
    const AopState& st = space.state(s);
    columns[{st.cur_origin, st.channel_index}].push_back(s);
  }

  std::vector<std::size_t> bad;
  for (auto& [key, members] : columns) {
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return model.previous_cycle(space.state(a)) < model.previous_cycle(space.state(b));
    });
    // A wait must be at least every wait chosen at a strictly shorter previous cycle.
    double floor_wait = -1.0;
    double run_max = -1.0;
    double run_cycle = -1.0;
    for (std::size_t s : members) {
      const double cyc = model.previous_cycle(space.state(s));
      const double wait = model.wait(model.action(policy(s)).wait_index);
      if (cyc != run_cycle) {
        floor_wait = std::max(floor_wait, run_max);
        run_cycle = cyc;
      }
      if (wait < floor_wait) bad.push_back(s);
      run_max = std::max(run_max, wait);
    }
  }
  std::sort(bad.begin(), bad.end());
  return bad;
}

std::vector<Trajectory> simulate_all(const SolveOutcome& solved, std::size_t n,
                                     std::uint64_t seed) {
  std::vector<Trajectory> out;
  out.push_back(simulate(MixedPolicy{solved.mixture()}, n, seed, solved.model));
  for (Benchmark b : {Benchmark::AEZW, Benchmark::AECW, Benchmark::ALCW}) {
    out.push_back(simulate(b, n, seed, solved.model));
    if (out.back().clamped_wait) {
      std::cerr << "warning: " << to_string(b)
                << " wait clamped to 0 because local processing exceeds t_min\n";
    }
  }
  return out;
}

std::vector<double> default_tx_grid() { return {600, 700, 800, 900, 1000, 1100}; }

std::vector<double> default_cycles_grid() { return {1.0, 1.2, 1.4, 1.6, 1.8, 2.0}; }

ModelConfig with_medium_tx(ModelConfig cfg, double medium_tx_ms) {
  cfg.channel = ChannelModel::scaled_three_state(medium_tx_ms);
  return cfg;
}

ModelConfig with_cycles(ModelConfig cfg, double gigacycles) {
  cfg.system.cycles = gigacycles * 1e9;
  cfg.channel = ChannelModel::scaled_three_state(1000.0);
  return cfg;
}

namespace {

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = root_ / name;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, content);
    files_.push_back(name);
  }

  const std::filesystem::path& root() const { return root_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

std::string policy_csv(const StationaryDeterministicPolicy& p, const AopModel& model) {
  std::ostringstream os;
  write_policy_table(os, p, model);
  return os.str();
}

std::string trace_csv(const LambdaTrace& t) {
  std::ostringstream os;
  write_lambda_trace(os, t);
  return os.str();
}

void write_solve_files(OutputDir& out, const SolveOutcome& solved) {
  out.write("lambda_trace.csv", trace_csv(solved.traces.front().second));
  for (const auto& [rule, trace] : solved.traces) {
    out.write(std::string("lambda_trace_") + rule.name() + ".csv", trace_csv(trace));
  }
  out.write("policy_high.csv", policy_csv(solved.mixture().high(), solved.model));
  out.write("policy_low.csv", policy_csv(solved.mixture().low(), solved.model));

  json mix = mixture_to_json(solved.refinement, solved.lambda_star,
                             solved.model.config().t_min_ms);
  mix["lambda_search"] = solved.lambda_search;
  mix["bisected"] = solved.bisected;
  mix["perturbation"] = solved.model.config().perturbation;
  mix["multiplier_converged"] = solved.converged;
  mix["step_rule"] = solved.traces.front().first.name();
  json iters = json::object();
  for (const auto& [rule, trace] : solved.traces) {
    iters[rule.name()] = {{"iterations", trace.iterates.size()}, {"converged", trace.converged}};
  }
  mix["multiplier_search"] = iters;
  out.write("mixture.json", mix.dump(2) + "\n");
}

std::string summary_csv(const std::vector<Trajectory>& runs) {
  std::ostringstream os;
  CsvWriter csv(os);
  write_summary_header(csv);
  for (const Trajectory& t : runs) write_summary_row(csv, t);
  return os.str();
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"epoch", "age_ms", "wait_ms", "channel", "origin", "area_ms2", "relaxed_ms"});
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const UpdateRecord& r = t.records[i];
    csv.cell(i + 1)
        .cell(r.age)
        .cell(r.wait)
        .cell(r.channel)
        .cell(to_string(r.origin))
        .cell(r.area)
        .cell(r.relaxed)
        .end_row();
  }
  return os.str();
}

std::string bench_csv(const std::vector<Trajectory>& runs) {
  const double q_opt = runs.front().summary.avg_aop_ratio_of_sums;
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"policy", "n", "seed", "avg_aop_ratio_of_sums_ms", "avg_aop_mean_of_ratios_ms",
              "avg_cycle_ms", "optimal_reduction_pct"});
  for (const Trajectory& t : runs) {
    const double q = t.summary.avg_aop_ratio_of_sums;
    csv.cell(t.policy)
        .cell(t.n())
        .cell(std::to_string(t.seed))
        .cell(q)
        .cell(t.summary.avg_aop_mean_of_ratios)
        .cell(t.summary.avg_cycle)
        .cell((q - q_opt) / q * 100.0)
        .end_row();
  }
  return os.str();
}

std::string policy_diff_csv(const SolveOutcome& solved) {
  const AopModel& model = solved.model;
  const auto& star = solved.star.policy;
  const auto& high = solved.mixture().high();
  const auto& low = solved.mixture().low();
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"state_index", "prev_age_ms", "prev_wait_ms", "cur_origin", "channel", "star_wait_ms",
              "star_origin", "high_wait_ms", "high_origin", "low_wait_ms", "low_origin"});
  for (std::size_t s = 0; s < model.space().size(); ++s) {
    if (star(s) == high(s) && high(s) == low(s)) continue;
    const AopState& st = model.space().state(s);
    csv.cell(s)
        .cell(model.age_value(st.prev_age_index))
        .cell(model.wait(st.prev_wait_index))
        .cell(to_string(st.cur_origin))
        .cell(model.channel().states()[st.channel_index].label);
    for (const auto* p : {&star, &high, &low}) {
      const Action a = model.action((*p)(s));
      csv.cell(model.wait(a.wait_index)).cell(to_string(a.next_origin));
    }
    csv.end_row();
  }
  return os.str();
}

std::string threshold_csv(const StationaryDeterministicPolicy& policy, const AopModel& model) {
  const auto bad = threshold_violations(policy, model);
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"cur_origin", "channel", "cur_age_ms", "prev_cycle_ms", "wait_ms", "origin",
              "violates"});
  const StateSpace& space = model.space();
  std::vector<std::size_t> order(space.size());
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const AopState& x = space.state(a);
    const AopState& y = space.state(b);
    if (x.cur_origin != y.cur_origin) return x.cur_origin < y.cur_origin;
    if (x.channel_index != y.channel_index) return x.channel_index < y.channel_index;
    return model.previous_cycle(x) < model.previous_cycle(y);
  });
  for (std::size_t s : order) {
    const AopState& st = space.state(s);
    const Action a = model.action(policy(s));
    csv.cell(to_string(st.cur_origin))
        .cell(model.channel().states()[st.channel_index].label)
        .cell(model.current_age(st))
        .cell(model.previous_cycle(st))
        .cell(model.wait(a.wait_index))
        .cell(to_string(a.next_origin))
        .cell(std::binary_search(bad.begin(), bad.end(), s) ? "1" : "0")
        .end_row();
  }
  return os.str();
}

PolicyKind parse_policy_kind(const std::string& name, const SolveOutcome* solved) {
  if (name == "AEZW" || name == "aezw") return Benchmark::AEZW;
  if (name == "AECW" || name == "aecw") return Benchmark::AECW;
  if (name == "ALCW" || name == "alcw") return Benchmark::ALCW;
  if (name == "optimal" && solved) return MixedPolicy{solved->mixture()};
  if (name == "solved" && solved) return SolvedPolicy{solved->star.policy};
  throw ConfigError("unknown policy '" + name + "' (optimal, solved, AEZW, AECW, ALCW)");
}

struct SweepPoint {
  double x = 0.0;
  std::vector<Trajectory> runs;
};

std::string sweep_csv(const char* x_column, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({x_column, "policy", "n", "seed", "avg_aop_ratio_of_sums_ms",
              "avg_aop_mean_of_ratios_ms", "avg_cycle_ms"});
  for (const SweepPoint& p : points) {
    for (const Trajectory& t : p.runs) {
      csv.cell(p.x)
          .cell(t.policy)
          .cell(t.n())
          .cell(std::to_string(t.seed))
          .cell(t.summary.avg_aop_ratio_of_sums)
          .cell(t.summary.avg_aop_mean_of_ratios)
          .cell(t.summary.avg_cycle)
          .end_row();
    }
  }
  return os.str();
}

template <typename MakeConfig>
void run_sweep(OutputDir& out, const ExperimentSpec& spec, const ModelConfig& base,
               const std::vector<double>& grid, const char* name, const char* x_column,
               MakeConfig make_config) {
  const StepRuleChoice rules = spec.step_rule.value_or(StepRuleChoice::Scaled);
  auto run_point = [&](double x) {
    SolveOutcome solved = solve_constrained(make_config(base, x), rules);
    return SweepPoint{x, simulate_all(solved, spec.n_updates, spec.seed)};
  };

  std::vector<SweepPoint> points;
  const std::size_t workers = std::max(1u, spec.workers);
  for (std::size_t begin = 0; begin < grid.size(); begin += workers) {
    const std::size_t end = std::min(grid.size(), begin + workers);
    std::vector<std::future<SweepPoint>> batch;
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, run_point, grid[i]));
    }
    for (std::size_t i = begin; i < end; ++i) {
      SweepPoint p = batch[i - begin].get();
      std::cerr << name << ": point " << format_number(p.x) << " done\n";
      out.write(std::string(name) + "/point_" + std::to_string(i) + ".csv",
                sweep_csv(x_column, {p}));
      points.push_back(std::move(p));
    }
  }
  out.write(std::string(name) + ".csv", sweep_csv(x_column, points));
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentSpec& spec) {
  if (spec.n_updates < 1) throw ConfigError("--n-updates must be at least 1");
  const ModelConfig cfg = load_config(spec.config_path, spec.overrides);
  OutputDir out(spec.output_dir);
  const std::string& cmd = spec.command;

  if (cmd == "solve") {
    write_solve_files(out, solve_constrained(cfg, spec.step_rule.value_or(StepRuleChoice::Scaled)));
  } else if (cmd == "lambda-trace") {
    const SolveOutcome solved =
        solve_constrained(cfg, spec.step_rule.value_or(StepRuleChoice::Both));
    out.write("lambda_trace.csv", trace_csv(solved.traces.front().second));
    for (const auto& [rule, trace] : solved.traces) {
      out.write(std::string("lambda_trace_") + rule.name() + ".csv", trace_csv(trace));
    }
  } else if (cmd == "simulate") {
    std::optional<SolveOutcome> solved;
    if (spec.policy == "optimal" || spec.policy == "solved") {
      solved.emplace(solve_constrained(cfg, spec.step_rule.value_or(StepRuleChoice::Scaled)));
    }
    const AopModel model(cfg.system, cfg.channel);
    const Trajectory t = simulate(parse_policy_kind(spec.policy, solved ? &*solved : nullptr),
                                  spec.n_updates, spec.seed, solved ? solved->model : model);
    out.write("summary.csv", summary_csv({t}));
    out.write("trajectory.csv", trajectory_csv(t));
  } else if (cmd == "ratio-check") {
    const SolveOutcome solved =
        solve_constrained(cfg, spec.step_rule.value_or(StepRuleChoice::Scaled));
    const Trajectory t = simulate(MixedPolicy{solved.mixture()}, spec.n_updates, spec.seed,
                                  solved.model);
    std::ostringstream os;
    write_ratio_report(os, ratio_report(t));
    out.write("ratio.csv", os.str());
    out.write("summary.csv", summary_csv({t}));
  } else if (cmd == "policy-dump") {
    const SolveOutcome solved =
        solve_constrained(cfg, spec.step_rule.value_or(StepRuleChoice::Scaled));
    out.write("policy_star.csv", policy_csv(solved.star.policy, solved.model));
    out.write("policy_high.csv", policy_csv(solved.mixture().high(), solved.model));
    out.write("policy_low.csv", policy_csv(solved.mixture().low(), solved.model));
    out.write("policy_diff.csv", policy_diff_csv(solved));
    out.write("threshold_report.csv", threshold_csv(solved.star.policy, solved.model));
  } else if (cmd == "bench") {
    const SolveOutcome solved =
        solve_constrained(cfg, spec.step_rule.value_or(StepRuleChoice::Scaled));
    out.write("bench.csv", bench_csv(simulate_all(solved, spec.n_updates, spec.seed)));
  } else if (cmd == "sweep-tx") {
    run_sweep(out, spec, cfg, spec.grid.empty() ? default_tx_grid() : spec.grid, "sweep_tx",
              "medium_tx_ms", with_medium_tx);
  } else if (cmd == "sweep-cycles") {
    run_sweep(out, spec, cfg, spec.grid.empty() ? default_cycles_grid() : spec.grid,
              "sweep_cycles", "cycles_gigacycles", with_cycles);
  } else {
    throw ConfigError("unknown command '" + cmd + "'");
  }

  json manifest{{"command", cmd},
                {"tool_version", tool_version()},
                {"config_hash", config_hash(cfg)},
                {"seed", spec.seed},
                {"n_updates", spec.n_updates},
                {"overrides", spec.overrides},
                {"config", config_to_json(cfg)},
                {"files", out.files()}};
  out.write("manifest.json", manifest.dump(2) + "\n");
  return out.files();
}

}  // namespace aop
