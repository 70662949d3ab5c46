#include "aop/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aop {

std::size_t Rng::categorical(const std::vector<double>& probabilities) {
  const double u = uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  return last_positive;  // round-off when the row sums to slightly below 1
}

const char* to_string(Benchmark b) {
  switch (b) {
    case Benchmark::AEZW: return "AEZW";
    case Benchmark::AECW: return "AECW";
    case Benchmark::ALCW: return "ALCW";
  }
  return "?";
}

std::string policy_name(const PolicyKind& kind) {
  if (std::holds_alternative<SolvedPolicy>(kind)) return "solved";
  if (std::holds_alternative<MixedPolicy>(kind)) return "optimal";
  return to_string(std::get<Benchmark>(kind));
}

BenchmarkDecision benchmark_decision(Benchmark kind, double current_age, const SystemConfig& cfg) {
  if (!(current_age > 0.0)) throw std::invalid_argument("current age must be positive");
  switch (kind) {
    case Benchmark::AEZW:
      return {0.0, Origin::Edge, false};
    case Benchmark::AECW:
      return {std::max(cfg.t_min_ms - current_age, 0.0), Origin::Edge, false};
    case Benchmark::ALCW: {
      const double wait = cfg.t_min_ms - local_processing_time(cfg);
      if (wait < 0.0) return {0.0, Origin::Local, true};
      return {wait, Origin::Local, false};
    }
  }
  throw std::invalid_argument("unknown benchmark");
}

TrajectorySummary summarize(const std::vector<UpdateRecord>& records, std::size_t count) {
  count = std::min(count, records.size());
  TrajectorySummary s;
  if (count == 0) return s;
  double area = 0.0;
  double relaxed = 0.0;
  double cycles = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const UpdateRecord& r = records[i];
    area += r.area;
    relaxed += r.relaxed;
    cycles += r.age + r.wait;
  }
  const auto n = static_cast<double>(count);
  s.avg_aop_ratio_of_sums = area / cycles;
  s.avg_aop_mean_of_ratios = relaxed / n;
  s.avg_cycle = cycles / n;
  return s;
}

namespace {

struct Decision {
  double wait_ms;
  std::size_t wait_index;  // meaningful for grid policies only
  Origin origin;
};

}  // namespace

Trajectory simulate(const PolicyKind& kind, std::size_t n, std::uint64_t seed,
                    const AopModel& model) {
  if (n == 0) throw SimulationError("simulation needs at least one update");
  const StateSpace& space = model.space();
  const StationaryDeterministicPolicy* solved = nullptr;
  const MixturePolicy* mixture = nullptr;
  if (const auto* p = std::get_if<SolvedPolicy>(&kind)) solved = &p->policy;
  if (const auto* p = std::get_if<MixedPolicy>(&kind)) mixture = &p->mixture;
  if (solved && solved->size() != space.size()) {
    throw SimulationError("solved policy does not cover the model's state space");
  }
  if (mixture && mixture->high().size() != space.size()) {
    throw SimulationError("mixture policy does not cover the model's state space");
  }

  Trajectory t;
  t.policy = policy_name(kind);
  t.seed = seed;
  t.records.reserve(n);

  Rng rng(seed);
  const SystemConfig& cfg = model.config();
  AopState state{model.age_index(Origin::Local, 0), 0, Origin::Local, 0};
  double prev_cycle = model.t_local() + model.wait(0);

  for (std::size_t epoch = 0; epoch <= n; ++epoch) {
    const double age = model.current_age(state);

    Decision d{};
    if (solved || mixture) {
      std::size_t s = 0;
      try {
        s = space.index_of(state);
      } catch (const std::out_of_range&) {
        throw SimulationError("simulated state is outside the policy's state space");
      }
      const std::size_t a =
          solved ? (*solved)(s) : mixture->action(s, rng.uniform());
      const Action action = model.action(a);
      d = {model.wait(action.wait_index), action.wait_index, action.next_origin};
    } else {
      const BenchmarkDecision b = benchmark_decision(std::get<Benchmark>(kind), age, cfg);
      t.clamped_wait = t.clamped_wait || b.clamped;
      d = {b.wait_ms, 0, b.origin};
    }

    const double cycle = age + d.wait_ms;
    if (epoch == 0) {
      t.initial_prev_cycle = cycle;
    } else {
      UpdateRecord r;
      r.age = age;
      r.wait = d.wait_ms;
      r.channel = state.channel_index;
      r.origin = state.cur_origin;
      r.area = prev_cycle * age + 0.5 * cycle * cycle;
      r.relaxed = prev_cycle / cycle * age + 0.5 * cycle;
      t.records.push_back(r);
    }

    const std::size_t next_channel = rng.categorical(model.channel().row(state.channel_index));
    state = {model.age_index(state.cur_origin, state.channel_index), d.wait_index, d.origin,
             next_channel};
    prev_cycle = cycle;
  }

  t.summary = summarize(t.records, t.records.size());
  return t;
}

std::vector<RatioPoint> ratio_report(const Trajectory& t) {
  if (t.records.empty()) throw std::invalid_argument("ratio report needs a non-empty trajectory");
  std::vector<std::size_t> grid;
  for (std::size_t decade = 1; decade <= t.n(); decade *= 10) {
    for (std::size_t m : {1, 2, 5}) {
      if (decade * m <= t.n()) grid.push_back(decade * m);
    }
    if (decade > t.n() / 10) break;
  }
  if (grid.empty() || grid.back() != t.n()) grid.push_back(t.n());

  std::vector<RatioPoint> out;
  double area = 0.0;
  double relaxed = 0.0;
  double cycles = 0.0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < t.n() && next < grid.size(); ++i) {
    const UpdateRecord& r = t.records[i];
    area += r.area;
    relaxed += r.relaxed;
    cycles += r.age + r.wait;
    if (i + 1 == grid[next]) {
      RatioPoint p;
      p.n_prefix = i + 1;
      p.q_bar = area / cycles;
      p.q_tilde = relaxed / static_cast<double>(i + 1);
      p.ratio = p.q_bar / p.q_tilde;
      out.push_back(p);
      ++next;
    }
  }
  return out;
}

std::vector<AgeBreakpoint> age_breakpoints(const Trajectory& t) {
  std::vector<AgeBreakpoint> out;
  out.reserve(t.n());
  double delivery = 0.0;
  double prev_cycle = t.initial_prev_cycle;
  for (const UpdateRecord& r : t.records) {
    delivery += r.age;
    out.push_back({delivery, prev_cycle + r.age, r.age});
    delivery += r.wait;
    prev_cycle = r.age + r.wait;
  }
  return out;
}

}  // namespace aop
