#include <doctest.h>

#include <cmath>
#include <limits>

#include "aop/lagrangian.hpp"
#include "support.hpp"

using namespace aop;
using testing::Gen;

namespace {

// One state, two self-loop actions: a short cheap cycle and a long costly one.
// The Lagrange rewards cross at lambda = (cost_long - cost_short) / (3 - 1).
TabularMdp two_choice(double cost_short = 0.0, double cost_long = 1.0) {
  TabularMdp mdp(1, 2);
  mdp.at(0, 0) = TabularMdp::Entry{cost_short, 1.0, {{0, 1.0}}};
  mdp.at(0, 1) = TabularMdp::Entry{cost_long, 3.0, {{0, 1.0}}};
  return mdp;
}

}  // namespace

TEST_CASE("step rules") {
  CHECK(StepRule::harmonic().step(4) == 0.25);
  CHECK(StepRule::scaled(1e-3).step(4) == doctest::Approx(2.5e-4));
  CHECK(std::string(StepRule::harmonic().name()) == "harmonic");
  CHECK(std::string(StepRule::scaled(0.1).name()) == "scaled");
}

TEST_CASE("perturbed multipliers") {
  const auto m = perturbed_multipliers(0.5, 3e-5);
  CHECK(m.high == doctest::Approx(0.50003));
  CHECK(m.low == doctest::Approx(0.49997));
  CHECK_FALSE(m.clamped);

  const auto at_zero = perturbed_multipliers(0.0, 3e-5);
  CHECK(at_zero.high == 3e-5);
  CHECK(at_zero.low == 0.0);
  CHECK(at_zero.clamped);

  CHECK_THROWS_AS(perturbed_multipliers(0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(perturbed_multipliers(-0.1, 1e-3), std::invalid_argument);
}

TEST_CASE("randomization factor") {
  CHECK(randomization_factor(1250, 1150, 1200).q == doctest::Approx(0.5));
  CHECK(randomization_factor(1250, 1150, 1150).q == 0.0);
  CHECK(randomization_factor(1300, 1100, 1250).q == doctest::Approx(0.75));
  CHECK_FALSE(randomization_factor(1300, 1100, 1250).degenerate);

  const auto same = randomization_factor(1300, 1300, 1200);
  CHECK(same.q == 1.0);
  CHECK(same.degenerate);
  CHECK_THROWS_AS(randomization_factor(1100, 1100, 1200), SolverError);
  CHECK_THROWS_AS(randomization_factor(1250, 1150, 1300), SolverError);
  CHECK_THROWS_AS(randomization_factor(1250, 1150, 1100), SolverError);
}

TEST_CASE("mixture policy") {
  const StationaryDeterministicPolicy high{{1, 1, 2}};
  const StationaryDeterministicPolicy low{{1, 0, 2}};

  CHECK_THROWS_AS(MixturePolicy(high, low, 0.5, 1300, 1100, 1250, false), std::invalid_argument);
  CHECK_THROWS_AS(MixturePolicy(high, low, 1.5, 1300, 1100, 1250, true), std::invalid_argument);

  const MixturePolicy m(high, low, 0.75, 1300, 1100, 1250, false);
  CHECK(m.differing_states() == std::vector<std::size_t>{1});
  CHECK(mixture_action(m, 1, 0.7) == 1);
  CHECK(mixture_action(m, 1, 0.8) == 0);
  for (double draw : {0.0, 0.3, 0.9, 0.999}) {
    CHECK(mixture_action(m, 0, draw) == 1);
    CHECK(mixture_action(m, 2, draw) == 2);
  }

  const MixturePolicy always_high(high, low, 1.0, 1300, 1100, 1300, false);
  const MixturePolicy always_low(high, low, 0.0, 1300, 1100, 1100, false);
  Gen g(3);
  for (int i = 0; i < 100; ++i) {
    const double draw = g.uniform();
    CHECK(always_high.action(1, draw) == 1);
    CHECK(always_low.action(1, draw) == 0);
  }
}

TEST_CASE("evaluation cache agrees with the stacked solve") {
  const AopModel m = testing::reference_model();
  const TabularMdp mdp = TabularMdp::from_model(m);
  PolicyEvaluationCache cache(mdp);
  Gen g(808);
  int checked = 0;
  while (checked < 6) {
    const auto p = testing::random_policy(g, mdp.num_states(), mdp.num_actions());
    if (recurrent_classes(policy_transition_matrix(p, mdp)).size() != 1) continue;
    const double lambda = g.between(0.0, 1.0);
    const auto direct = evaluate_policy(p, lambda, mdp);
    const auto cached = cache.evaluate(p, lambda);
    const double scale = 1.0 + direct.bias.cwiseAbs().maxCoeff();
    CHECK((direct.gain - cached.gain).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    CHECK((direct.bias - cached.bias).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    const PolicyMetrics& met = cache.metrics(p);
    CHECK(met.avg_cycle == doctest::Approx(policy_metrics(p, 0.0, mdp).avg_cycle).epsilon(1e-12));
    ++checked;
  }
  CHECK(cache.size() >= 6);

  for (double lambda : {0.0, 0.4, 0.9}) {
    const auto a = policy_iteration(lambda, mdp);
    const auto b = cache.solve(lambda, std::nullopt);
    CHECK(a.policy == b.policy);
    CHECK(a.solution.scalar_gain() == doctest::Approx(b.solution.scalar_gain()).epsilon(1e-12));
  }
}

TEST_CASE("multiplier search with an inactive constraint stays at zero") {
  const TabularMdp mdp = TabularMdp::from_model(testing::reference_model());
  const LambdaTrace t = robbins_monro(mdp, 0.0, StepRule::scaled(1e-3), 0.0, 1e-4, 1000);
  CHECK(t.converged);
  CHECK(t.iterates.size() == 1);
  CHECK(t.final_lambda == 0.0);

  CHECK_THROWS_AS(robbins_monro(mdp, 1200, StepRule::harmonic(), -1.0, 1e-4, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(robbins_monro(mdp, 1200, StepRule::harmonic(), 0.0, 1e-4, 0),
                  std::invalid_argument);
}

TEST_CASE("multiplier search on the reference model") {
  const TabularMdp mdp = TabularMdp::from_model(testing::reference_model());

  const LambdaTrace scaled = robbins_monro(mdp, 1200, StepRule::scaled(1e-3), 0.0, 1e-4, 100000);
  CHECK(scaled.converged);
  CHECK(scaled.iterates.size() >= 100);
  CHECK(scaled.iterates.size() <= 1000);
  for (std::size_t i = 0; i < scaled.iterates.size(); ++i) {
    CHECK(scaled.iterates[i].k == static_cast<int>(i) + 1);
    CHECK(scaled.iterates[i].lambda >= 0.0);
  }
  CHECK(scaled.final_lambda == scaled.iterates.back().lambda);

  // T-bar is piecewise constant in lambda, so individual moves can grow when
  // the policy switches; the envelope eps/k * max|gap| still shrinks, and so
  // does the largest move within each successive quarter of the run.
  const auto& it = scaled.iterates;
  double max_gap = 0.0;
  for (const auto& x : it) max_gap = std::max(max_gap, std::abs(1200.0 - x.avg_cycle));
  for (std::size_t i = 0; i + 1 < it.size(); ++i) {
    const double move = std::abs(it[i + 1].lambda - it[i].lambda);
    CHECK(move <= StepRule::scaled(1e-3).step(it[i].k) * max_gap * (1 + 1e-12));
  }
  const std::size_t quarter = it.size() / 4;
  double prev_max = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < 4; ++q) {
    double window_max = 0.0;
    for (std::size_t i = q * quarter; i < (q + 1) * quarter && i + 1 < it.size(); ++i) {
      window_max = std::max(window_max, std::abs(it[i + 1].lambda - it[i].lambda));
    }
    CHECK(window_max <= prev_max);
    prev_max = window_max;
  }

  const LambdaTrace harmonic = robbins_monro(mdp, 1200, StepRule::harmonic(), 0.0, 1e-4, 10000);
  CHECK_FALSE(harmonic.converged);
  CHECK(harmonic.iterates.size() == 10000);
}

TEST_CASE("refine on a constructed two-action model") {
  const TabularMdp mdp = two_choice();
  const Refinement r = refine(mdp, 2.0, 0.5, 1e-3);
  CHECK(r.high_metrics.avg_cycle == 3.0);
  CHECK(r.low_metrics.avg_cycle == 1.0);
  CHECK(r.mixture.q() == doctest::Approx(0.5));
  CHECK_FALSE(r.mixture.degenerate());
  CHECK(r.mixture.differing_states() == std::vector<std::size_t>{0});
  CHECK(brackets_constraint(r, 2.0));

  // t_min above every achievable cycle.
  CHECK_THROWS_AS(refine(mdp, 4.0, 0.5, 1e-3), SolverError);

  // Both perturbed solves sit above the crossing and return the same feasible
  // policy; the mixture collapses to it, but the pair does not straddle t_min.
  const Refinement above = refine(mdp, 2.0, 0.8, 1e-3);
  CHECK(above.mixture.degenerate());
  CHECK(above.mixture.q() == 1.0);
  CHECK_FALSE(brackets_constraint(above, 2.0));
}

TEST_CASE("refine with a single admissible policy is degenerate") {
  TabularMdp mdp(1, 1);
  mdp.at(0, 0) = TabularMdp::Entry{5.0, 4.0, {{0, 1.0}}};
  const Refinement r = refine(mdp, 3.0, 0.0, 0.05);
  CHECK(r.mixture.degenerate());
  CHECK(r.mixture.q() == 1.0);
  CHECK(r.multipliers.clamped);
}

TEST_CASE("locate_breakpoint") {
  const TabularMdp mdp = two_choice();
  const double lambda = locate_breakpoint(mdp, 2.0, 0.1, 1e-4);
  CHECK(std::abs(lambda - 0.5) <= 1e-4);
  const Refinement r = refine(mdp, 2.0, lambda, 1e-4);
  CHECK(brackets_constraint(r, 2.0));
  CHECK(r.mixture.q() == doctest::Approx(0.5));

  CHECK(locate_breakpoint(mdp, 1.0, 0.3, 1e-4) == 0.0);
  CHECK_THROWS_AS(locate_breakpoint(mdp, 5.0, 0.3, 1e-4), SolverError);
  CHECK_THROWS_AS(locate_breakpoint(mdp, 2.0, 0.3, 0.0), std::invalid_argument);
}

TEST_CASE("refine on reference brackets t_min with nearly identical policies") {
  const TabularMdp mdp = TabularMdp::from_model(testing::reference_model());
  const LambdaTrace t = robbins_monro(mdp, 1200, StepRule::scaled(1e-3), 0.0, 1e-4, 100000);
  const Refinement r = refine(mdp, 1200, t.final_lambda, 3e-5, t.final_policy);
  CHECK(brackets_constraint(r, 1200));
  CHECK(r.mixture.t_low() <= 1200.0);
  CHECK(r.mixture.t_high() >= 1200.0);
  CHECK(std::abs(r.mixture.q() * r.mixture.t_high() + (1 - r.mixture.q()) * r.mixture.t_low() -
                 1200.0) <= 1e-9);
  CHECK(r.mixture.differing_states().size() <= 2);
  CHECK(policy_iteration(t.final_lambda, mdp, t.final_policy).policy == r.mixture.high());
}

TEST_CASE("property: averages are monotone in the multiplier") {
  Gen g(2718);
  for (int trial = 0; trial < 6; ++trial) {
    const AopModel m = testing::random_model(g);
    const TabularMdp mdp = TabularMdp::from_model(m);
    PolicyEvaluationCache cache(mdp);
    double prev_l = 0, prev_t = 0, prev_q = 0;
    std::optional<StationaryDeterministicPolicy> warm;
    for (int i = 0; i <= 20; ++i) {
      const double lambda = 0.1 * i;
      const auto solved = cache.solve(lambda, warm);
      warm = solved.policy;
      const PolicyMetrics& met = cache.metrics(solved.policy);
      const double l = met.avg_relaxed_aop - lambda * met.avg_cycle;
      if (i > 0) {
        CAPTURE(trial);
        CAPTURE(lambda);
        CHECK(l <= prev_l + 1e-9);
        CHECK(met.avg_cycle >= prev_t - 1e-9);
        CHECK(met.avg_relaxed_aop >= prev_q - 1e-9);
      }
      prev_l = l;
      prev_t = met.avg_cycle;
      prev_q = met.avg_relaxed_aop;
    }
  }
}
