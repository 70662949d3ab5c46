#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "aop/mdp_solver.hpp"

namespace aop {

/// Step size of the multiplier update: 1/k (Harmonic) or factor/k (Scaled).
struct StepRule {
  enum class Kind { Harmonic, Scaled };
  Kind kind = Kind::Scaled;
  double factor = 1.0e-3;

  static StepRule harmonic() { return {Kind::Harmonic, 1.0}; }
  static StepRule scaled(double factor) { return {Kind::Scaled, factor}; }

  double step(int k) const {
    const double base = 1.0 / static_cast<double>(k);
    return kind == Kind::Harmonic ? base : factor * base;
  }
  const char* name() const { return kind == Kind::Harmonic ? "harmonic" : "scaled"; }
};

struct LambdaIterate {
  int k = 0;
  double lambda = 0.0;
  double avg_cycle = 0.0;  // T-bar of the policy solved at lambda
};

struct LambdaTrace {
  std::vector<LambdaIterate> iterates;
  bool converged = false;
  double final_lambda = 0.0;                   // last evaluated iterate
  StationaryDeterministicPolicy final_policy;  // solved at final_lambda
};

/// Memoizes per-policy evaluation for the multiplier search. For a unichain
/// policy the gain is rho.r and the bias is the unique solution of
/// (I - P + e rho^T) b = r - g e, which is also the b of the stacked system.
/// Both are linear in the reward, so one factorization per policy serves
/// every multiplier. Non-unichain policies fall back to the stacked solve.
class PolicyEvaluationCache {
 public:
  explicit PolicyEvaluationCache(const TabularMdp& mdp) : mdp_(&mdp) {}

  GainBiasSolution evaluate(const StationaryDeterministicPolicy& policy, double lambda);
  /// Metrics at lambda = 0; callers rescale avg_lagrange themselves.
  const PolicyMetrics& metrics(const StationaryDeterministicPolicy& policy);

  /// Policy iteration that routes evaluation through the cache.
  PolicyIterationResult solve(double lambda,
                              const std::optional<StationaryDeterministicPolicy>& initial);

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    GainBiasSolution cost_part;   // solution for the relaxed reward vector
    GainBiasSolution cycle_part;  // solution for the cycle-length vector
    std::optional<PolicyMetrics> metrics;
  };
  Entry& entry(const StationaryDeterministicPolicy& policy);

  const TabularMdp* mdp_;
  std::map<std::vector<std::size_t>, Entry> entries_;
};

/// lambda^{k+1} = max(0, lambda^k + step_k (t_min - T(pi^{lambda^k}))).
LambdaTrace robbins_monro(const TabularMdp& mdp, double t_min, const StepRule& rule,
                          double lambda0, double stop_tol, int max_iters);

struct PerturbedMultipliers {
  double high = 0.0;  // lambda* + delta
  double low = 0.0;   // max(0, lambda* - delta)
  bool clamped = false;
};

PerturbedMultipliers perturbed_multipliers(double lambda_star, double delta);

struct RandomizationFactor {
  double q = 0.0;
  bool degenerate = false;
};

/// q = (t_min - t_low) / (t_high - t_low).
RandomizationFactor randomization_factor(double t_high, double t_low, double t_min);

/// Per-epoch biased coin between two deterministic policies.
class MixturePolicy {
 public:
  /// Checks q * t_high + (1 - q) * t_low == t_min (to 1e-9) unless degenerate.
  MixturePolicy(StationaryDeterministicPolicy high, StationaryDeterministicPolicy low, double q,
                double t_high, double t_low, double t_min, bool degenerate);

  const StationaryDeterministicPolicy& high() const { return high_; }
  const StationaryDeterministicPolicy& low() const { return low_; }
  double q() const { return q_; }
  double t_high() const { return t_high_; }
  double t_low() const { return t_low_; }
  bool degenerate() const { return degenerate_; }

  /// high(s) if draw < q, else low(s).
  std::size_t action(std::size_t state, double draw) const {
    return draw < q_ ? high_(state) : low_(state);
  }
  std::vector<std::size_t> differing_states() const;

 private:
  StationaryDeterministicPolicy high_;
  StationaryDeterministicPolicy low_;
  double q_;
  double t_high_;
  double t_low_;
  bool degenerate_;
};

inline std::size_t mixture_action(const MixturePolicy& m, std::size_t state, double draw) {
  return m.action(state, draw);
}

struct Refinement {
  PerturbedMultipliers multipliers;
  PolicyIterationResult high_solve;
  PolicyIterationResult low_solve;
  PolicyMetrics high_metrics;
  PolicyMetrics low_metrics;
  MixturePolicy mixture;
};

/// True when the refinement's perturbed pair straddles t_min: the high policy
/// is feasible and the low one is not (or the low multiplier sits at 0).
bool brackets_constraint(const Refinement& r, double t_min);

/// Bisection on the multiplier for the point where the average cycle first
/// reaches t_min. Returns the midpoint of a bracket no wider than `delta`, so
/// that refining there with the same delta straddles the constraint. Returns
/// 0 when the unconstrained policy is already feasible.
double locate_breakpoint(const TabularMdp& mdp, double t_min, double lambda_hint, double delta);

/// Solves at lambda* +/- delta and blends the two policies so that the
/// expected cycle length meets t_min.
Refinement refine(const TabularMdp& mdp, double t_min, double lambda_star, double delta,
                  const std::optional<StationaryDeterministicPolicy>& warm_start = std::nullopt);

}  // namespace aop
