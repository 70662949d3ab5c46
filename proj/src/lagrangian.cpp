#include "aop/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aop {

namespace {

Eigen::VectorXd cycle_vector(const StationaryDeterministicPolicy& policy, const TabularMdp& mdp) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(mdp.num_states()));
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    v(static_cast<Eigen::Index>(s)) = mdp.at(s, policy(s)).cycle;
  }
  return v;
}

}  // namespace

PolicyEvaluationCache::Entry& PolicyEvaluationCache::entry(
    const StationaryDeterministicPolicy& policy) {
  auto it = entries_.find(policy.actions);
  if (it != entries_.end()) return it->second;

  const Eigen::MatrixXd p = policy_transition_matrix(policy, *mdp_);
  const Eigen::VectorXd cost = policy_reward_vector(policy, *mdp_, 0.0);
  const Eigen::VectorXd cycle = cycle_vector(policy, *mdp_);
  Entry e;
  if (recurrent_classes(p).size() != 1) {
    e.cost_part = solve_gain_bias(p, cost);
    e.cycle_part = solve_gain_bias(p, cycle);
    return entries_.emplace(policy.actions, std::move(e)).first->second;
  }

  const Eigen::Index n = p.rows();
  const Eigen::VectorXd rho = stationary_distribution(p);
  const Eigen::MatrixXd i_minus_p = Eigen::MatrixXd::Identity(n, n) - p;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(i_minus_p +
                                                Eigen::VectorXd::Ones(n) * rho.transpose());
  auto solve = [&](const Eigen::VectorXd& r) {
    GainBiasSolution sol;
    const double g = rho.dot(r);
    sol.gain = Eigen::VectorXd::Constant(n, g);
    sol.bias = lu.solve(r - sol.gain);
    sol.aux = lu.solve(-sol.bias);
    sol.residual = std::max({(i_minus_p * sol.gain).lpNorm<Eigen::Infinity>(),
                             (sol.gain + i_minus_p * sol.bias - r).lpNorm<Eigen::Infinity>(),
                             (sol.bias + i_minus_p * sol.aux).lpNorm<Eigen::Infinity>()});
    return sol;
  };
  e.cost_part = solve(cost);
  e.cycle_part = solve(cycle);

  PolicyMetrics m;
  m.stationary = rho;
  m.avg_relaxed_aop = rho.dot(cost);
  m.avg_cycle = rho.dot(cycle);
  m.avg_lagrange = m.avg_relaxed_aop;
  e.metrics = std::move(m);
  return entries_.emplace(policy.actions, std::move(e)).first->second;
}

GainBiasSolution PolicyEvaluationCache::evaluate(const StationaryDeterministicPolicy& policy,
                                                 double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("Lagrange multiplier must be non-negative");
  const Entry& e = entry(policy);
  GainBiasSolution sol;
  sol.gain = e.cost_part.gain - lambda * e.cycle_part.gain;
  sol.bias = e.cost_part.bias - lambda * e.cycle_part.bias;
  sol.aux = e.cost_part.aux - lambda * e.cycle_part.aux;
  sol.residual = e.cost_part.residual + lambda * e.cycle_part.residual;
  return sol;
}

const PolicyMetrics& PolicyEvaluationCache::metrics(const StationaryDeterministicPolicy& policy) {
  Entry& e = entry(policy);
  if (!e.metrics) e.metrics = policy_metrics(policy, 0.0, *mdp_);
  return *e.metrics;
}

PolicyIterationResult PolicyEvaluationCache::solve(
    double lambda, const std::optional<StationaryDeterministicPolicy>& initial) {
  PolicyIterationResult result;
  result.policy =
      initial ? *initial : StationaryDeterministicPolicy::constant(mdp_->num_states(), 0);
  check_policy(result.policy, *mdp_);
  for (int it = 1; it <= kPolicyIterationCap; ++it) {
    result.solution = evaluate(result.policy, lambda);
    result.iterations = it;
    result.gain_history.push_back(result.solution.scalar_gain());
    StationaryDeterministicPolicy next =
        improve_policy(result.policy, result.solution, *mdp_, lambda);
    if (next == result.policy) return result;
    result.policy = std::move(next);
  }
  std::ostringstream os;
  os << "policy iteration did not converge within " << kPolicyIterationCap
     << " iterations at lambda = " << lambda;
  throw SolverError(os.str());
}

LambdaTrace robbins_monro(const TabularMdp& mdp, double t_min, const StepRule& rule,
                          double lambda0, double stop_tol, int max_iters) {
  if (lambda0 < 0.0) throw std::invalid_argument("initial multiplier must be non-negative");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");

  PolicyEvaluationCache cache(mdp);
  LambdaTrace trace;
  std::optional<StationaryDeterministicPolicy> policy;
  double lambda = lambda0;
  for (int k = 1; k <= max_iters; ++k) {
    PolicyIterationResult solved = cache.solve(lambda, policy);
    policy = solved.policy;
    const double t_bar = cache.metrics(*policy).avg_cycle;
    trace.iterates.push_back({k, lambda, t_bar});

    trace.final_lambda = lambda;

    const double next = std::max(0.0, lambda + rule.step(k) * (t_min - t_bar));
    if (std::abs(next - lambda) <= stop_tol) {
      trace.converged = true;
      break;
    }
    lambda = next;
  }
  trace.final_policy = *policy;
  return trace;
}

PerturbedMultipliers perturbed_multipliers(double lambda_star, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("perturbation must be positive");
  if (lambda_star < 0.0) throw std::invalid_argument("multiplier must be non-negative");
  PerturbedMultipliers m;
  m.high = lambda_star + delta;
  m.low = lambda_star - delta;
  if (m.low < 0.0) {
    m.low = 0.0;
    m.clamped = true;
  }
  return m;
}

RandomizationFactor randomization_factor(double t_high, double t_low, double t_min) {
  constexpr double kSlack = 1e-9;
  if (t_high == t_low) {
    if (t_high >= t_min) return {1.0, true};
    std::ostringstream os;
    os << "infeasible bracket: both policies have average cycle " << t_high << " < " << t_min;
    throw SolverError(os.str());
  }
  if (t_high < t_low || t_min < t_low - kSlack || t_min > t_high + kSlack) {
    std::ostringstream os;
    os << "t_min " << t_min << " is not bracketed by [" << t_low << ", " << t_high << "]";
    throw SolverError(os.str());
  }
  const double q = (t_min - t_low) / (t_high - t_low);
  return {std::clamp(q, 0.0, 1.0), false};
}

MixturePolicy::MixturePolicy(StationaryDeterministicPolicy high, StationaryDeterministicPolicy low,
                             double q, double t_high, double t_low, double t_min, bool degenerate)
    : high_(std::move(high)),
      low_(std::move(low)),
      q_(q),
      t_high_(t_high),
      t_low_(t_low),
      degenerate_(degenerate) {
  if (high_.size() != low_.size()) throw std::invalid_argument("mixture policies differ in size");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("mixture factor outside [0, 1]");
  if (!degenerate_) {
    const double mixed = q * t_high + (1.0 - q) * t_low;
    if (std::abs(mixed - t_min) > 1e-9) {
      std::ostringstream os;
      os << "mixture identity violated: q*T1 + (1-q)*T2 = " << mixed << " != " << t_min;
      throw std::invalid_argument(os.str());
    }
  }
}

std::vector<std::size_t> MixturePolicy::differing_states() const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < high_.size(); ++s) {
    if (high_(s) != low_(s)) out.push_back(s);
  }
  return out;
}

Refinement refine(const TabularMdp& mdp, double t_min, double lambda_star, double delta,
                  const std::optional<StationaryDeterministicPolicy>& warm_start) {
  const PerturbedMultipliers mult = perturbed_multipliers(lambda_star, delta);
  PolicyIterationResult high = policy_iteration(mult.high, mdp, warm_start);
  PolicyIterationResult low = policy_iteration(mult.low, mdp, warm_start);
  PolicyMetrics high_metrics = policy_metrics(high.policy, mult.high, mdp);
  PolicyMetrics low_metrics = policy_metrics(low.policy, mult.low, mdp);
  const double t_high = high_metrics.avg_cycle;
  const double t_low = low_metrics.avg_cycle;

  if (t_high < t_min - 1e-9) {
    std::ostringstream os;
    os << "perturbed policy at lambda = " << mult.high << " has average cycle " << t_high
       << " ms below t_min = " << t_min
       << " ms; increase the perturbation or rerun the multiplier search";
    throw SolverError(os.str());
  }

  RandomizationFactor rf;
  if (high.policy == low.policy) {
    rf = {1.0, true};
  } else if (t_low >= t_min) {
    // Both perturbed policies are feasible; the lower multiplier is the better one.
    rf = {0.0, true};
  } else {
    rf = randomization_factor(t_high, t_low, t_min);
  }
  MixturePolicy mixture(high.policy, low.policy, rf.q, t_high, t_low, t_min, rf.degenerate);
  return {mult,
          std::move(high),
          std::move(low),
          std::move(high_metrics),
          std::move(low_metrics),
          std::move(mixture)};
}

bool brackets_constraint(const Refinement& r, double t_min) {
  if (r.mixture.t_high() < t_min - 1e-9) return false;
  return r.multipliers.clamped || r.multipliers.low == 0.0 || r.mixture.t_low() < t_min;
}

double locate_breakpoint(const TabularMdp& mdp, double t_min, double lambda_hint, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("bracket width must be positive");
  PolicyEvaluationCache cache(mdp);
  std::optional<StationaryDeterministicPolicy> warm;
  auto feasible = [&](double lambda) {
    PolicyIterationResult solved = cache.solve(lambda, warm);
    warm = solved.policy;
    return cache.metrics(solved.policy).avg_cycle >= t_min;
  };

  if (feasible(0.0)) return 0.0;
  double lo = 0.0;
  double hi = std::max(lambda_hint, delta);
  // The average cycle is non-decreasing in the multiplier, so grow until feasible.
  for (int i = 0; !feasible(hi); ++i) {
    if (i == 64) {
      std::ostringstream os;
      os << "no multiplier up to " << hi << " reaches an average cycle of " << t_min << " ms";
      throw SolverError(os.str());
    }
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > delta) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace aop
