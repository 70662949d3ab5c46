#include "aop/mdp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace aop {

TabularMdp::TabularMdp(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states), num_actions_(num_actions), entries_(num_states * num_actions) {
  if (num_states == 0 || num_actions == 0) {
    throw std::invalid_argument("MDP needs at least one state and one action");
  }
}

TabularMdp TabularMdp::from_model(const AopModel& model) {
  const StateSpace& space = model.space();
  TabularMdp mdp(space.size(), model.num_actions());
  for (std::size_t s = 0; s < space.size(); ++s) {
    const AopState& state = space.state(s);
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      const Action action = model.action(a);
      Entry& e = mdp.at(s, a);
      e.cost = model.relaxed_reward(state, action);
      e.cycle = model.cycle(state, action);
      e.successors = model.transition_distribution(state, action);
    }
  }
  return mdp;
}

void TabularMdp::validate() const {
  for (std::size_t s = 0; s < num_states_; ++s) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      double sum = 0.0;
      for (const Transition& t : at(s, a).successors) {
        if (t.next >= num_states_ || !(t.probability >= 0.0)) {
          throw std::invalid_argument("invalid successor in tabular MDP");
        }
        sum += t.probability;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "transition row (" << s << ", " << a << ") sums to " << sum;
        throw std::invalid_argument(os.str());
      }
    }
  }
}

void check_policy(const StationaryDeterministicPolicy& policy, const TabularMdp& mdp) {
  if (policy.size() != mdp.num_states()) {
    throw std::invalid_argument("policy size does not match the state count");
  }
  for (std::size_t a : policy.actions) {
    if (a >= mdp.num_actions()) throw std::invalid_argument("policy action out of range");
  }
}

Eigen::MatrixXd policy_transition_matrix(const StationaryDeterministicPolicy& policy,
                                         const TabularMdp& mdp) {
  check_policy(policy, mdp);
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (const Transition& t : mdp.at(s, policy(s)).successors) {
      p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t.next)) += t.probability;
    }
  }
  return p;
}

Eigen::VectorXd policy_reward_vector(const StationaryDeterministicPolicy& policy,
                                     const TabularMdp& mdp, double lambda) {
  check_policy(policy, mdp);
  Eigen::VectorXd r(static_cast<Eigen::Index>(mdp.num_states()));
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    r(static_cast<Eigen::Index>(s)) = mdp.reward(s, policy(s), lambda);
  }
  return r;
}

GainBiasSolution solve_gain_bias(const Eigen::MatrixXd& transition, const Eigen::VectorXd& reward) {
  const Eigen::Index n = transition.rows();
  if (transition.cols() != n || reward.size() != n) {
    throw std::invalid_argument("gain/bias system dimensions disagree");
  }
  const Eigen::MatrixXd i_minus_p = Eigen::MatrixXd::Identity(n, n) - transition;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  // Unknowns ordered (g, b, mu).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  a.block(0, 0, n, n) = i_minus_p;
  a.block(n, 0, n, n) = eye;
  a.block(n, n, n, n) = i_minus_p;
  a.block(2 * n, n, n, n) = eye;
  a.block(2 * n, 2 * n, n, n) = i_minus_p;

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  rhs.segment(n, n) = reward;

  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  Eigen::VectorXd x = cod.solve(rhs);

  GainBiasSolution sol;
  sol.gain = x.segment(0, n);
  sol.bias = x.segment(n, n);
  sol.aux = x.segment(2 * n, n);
  sol.residual = (a * x - rhs).lpNorm<Eigen::Infinity>();

  const double norm_a = a.cwiseAbs().rowwise().sum().maxCoeff();
  const double scale = std::max(1.0, norm_a * x.lpNorm<Eigen::Infinity>());
  if (!(sol.residual <= 1e-8 * scale)) {
    std::ostringstream os;
    os << "policy evaluation residual " << sol.residual << " exceeds tolerance "
       << 1e-8 * scale << " (transition matrix is likely not stochastic)";
    throw SolverError(os.str());
  }
  return sol;
}

GainBiasSolution evaluate_policy(const StationaryDeterministicPolicy& policy, double lambda,
                                 const TabularMdp& mdp) {
  if (lambda < 0.0) throw std::invalid_argument("Lagrange multiplier must be non-negative");
  return solve_gain_bias(policy_transition_matrix(policy, mdp),
                         policy_reward_vector(policy, mdp, lambda));
}

double improvement_value(const TabularMdp& mdp, std::size_t s, std::size_t a, double lambda,
                         const Eigen::VectorXd& bias) {
  const TabularMdp::Entry& e = mdp.at(s, a);
  double value = e.cost - lambda * e.cycle;
  for (const Transition& t : e.successors) {
    value += t.probability * bias(static_cast<Eigen::Index>(t.next));
  }
  return value;
}

namespace {

double tie_tolerance(double value) { return 1e-10 * std::max(1.0, std::abs(value)); }

}  // namespace

StationaryDeterministicPolicy improve_policy(const StationaryDeterministicPolicy& policy,
                                             const GainBiasSolution& solution,
                                             const TabularMdp& mdp, double lambda) {
  check_policy(policy, mdp);
  StationaryDeterministicPolicy next = policy;
  std::vector<double> values(mdp.num_actions());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      values[a] = improvement_value(mdp, s, a, lambda, solution.bias);
    }
    const double best = *std::min_element(values.begin(), values.end());
    const double tol = tie_tolerance(best);
    if (values[policy(s)] <= best + tol) continue;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      if (values[a] <= best + tol) {
        next.actions[s] = a;
        break;
      }
    }
  }
  return next;
}

PolicyIterationResult policy_iteration(double lambda, const TabularMdp& mdp,
                                       const std::optional<StationaryDeterministicPolicy>& initial) {
  if (lambda < 0.0) throw std::invalid_argument("Lagrange multiplier must be non-negative");
  PolicyIterationResult result;
  result.policy = initial ? *initial : StationaryDeterministicPolicy::constant(mdp.num_states(), 0);
  check_policy(result.policy, mdp);
  for (int it = 1; it <= kPolicyIterationCap; ++it) {
    result.solution = evaluate_policy(result.policy, lambda, mdp);
    result.iterations = it;
    result.gain_history.push_back(result.solution.scalar_gain());
    StationaryDeterministicPolicy next = improve_policy(result.policy, result.solution, mdp, lambda);
    if (next == result.policy) return result;
    result.policy = std::move(next);
  }
  std::ostringstream os;
  os << "policy iteration did not converge within " << kPolicyIterationCap
     << " iterations at lambda = " << lambda;
  throw SolverError(os.str());
}

std::vector<std::vector<std::size_t>> recurrent_classes(const Eigen::MatrixXd& transition) {
  const auto n = static_cast<std::size_t>(transition.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) {
        adj[i].push_back(j);
      }
    }
  }

  // Tarjan's strongly connected components.
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0), component(n, kUnvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  std::size_t counter = 0;

  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : adj[v]) {
      if (index[w] == kUnvisited) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component[w] = components.size();
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      components.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (index[v] == kUnvisited) visit(v);
  }

  std::vector<std::vector<std::size_t>> closed;
  for (std::size_t c = 0; c < components.size(); ++c) {
    bool is_closed = true;
    for (std::size_t v : components[c]) {
      for (std::size_t w : adj[v]) {
        if (component[w] != c) is_closed = false;
      }
    }
    if (is_closed) closed.push_back(components[c]);
  }
  std::sort(closed.begin(), closed.end());
  return closed;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
  const Eigen::Index n = transition.rows();
  if (transition.cols() != n || n == 0) throw std::invalid_argument("transition must be square");

  const auto classes = recurrent_classes(transition);
  if (classes.size() != 1) {
    std::ostringstream os;
    os << "chain is not unichain: " << classes.size() << " recurrent classes";
    for (const auto& c : classes) {
      os << " {";
      for (std::size_t k = 0; k < c.size(); ++k) os << (k ? "," : "") << c[k];
      os << "}";
    }
    throw SolverError(os.str());
  }

  // rho (P - I) = 0 with one balance equation replaced by sum(rho) = 1.
  Eigen::MatrixXd a = transition.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd rho = a.partialPivLu().solve(rhs);

  for (Eigen::Index i = 0; i < n; ++i) {
    if (rho(i) < 0.0) rho(i) = 0.0;  // clears round-off on transient states
  }
  rho /= rho.sum();

  const double defect = (transition.transpose() * rho - rho).lpNorm<Eigen::Infinity>();
  if (!(defect <= 1e-10)) {
    std::ostringstream os;
    os << "stationary distribution defect " << defect << " exceeds 1e-10";
    throw SolverError(os.str());
  }
  return rho;
}

PolicyMetrics policy_metrics(const StationaryDeterministicPolicy& policy, double lambda,
                             const TabularMdp& mdp) {
  PolicyMetrics m;
  m.stationary = stationary_distribution(policy_transition_matrix(policy, mdp));
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    const double w = m.stationary(static_cast<Eigen::Index>(s));
    const TabularMdp::Entry& e = mdp.at(s, policy(s));
    m.avg_cycle += w * e.cycle;
    m.avg_relaxed_aop += w * e.cost;
  }
  m.avg_lagrange = m.avg_relaxed_aop - lambda * m.avg_cycle;
  return m;
}

double bellman_residual(const GainBiasSolution& solution, const TabularMdp& mdp, double lambda) {
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    double best = improvement_value(mdp, s, 0, lambda, solution.bias);
    for (std::size_t a = 1; a < mdp.num_actions(); ++a) {
      best = std::min(best, improvement_value(mdp, s, a, lambda, solution.bias));
    }
    const auto i = static_cast<Eigen::Index>(s);
    worst = std::max(worst, std::abs(best - (solution.gain(i) + solution.bias(i))));
  }
  return worst;
}

}  // namespace aop
