#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aop/model.hpp"

namespace aop {

/// Raised when a linear solve, unichain check or iteration cap fails.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tabular average-reward MDP with a Lagrangian cost structure: the
/// per-step reward at multiplier lambda is cost(s,a) - lambda * cycle(s,a).
/// Every state shares the same action count.
class TabularMdp {
 public:
  struct Entry {
    double cost = 0.0;   // relaxed AoP reward
    double cycle = 0.0;  // Y_i + Z_i
    std::vector<Transition> successors;
  };

  TabularMdp(std::size_t num_states, std::size_t num_actions);

  /// Dense cache of an AopModel's kernel and rewards.
  static TabularMdp from_model(const AopModel& model);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }

  Entry& at(std::size_t s, std::size_t a) { return entries_.at(s * num_actions_ + a); }
  const Entry& at(std::size_t s, std::size_t a) const { return entries_.at(s * num_actions_ + a); }

  double reward(std::size_t s, std::size_t a, double lambda) const {
    const Entry& e = at(s, a);
    return e.cost - lambda * e.cycle;
  }

  /// Throws std::invalid_argument if any row is not a probability vector.
  void validate() const;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<Entry> entries_;
};

struct StationaryDeterministicPolicy {
  std::vector<std::size_t> actions;

  std::size_t size() const { return actions.size(); }
  std::size_t operator()(std::size_t s) const { return actions[s]; }
  bool operator==(const StationaryDeterministicPolicy&) const = default;

  static StationaryDeterministicPolicy constant(std::size_t num_states, std::size_t action) {
    return {std::vector<std::size_t>(num_states, action)};
  }
};

void check_policy(const StationaryDeterministicPolicy& policy, const TabularMdp& mdp);

struct GainBiasSolution {
  Eigen::VectorXd gain;
  Eigen::VectorXd bias;
  Eigen::VectorXd aux;
  double residual = 0.0;

  /// Mean of the gain vector; equal to every entry for unichain policies.
  double scalar_gain() const { return gain.mean(); }
};

struct PolicyMetrics {
  Eigen::VectorXd stationary;
  double avg_lagrange = 0.0;
  double avg_relaxed_aop = 0.0;
  double avg_cycle = 0.0;
};

Eigen::MatrixXd policy_transition_matrix(const StationaryDeterministicPolicy& policy,
                                         const TabularMdp& mdp);

Eigen::VectorXd policy_reward_vector(const StationaryDeterministicPolicy& policy,
                                     const TabularMdp& mdp, double lambda);

/// Solves (I-P)g = 0, g + (I-P)b = r, b + (I-P)mu = 0 as one stacked
/// minimum-norm least-squares problem.
GainBiasSolution evaluate_policy(const StationaryDeterministicPolicy& policy, double lambda,
                                 const TabularMdp& mdp);

/// Same stacked system with an arbitrary transition matrix and reward vector.
GainBiasSolution solve_gain_bias(const Eigen::MatrixXd& transition, const Eigen::VectorXd& reward);

/// r(s,a) + sum_s' P(s'|s,a) b(s').
double improvement_value(const TabularMdp& mdp, std::size_t s, std::size_t a, double lambda,
                         const Eigen::VectorXd& bias);

/// Keeps the incumbent action when it is within tolerance of the minimum,
/// otherwise takes the smallest-index minimizer.
StationaryDeterministicPolicy improve_policy(const StationaryDeterministicPolicy& policy,
                                             const GainBiasSolution& solution,
                                             const TabularMdp& mdp, double lambda);

struct PolicyIterationResult {
  StationaryDeterministicPolicy policy;
  GainBiasSolution solution;
  int iterations = 0;
  std::vector<double> gain_history;
};

inline constexpr int kPolicyIterationCap = 200;

PolicyIterationResult policy_iteration(
    double lambda, const TabularMdp& mdp,
    const std::optional<StationaryDeterministicPolicy>& initial = std::nullopt);

/// Closed communicating classes of the support graph of P (threshold 0).
std::vector<std::vector<std::size_t>> recurrent_classes(const Eigen::MatrixXd& transition);

/// Unique invariant distribution of a unichain row-stochastic matrix.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

PolicyMetrics policy_metrics(const StationaryDeterministicPolicy& policy, double lambda,
                             const TabularMdp& mdp);

/// max_s |min_a [r(s,a) + P b](s) - (g(s) + b(s))|.
double bellman_residual(const GainBiasSolution& solution, const TabularMdp& mdp, double lambda);

}  // namespace aop
