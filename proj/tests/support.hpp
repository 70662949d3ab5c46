#pragma once

// Shared helpers for the unit tests: a tiny deterministic generator for
// property tests and constructors for common models.

#include <cmath>
#include <cstdint>
#include <vector>

#include "aop/config_io.hpp"
#include "aop/mdp_solver.hpp"
#include "aop/model.hpp"

namespace testing {

// SplitMix64: independent of the library's generator so property inputs do
// not share a stream with the code under test.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double between(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

inline aop::AopModel reference_model() {
  return aop::AopModel(aop::SystemConfig{}, aop::ChannelModel::reference());
}

// Row-stochastic matrix with some exact zeros; every row keeps its diagonal
// positive so rows never vanish.
inline std::vector<std::vector<double>> random_stochastic(Gen& g, std::size_t n) {
  std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool keep = i == j || g.uniform() < 0.7;
      p[i][j] = keep ? g.between(0.05, 1.0) : 0.0;
      sum += p[i][j];
    }
    for (double& x : p[i]) x /= sum;
  }
  return p;
}

// Small random model: 1-4 channel states, 1-4 waits, integral times so
// collisions between local and edge ages are easy to avoid.
inline aop::AopModel random_model(Gen& g) {
  const std::size_t channels = 1 + g.below(4);
  const std::size_t waits = 1 + g.below(4);
  aop::SystemConfig cfg;
  cfg.cycles = g.between(0.5, 2.0) * 1e9;
  cfg.edge_freq_hz = g.between(5.0, 40.0) * 1e9;
  cfg.wait_grid_ms.clear();
  double w = 0.0;
  for (std::size_t i = 0; i < waits; ++i) {
    cfg.wait_grid_ms.push_back(w);
    w += std::round(g.between(50.0, 300.0));
  }
  std::vector<aop::ChannelState> states;
  double tx = std::round(g.between(100.0, 600.0)) + 0.5;  // half-ms offset avoids t_l
  for (std::size_t m = 0; m < channels; ++m) {
    states.push_back({"s" + std::to_string(m), tx});
    tx += std::round(g.between(100.0, 900.0));
  }
  return aop::AopModel(cfg, aop::ChannelModel(states, random_stochastic(g, channels)));
}

inline aop::StationaryDeterministicPolicy random_policy(Gen& g, std::size_t states,
                                                        std::size_t actions) {
  aop::StationaryDeterministicPolicy p;
  for (std::size_t s = 0; s < states; ++s) p.actions.push_back(g.below(actions));
  return p;
}

// Fixed benchmark-like policies on the reference grid.
inline aop::StationaryDeterministicPolicy fixed_action_policy(const aop::AopModel& m,
                                                              std::size_t wait_index,
                                                              aop::Origin origin) {
  return aop::StationaryDeterministicPolicy::constant(m.space().size(),
                                                      m.action_index({wait_index, origin}));
}

}  // namespace testing
