#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aop {

/// Raised when a SystemConfig or ChannelModel violates its invariants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Where an update is processed. Edge maps to O = 0, Local to O = 1.
enum class Origin : std::uint8_t { Edge = 0, Local = 1 };

const char* to_string(Origin origin);

/// Physical and algorithmic parameters. Physical quantities are stored in SI
/// units (bits, cycles, Hz, km, dBm); all times are milliseconds.
struct SystemConfig {
  double input_size_bits = 4.0e6;     // l = 500 KB
  double cycles = 1.0e9;              // c = 1000 Megacycles
  double local_freq_hz = 1.0e9;       // f_l
  double edge_freq_hz = 20.0e9;       // f_e
  double bandwidth_hz = 20.0e6;       // W
  double distance_km = 0.1;           // d
  double tx_power_dbm = 20.0;         // p
  double noise_power_dbm = -100.0;    // sigma^2
  std::vector<double> wait_grid_ms = {0.0, 200.0, 400.0, 600.0, 800.0};
  double t_min_ms = 1200.0;
  double perturbation = 3.0e-5;       // delta
  double step_factor = 1.0e-3;        // epsilon of the scaled step rule
  double stop_tol = 1.0e-4;           // C_stop
  int max_outer_iters = 100000;       // K

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

struct ChannelState {
  std::string label;
  double tx_time_ms;
};

/// Finite-state Markov channel. State m has transmission time tx_time(m);
/// transition(j, m) is the probability of moving from state j to m.
class ChannelModel {
 public:
  ChannelModel(std::vector<ChannelState> states,
               std::vector<std::vector<double>> transition);

  /// Three-state chain with 500/1000/2000 ms transmission times.
  static ChannelModel reference();

  /// Same transition matrix with (medium/2, medium, 2*medium) tx times.
  static ChannelModel scaled_three_state(double medium_tx_ms);

  std::size_t size() const { return states_.size(); }
  const std::vector<ChannelState>& states() const { return states_; }
  double tx_time(std::size_t m) const { return states_.at(m).tx_time_ms; }
  const std::vector<double>& row(std::size_t j) const { return transition_.at(j); }
  double probability(std::size_t j, std::size_t m) const { return transition_.at(j).at(m); }
  const std::vector<std::vector<double>>& transition() const { return transition_; }

 private:
  std::vector<ChannelState> states_;
  std::vector<std::vector<double>> transition_;
};

// Timing model. All helpers return milliseconds unless stated.

double local_processing_time(const SystemConfig& cfg);
double edge_execution_time(const SystemConfig& cfg);
double path_loss_db(double distance_km);
double dbm_to_milliwatts(double dbm);
/// W * log2(1 + snr).
double shannon_rate(double bandwidth_hz, double snr_linear);
/// Offloading rate in bits/second, path loss treated as attenuation.
double offloading_rate(const SystemConfig& cfg);
double transmission_time_from_rate(const SystemConfig& cfg);

/// CMDP state {Y_{i-1}, Z_{i-1}, Y_i, X_i}. Y_i is derived from
/// (cur_origin, channel_index) and never stored.
struct AopState {
  std::size_t prev_age_index = 0;
  std::size_t prev_wait_index = 0;
  Origin cur_origin = Origin::Local;
  std::size_t channel_index = 0;

  auto operator<=>(const AopState&) const = default;
};

/// Action {Z_i, O_i}; next_origin decides where update i+1 is processed.
struct Action {
  std::size_t wait_index = 0;
  Origin next_origin = Origin::Edge;

  auto operator<=>(const Action&) const = default;
};

/// Dense enumeration of the reachable state space. Age index 0 is the local
/// processing time, index 1 + m the edge time at channel state m.
class StateSpace {
 public:
  StateSpace(std::size_t num_channels, std::size_t num_waits);

  std::size_t size() const { return states_.size(); }
  std::size_t num_ages() const { return num_channels_ + 1; }
  std::size_t num_waits() const { return num_waits_; }
  std::size_t num_channels() const { return num_channels_; }
  const std::vector<AopState>& states() const { return states_; }
  const AopState& state(std::size_t index) const { return states_.at(index); }
  std::size_t index_of(const AopState& s) const;

 private:
  std::size_t num_channels_;
  std::size_t num_waits_;
  std::vector<AopState> states_;
};

struct Transition {
  std::size_t next;  // index into StateSpace
  double probability;
};

/// The controlled Markov process: timing constants, state space, kernel and
/// rewards. Immutable after construction.
class AopModel {
 public:
  AopModel(SystemConfig cfg, ChannelModel channel);

  const SystemConfig& config() const { return cfg_; }
  const ChannelModel& channel() const { return channel_; }
  const StateSpace& space() const { return space_; }

  double t_local() const { return t_local_; }
  double t_edge_exec() const { return t_edge_exec_; }

  std::size_t num_actions() const { return 2 * cfg_.wait_grid_ms.size(); }
  /// Actions are ordered lexicographically by (wait_index, origin).
  Action action(std::size_t index) const;
  std::size_t action_index(const Action& a) const;
  double wait(std::size_t wait_index) const { return cfg_.wait_grid_ms.at(wait_index); }

  /// Age value by age index (0 = local, 1 + m = edge at channel m).
  double age_value(std::size_t age_index) const { return age_values_.at(age_index); }
  std::size_t age_index(Origin origin, std::size_t channel_index) const;
  double age_after_processing(Origin origin, std::size_t channel_index) const;

  double current_age(const AopState& s) const;
  /// Y_{i-1} + Z_{i-1}.
  double previous_cycle(const AopState& s) const;
  /// Y_i + Z_i.
  double cycle(const AopState& s, const Action& a) const;

  std::vector<Transition> transition_distribution(const AopState& s, const Action& a) const;

  double raw_area_reward(const AopState& s, const Action& a) const;
  double relaxed_reward(const AopState& s, const Action& a) const;
  double lagrange_reward(const AopState& s, const Action& a, double lambda) const;

 private:
  SystemConfig cfg_;
  ChannelModel channel_;
  double t_local_;
  double t_edge_exec_;
  std::vector<double> age_values_;
  StateSpace space_;
};

/// Free-function form of StateSpace construction with collision checking.
StateSpace enumerate_states(const SystemConfig& cfg, const ChannelModel& channel);

}  // namespace aop
