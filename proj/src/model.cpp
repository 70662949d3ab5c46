#include "aop/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aop {

namespace {

constexpr double kMsPerSecond = 1000.0;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be strictly positive and finite, got " << value;
    throw ConfigError(os.str());
  }
}

}  // namespace

const char* to_string(Origin origin) { return origin == Origin::Edge ? "edge" : "local"; }

void SystemConfig::validate() const {
  require_positive(input_size_bits, "input_size");
  require_positive(cycles, "cycles");
  require_positive(local_freq_hz, "local_freq");
  require_positive(edge_freq_hz, "edge_freq");
  require_positive(bandwidth_hz, "bandwidth");
  require_positive(distance_km, "distance");
  require(std::isfinite(tx_power_dbm), "tx_power must be finite");
  require(std::isfinite(noise_power_dbm), "noise_power must be finite");
  require(!wait_grid_ms.empty(), "wait_grid must not be empty");
  require(wait_grid_ms.front() == 0.0, "wait_grid must start at 0");
  for (std::size_t i = 1; i < wait_grid_ms.size(); ++i) {
    require(wait_grid_ms[i] > wait_grid_ms[i - 1],
            "wait_grid must be strictly ascending without duplicates");
  }
  // A zero minimum sampling duration is accepted and means the constraint is inactive.
  require(t_min_ms >= 0.0 && std::isfinite(t_min_ms), "t_min must be non-negative and finite");
  require(perturbation > 0.0 && perturbation < 0.1, "perturbation must lie in (0, 0.1)");
  require_positive(step_factor, "step_factor");
  require_positive(stop_tol, "stop_tol");
  require(max_outer_iters >= 1, "max_outer_iters must be at least 1");
}

ChannelModel::ChannelModel(std::vector<ChannelState> states,
                           std::vector<std::vector<double>> transition)
    : states_(std::move(states)), transition_(std::move(transition)) {
  require(!states_.empty(), "channel needs at least one state");
  require(transition_.size() == states_.size(), "transition matrix row count must match states");
  for (std::size_t j = 0; j < states_.size(); ++j) {
    require_positive(states_[j].tx_time_ms, "channel tx_time");
    if (j > 0) {
      require(states_[j].tx_time_ms > states_[j - 1].tx_time_ms,
              "channel tx_time must be strictly increasing with state index");
    }
    const auto& row = transition_[j];
    require(row.size() == states_.size(), "transition matrix must be square");
    double sum = 0.0;
    for (double p : row) {
      require(p >= 0.0 && std::isfinite(p), "transition probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "transition row " << j << " sums to " << sum << ", expected 1";
      throw ConfigError(os.str());
    }
  }
}

ChannelModel ChannelModel::reference() { return scaled_three_state(1000.0); }

ChannelModel ChannelModel::scaled_three_state(double medium_tx_ms) {
  return ChannelModel({{"good", medium_tx_ms / 2.0},
                       {"medium", medium_tx_ms},
                       {"bad", 2.0 * medium_tx_ms}},
                      {{0.85, 0.15, 0.0}, {0.15, 0.7, 0.15}, {0.0, 0.15, 0.85}});
}

double local_processing_time(const SystemConfig& cfg) {
  require_positive(cfg.cycles, "cycles");
  require_positive(cfg.local_freq_hz, "local_freq");
  return cfg.cycles / cfg.local_freq_hz * kMsPerSecond;
}

double edge_execution_time(const SystemConfig& cfg) {
  require_positive(cfg.cycles, "cycles");
  require_positive(cfg.edge_freq_hz, "edge_freq");
  return cfg.cycles / cfg.edge_freq_hz * kMsPerSecond;
}

double path_loss_db(double distance_km) {
  if (!(distance_km > 0.0)) throw std::domain_error("path loss needs a positive distance");
  return 140.7 + 36.7 * std::log10(distance_km);
}

double dbm_to_milliwatts(double dbm) { return std::pow(10.0, dbm / 10.0); }

double shannon_rate(double bandwidth_hz, double snr_linear) {
  return bandwidth_hz * std::log2(1.0 + snr_linear);
}

double offloading_rate(const SystemConfig& cfg) {
  const double gain = std::pow(10.0, -path_loss_db(cfg.distance_km) / 10.0);
  const double snr =
      dbm_to_milliwatts(cfg.tx_power_dbm) * gain / dbm_to_milliwatts(cfg.noise_power_dbm);
  return shannon_rate(cfg.bandwidth_hz, snr);
}

double transmission_time_from_rate(const SystemConfig& cfg) {
  const double rate = offloading_rate(cfg);
  if (!(rate > 0.0)) throw std::domain_error("offloading rate is zero");
  return cfg.input_size_bits / rate * kMsPerSecond;
}

StateSpace::StateSpace(std::size_t num_channels, std::size_t num_waits)
    : num_channels_(num_channels), num_waits_(num_waits) {
  states_.reserve(num_ages() * num_waits_ * 2 * num_channels_);
  for (std::size_t age = 0; age < num_ages(); ++age) {
    for (std::size_t wait = 0; wait < num_waits_; ++wait) {
      for (Origin origin : {Origin::Edge, Origin::Local}) {
        for (std::size_t ch = 0; ch < num_channels_; ++ch) {
          states_.push_back({age, wait, origin, ch});
        }
      }
    }
  }
}

std::size_t StateSpace::index_of(const AopState& s) const {
  if (s.prev_age_index >= num_ages() || s.prev_wait_index >= num_waits_ ||
      s.channel_index >= num_channels_) {
    throw std::out_of_range("state outside the enumerated space");
  }
  const std::size_t origin = s.cur_origin == Origin::Edge ? 0 : 1;
  return ((s.prev_age_index * num_waits_ + s.prev_wait_index) * 2 + origin) * num_channels_ +
         s.channel_index;
}

StateSpace enumerate_states(const SystemConfig& cfg, const ChannelModel& channel) {
  cfg.validate();
  const double t_l = local_processing_time(cfg);
  const double t_ex = edge_execution_time(cfg);
  for (std::size_t m = 0; m < channel.size(); ++m) {
    if (t_ex + channel.tx_time(m) == t_l) {
      std::ostringstream os;
      os << "local processing time " << t_l << " ms collides with the edge age at channel "
         << channel.states()[m].label;
      throw ConfigError(os.str());
    }
  }
  return StateSpace(channel.size(), cfg.wait_grid_ms.size());
}

AopModel::AopModel(SystemConfig cfg, ChannelModel channel)
    : cfg_(std::move(cfg)),
      channel_(std::move(channel)),
      t_local_(local_processing_time(cfg_)),
      t_edge_exec_(edge_execution_time(cfg_)),
      space_(enumerate_states(cfg_, channel_)) {
  age_values_.push_back(t_local_);
  for (std::size_t m = 0; m < channel_.size(); ++m) {
    age_values_.push_back(t_edge_exec_ + channel_.tx_time(m));
  }
}

Action AopModel::action(std::size_t index) const {
  if (index >= num_actions()) throw std::out_of_range("action index");
  return {index / 2, index % 2 == 0 ? Origin::Edge : Origin::Local};
}

std::size_t AopModel::action_index(const Action& a) const {
  if (a.wait_index >= cfg_.wait_grid_ms.size()) throw std::out_of_range("wait index");
  return a.wait_index * 2 + (a.next_origin == Origin::Edge ? 0 : 1);
}

std::size_t AopModel::age_index(Origin origin, std::size_t channel_index) const {
  return origin == Origin::Local ? 0 : 1 + channel_index;
}

double AopModel::age_after_processing(Origin origin, std::size_t channel_index) const {
  if (channel_index >= channel_.size()) throw std::out_of_range("channel index");
  return age_values_[age_index(origin, channel_index)];
}

double AopModel::current_age(const AopState& s) const {
  return age_after_processing(s.cur_origin, s.channel_index);
}

double AopModel::previous_cycle(const AopState& s) const {
  return age_value(s.prev_age_index) + wait(s.prev_wait_index);
}

double AopModel::cycle(const AopState& s, const Action& a) const {
  return current_age(s) + wait(a.wait_index);
}

std::vector<Transition> AopModel::transition_distribution(const AopState& s,
                                                          const Action& a) const {
  std::vector<Transition> out;
  const auto& row = channel_.row(s.channel_index);
  const std::size_t next_age = age_index(s.cur_origin, s.channel_index);
  for (std::size_t m = 0; m < row.size(); ++m) {
    if (row[m] == 0.0) continue;
    out.push_back({space_.index_of({next_age, a.wait_index, a.next_origin, m}), row[m]});
  }
  return out;
}

double AopModel::raw_area_reward(const AopState& s, const Action& a) const {
  const double y = current_age(s);
  const double c = cycle(s, a);
  return previous_cycle(s) * y + 0.5 * c * c;
}

double AopModel::relaxed_reward(const AopState& s, const Action& a) const {
  const double y = current_age(s);
  const double c = cycle(s, a);
  return previous_cycle(s) / c * y + 0.5 * c;
}

double AopModel::lagrange_reward(const AopState& s, const Action& a, double lambda) const {
  return relaxed_reward(s, a) - lambda * cycle(s, a);
}

}  // namespace aop
