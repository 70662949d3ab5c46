#include "aop/config_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>

namespace aop {

using nlohmann::json;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "input_size_kb", "cycles_megacycles", "local_freq_ghz", "edge_freq_ghz",
    "bandwidth_mhz", "distance_km",       "tx_power_dbm",   "noise_power_dbm",
    "wait_grid_ms",  "t_min_ms",          "perturbation",   "step_factor",
    "stop_tol",      "max_outer_iters",   "channel"};
const std::set<std::string> kChannelKeys = {"labels", "tx_time_ms", "transition"};

template <typename T>
T get_as(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

json default_config_json() { return config_to_json(ModelConfig{}); }

json config_to_json(const ModelConfig& cfg) {
  const SystemConfig& s = cfg.system;
  json channel;
  std::vector<std::string> labels;
  std::vector<double> tx;
  for (const ChannelState& st : cfg.channel.states()) {
    labels.push_back(st.label);
    tx.push_back(st.tx_time_ms);
  }
  channel["labels"] = labels;
  channel["tx_time_ms"] = tx;
  channel["transition"] = cfg.channel.transition();
  return json{{"input_size_kb", s.input_size_bits / 8000.0},
              {"cycles_megacycles", s.cycles / 1e6},
              {"local_freq_ghz", s.local_freq_hz / 1e9},
              {"edge_freq_ghz", s.edge_freq_hz / 1e9},
              {"bandwidth_mhz", s.bandwidth_hz / 1e6},
              {"distance_km", s.distance_km},
              {"tx_power_dbm", s.tx_power_dbm},
              {"noise_power_dbm", s.noise_power_dbm},
              {"wait_grid_ms", s.wait_grid_ms},
              {"t_min_ms", s.t_min_ms},
              {"perturbation", s.perturbation},
              {"step_factor", s.step_factor},
              {"stop_tol", s.stop_tol},
              {"max_outer_iters", s.max_outer_iters},
              {"channel", channel}};
}

ModelConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kTopLevelKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  json merged = default_config_json();
  merged.merge_patch(doc);
  for (const auto& [key, value] : merged.at("channel").items()) {
    if (!kChannelKeys.count(key)) throw ConfigError("unknown config key 'channel." + key + "'");
  }

  SystemConfig s;
  s.input_size_bits = get_as<double>(merged, "input_size_kb") * 8000.0;
  s.cycles = get_as<double>(merged, "cycles_megacycles") * 1e6;
  s.local_freq_hz = get_as<double>(merged, "local_freq_ghz") * 1e9;
  s.edge_freq_hz = get_as<double>(merged, "edge_freq_ghz") * 1e9;
  s.bandwidth_hz = get_as<double>(merged, "bandwidth_mhz") * 1e6;
  s.distance_km = get_as<double>(merged, "distance_km");
  s.tx_power_dbm = get_as<double>(merged, "tx_power_dbm");
  s.noise_power_dbm = get_as<double>(merged, "noise_power_dbm");
  s.wait_grid_ms = get_as<std::vector<double>>(merged, "wait_grid_ms");
  s.t_min_ms = get_as<double>(merged, "t_min_ms");
  s.perturbation = get_as<double>(merged, "perturbation");
  s.step_factor = get_as<double>(merged, "step_factor");
  s.stop_tol = get_as<double>(merged, "stop_tol");
  s.max_outer_iters = get_as<int>(merged, "max_outer_iters");
  s.validate();

  const json& ch = merged.at("channel");
  const auto labels = get_as<std::vector<std::string>>(ch, "labels");
  const auto tx = get_as<std::vector<double>>(ch, "tx_time_ms");
  const auto transition = get_as<std::vector<std::vector<double>>>(ch, "transition");
  if (labels.size() != tx.size()) {
    throw ConfigError("channel.labels and channel.tx_time_ms differ in length");
  }
  std::vector<ChannelState> states;
  for (std::size_t i = 0; i < tx.size(); ++i) states.push_back({labels[i], tx[i]});
  return ModelConfig{s, ChannelModel(std::move(states), transition)};
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + item + "' is not KEY=VALUE");
    }
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;  // bare strings such as labels
    }

    json* target = &doc;
    std::string leaf = key;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      const std::string head = key.substr(0, dot);
      leaf = key.substr(dot + 1);
      if (head != "channel" || !kChannelKeys.count(leaf)) {
        throw ConfigError("unknown override key '" + key + "'");
      }
      if (!doc.contains("channel")) doc["channel"] = default_config_json().at("channel");
      target = &doc["channel"];
    } else if (!kTopLevelKeys.count(key) || key == "channel") {
      throw ConfigError("unknown override key '" + key + "'");
    }
    (*target)[leaf] = value;
  }
}

ModelConfig load_config(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
      doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path.string() + ": " + e.what());
    }
  }
  apply_overrides(doc, overrides);
  return config_from_json(doc);
}

std::string config_hash(const ModelConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aop
