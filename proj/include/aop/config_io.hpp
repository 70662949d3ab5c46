#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aop/model.hpp"

namespace aop {

/// A system configuration together with its channel model.
struct ModelConfig {
  SystemConfig system;
  ChannelModel channel = ChannelModel::reference();
};

/// Config files are JSON objects with these keys (units in the key name):
///   input_size_kb, cycles_megacycles, local_freq_ghz, edge_freq_ghz,
///   bandwidth_mhz, distance_km, tx_power_dbm, noise_power_dbm,
///   wait_grid_ms, t_min_ms, perturbation, step_factor, stop_tol,
///   max_outer_iters, channel.labels, channel.tx_time_ms, channel.transition.
/// Missing keys keep their default; unknown keys are rejected. 1 KB = 1000 bytes.
nlohmann::json default_config_json();
ModelConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ModelConfig& cfg);

/// Applies KEY=VALUE overrides in order. KEY may be dotted (channel.tx_time_ms);
/// VALUE is parsed as JSON, so lists are written as [0,200,400].
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Loads `path` (or the bundled defaults when empty) and applies overrides.
ModelConfig load_config(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides = {});

/// 64-bit FNV-1a of the canonical JSON text, as 16 hex digits.
std::string config_hash(const ModelConfig& cfg);

}  // namespace aop
