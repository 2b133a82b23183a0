#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmrelay/channel.hpp"
#include "mmrelay/selection.hpp"
#include "mmrelay/topology.hpp"

namespace mmrelay {

enum class Averaging { linear, db };

struct ExperimentConfig {
  TopologySpec topology;
  ChannelParams channel;
  int scenarios = 500;
  int trials = 100;
  std::size_t window = 20;  // 0 = unlimited
  std::vector<Policy> policies{Policy::ideal, Policy::random, Policy::random_constrained,
                               Policy::saa, Policy::saa_constrained};
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  int selection_period = 1;
  Averaging averaging = Averaging::linear;
  // Reuse one scenario set for every trial instead of drawing one per trial.
  bool share_scenarios = false;
  std::string out_dir = ".";

  /// Throws ConfigError. Does not build the deployment.
  void validate() const;
};

/// Parses the three-section document. Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json topology_to_json(const TopologySpec& spec);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& config);

}  // namespace mmrelay
