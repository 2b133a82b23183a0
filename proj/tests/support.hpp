#pragma once

#include <string>

#include "mmrelay/config.hpp"
#include "mmrelay/topology.hpp"

namespace testing {

inline std::string config_path(const std::string& name) {
  return std::string(MMRELAY_SOURCE_DIR) + "/configs/" + name;
}

inline mmrelay::ExperimentConfig load(const std::string& name) {
  return mmrelay::load_config(config_path(name));
}

inline mmrelay::Deployment deployment(const std::string& name) {
  return mmrelay::Deployment::build(load(name).topology);
}

}  // namespace testing
