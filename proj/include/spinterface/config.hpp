#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "spinterface/dynamics.hpp"

namespace spinterface {

/// Resolved run configuration: spin system, optical model and dynamics
/// parameters, loaded from a flat key=value file with [section] headers.
struct Config {
  PumpModel model;
  CoherentParams params;
  double b0_mt = 0.0;          // static field magnitude along the zfs axis
  double temperature_k = 5.0;
  unsigned long long seed = 0;
  std::filesystem::path output_dir = ".";

  ProtocolContext protocol_context() const;
};

// Throws std::runtime_error with a descriptive message on malformed input or
// unknown keys.
Config load_config(const std::filesystem::path& path);

}  // namespace spinterface
