// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/io/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace goalcal::io {

enum class Command { kVerify, kOrderStudy, kCalibrate };
Command parse_command(const std::string& name);
std::string to_string(Command command);

struct RunOptions {
  Command command = Command::kVerify;
  std::optional<std::uint64_t> seed;  // overrides mcmc.seed
  std::optional<std::filesystem::path> output_dir;
  std::function<void(const std::string&)> log;
};

struct RunManifest {
  nlohmann::json config;
  std::string config_hash;
  std::string command;
  std::filesystem::path output_dir;
  std::vector<std::pair<std::string, double>> timings;  // seconds per phase
  std::vector<std::string> artifacts;                   // names relative to output_dir
  std::string artifact_hash;                            // over names and contents
  bool complete = false;
  std::string failed_phase;
  std::string error;
};

void to_json(nlohmann::json& j, const RunManifest& m);

/// Runs one experiment and writes its artifacts plus manifest.json. On
/// failure the files written so far keep a `.partial` suffix, the manifest
/// names the failing phase, and the original exception is rethrown.
RunManifest run_experiment(const RunConfig& config, const RunOptions& options);

/// Elliptic pair for the config's test parameters at homotopy level s:
/// kappa0 + s (kappa - kappa0), s alpha.
std::unique_ptr<goal::ModelPair> elliptic_homotopy(const RunConfig& config,
                                                   std::shared_ptr<const elliptic::EllipticDiscretization> disc,
                                                   double s);

}  // namespace goalcal::io
