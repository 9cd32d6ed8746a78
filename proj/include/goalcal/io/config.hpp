// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/bayes/calibration.hpp"
#include "goalcal/elliptic/elliptic_pair.hpp"
#include "goalcal/goal/error_estimate.hpp"
#include "goalcal/tumor/tumor_pair.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace goalcal::io {

/// Invalid or incomplete run configuration; `key` is the dotted path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class Application { kElliptic, kTumor };
std::string to_string(Application app);

struct McmcConfig {
  int chains = 4;
  std::int64_t max_samples = 5000;
  double burn_in = 0.5;
  std::uint64_t seed = 1;
  double proposal_scale = 0.5;
  bool adapt = true;
};

struct RunConfig {
  Application application = Application::kElliptic;
  std::string text;  // raw file contents, hashed into the manifest
  std::filesystem::path output_dir = "results";
  int nx = 50;
  int ny = 50;

  elliptic::EllipticCoarseParams elliptic_coarse;
  elliptic::EllipticFineParams elliptic_fine;
  elliptic::NonlinearityKind nonlinearity = elliptic::NonlinearityKind::kQuadratic;

  tumor::TimeGrid time;
  tumor::QoISpec qoi;
  tumor::TumorCoarseParams tumor_coarse;
  tumor::TumorFineParams tumor_fine;
  std::vector<int> trajectory_levels;  // exported time levels of u0

  bayes::LognormalPrior prior;
  bayes::NoiseModel noise;
  goal::ErrorSource estimator = goal::ErrorSource::kFirstOrder;
  std::vector<goal::ErrorSource> verify_sources{goal::ErrorSource::kExact, goal::ErrorSource::kFirstOrder,
                                                goal::ErrorSource::kSecondOrder};
  std::vector<double> order_levels{1.0, 0.5, 0.25, 0.125};
  McmcConfig mcmc;

  /// Fine-parameter test values as a vector in calibration order.
  Vector test_parameters() const;
};

/// Default prior of each application.
bayes::LognormalPrior default_prior(Application app);

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_string(const std::string& text);

/// Validated values with defaults filled in.
nlohmann::json to_json(const RunConfig& config);

}  // namespace goalcal::io
