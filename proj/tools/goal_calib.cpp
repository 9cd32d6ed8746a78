// SPDX-License-Identifier: Apache-2.0
// goal-calib <verify|order-study|calibrate> --config <path> [--seed N] [--out DIR]
#include "goalcal/fem/types.hpp"
#include "goalcal/io/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-oriented error estimation and Bayesian calibration"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
  app.add_option("command", command, "verify | order-study | calibrate")
      ->required()
      ->check(CLI::IsMember({"verify", "order-study", "calibrate"}));
  app.add_option("--config,-c", config_path, "run configuration (YAML)")->required();
  app.add_option("--seed", seed, "override mcmc.seed");
  app.add_option("--out", out, "output directory (overrides output_dir)");
  app.add_flag("--quiet,-q", quiet, "suppress progress output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  goalcal::io::RunConfig config;
  try {
    config = goalcal::io::parse_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "goal-calib: config error: %s\n", e.what());
    return kConfigError;
  }

  goalcal::io::RunOptions options;
  options.command = goalcal::io::parse_command(command);
  options.seed = seed;
  if (out) options.output_dir = *out;
  if (!quiet) options.log = [](const std::string& line) { std::cout << line << '\n' << std::flush; };

  try {
    const auto manifest = goalcal::io::run_experiment(config, options);
    if (!quiet) std::cout << "wrote " << (manifest.output_dir / "manifest.json").string() << '\n';
  } catch (const goalcal::io::ConfigError& e) {
    std::fprintf(stderr, "goal-calib: config error: %s\n", e.what());
    return kConfigError;
  } catch (const goalcal::SolverError& e) {
    std::fprintf(stderr, "goal-calib: solver failure: %s\n", e.what());
    return kSolverFailure;
  } catch (const goalcal::NonconvergenceError& e) {
    std::fprintf(stderr, "goal-calib: solver failure: %s\n", e.what());
    return kSolverFailure;
  } catch (const goalcal::NumericError& e) {
    std::fprintf(stderr, "goal-calib: solver failure: %s\n", e.what());
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "goal-calib: config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "goal-calib: %s\n", e.what());
    return 1;
  }
  return 0;
}
