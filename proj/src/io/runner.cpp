// SPDX-License-Identifier: Apache-2.0
#include "goalcal/io/runner.hpp"

#include "goalcal/fem/field.hpp"
#include "goalcal/io/export.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace goalcal::io {

namespace fs = std::filesystem;

Command parse_command(const std::string& name) {
  if (name == "verify") return Command::kVerify;
  if (name == "order-study") return Command::kOrderStudy;
  if (name == "calibrate") return Command::kCalibrate;
  throw std::invalid_argument("unknown command '" + name + "'");
}

std::string to_string(Command command) {
  switch (command) {
    case Command::kVerify: return "verify";
    case Command::kOrderStudy: return "order-study";
    case Command::kCalibrate: return "calibrate";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const RunManifest& m) {
  auto timings = nlohmann::json::object();
  for (const auto& [phase, seconds] : m.timings) timings[phase] = seconds;
  j = {{"command", m.command},
       {"complete", m.complete},
       {"config_hash", m.config_hash},
       {"config", m.config},
       {"output_dir", m.output_dir.string()},
       {"timings_seconds", timings},
       {"artifacts", m.artifacts},
       {"artifact_hash", m.artifact_hash}};
  if (!m.complete) {
    j["failed_phase"] = m.failed_phase;
    j["error"] = m.error;
  }
}

std::unique_ptr<goal::ModelPair> elliptic_homotopy(const RunConfig& config,
                                                   std::shared_ptr<const elliptic::EllipticDiscretization> disc,
                                                   double s) {
  const double kappa0 = config.elliptic_coarse.kappa0;
  const elliptic::EllipticFineParams fine{kappa0 + s * (config.elliptic_fine.kappa - kappa0),
                                          s * config.elliptic_fine.alpha};
  return std::make_unique<elliptic::EllipticModelPair>(std::move(disc), config.elliptic_coarse, fine,
                                                       config.nonlinearity);
}

namespace {

class Run {
 public:
  Run(const RunConfig& config, const RunOptions& options)
      : config_(config), options_(options) {
    manifest_.output_dir = options.output_dir ? *options.output_dir : config.output_dir;
    manifest_.command = to_string(options.command);
    manifest_.config = to_json(config);
    manifest_.config_hash = git_blob_hash(config.text);
    if (options.seed) manifest_.config["mcmc"]["seed"] = *options.seed;
  }

  RunManifest execute() {
    try {
      phase("setup", [&] { fs::create_directories(dir()); });
      switch (options_.command) {
        case Command::kVerify: verify(); break;
        case Command::kOrderStudy: order_study(); break;
        case Command::kCalibrate: calibrate(); break;
      }
    } catch (const std::exception& e) {
      fail(e.what());
      throw;
    } catch (...) {
      fail("unknown error");
      throw;
    }
    manifest_.complete = true;
    manifest_.current_phase_cleanup();
    finish("manifest.json");
    return manifest_;
  }

 private:
  struct Manifest : RunManifest {
    std::string current;
    void current_phase_cleanup() { current.clear(); }
  };

  const fs::path& dir() const { return manifest_.output_dir; }

  void log(const std::string& message) const {
    if (options_.log) options_.log(message);
  }

  template <typename F>
  void phase(const std::string& name, F&& body) {
    manifest_.current = name;
    const auto start = std::chrono::steady_clock::now();
    body();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest_.timings.emplace_back(name, seconds);
    char line[160];
    std::snprintf(line, sizeof line, "%s: %.2f s", name.c_str(), seconds);
    log(line);
  }

  fs::path artifact(const std::string& name) {
    manifest_.artifacts.push_back(name);
    return dir() / name;
  }

  void fail(const std::string& what) {
    manifest_.failed_phase = manifest_.current;
    manifest_.error = what;
    for (auto& name : manifest_.artifacts) {
      std::error_code ec;
      if (fs::exists(dir() / name, ec)) {
        fs::rename(dir() / name, dir() / (name + ".partial"), ec);
        if (!ec) name += ".partial";
      }
    }
    try {
      finish("manifest.json.partial");
    } catch (...) {
    }
  }

  void finish(const std::string& file) {
    std::string listing;
    auto names = manifest_.artifacts;
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      std::error_code ec;
      const auto hash = fs::exists(dir() / name, ec) ? file_blob_hash(dir() / name) : std::string("missing");
      listing += name + ' ' + hash + '\n';
    }
    manifest_.artifact_hash = git_blob_hash(listing);
    write_json(dir() / file, static_cast<const RunManifest&>(manifest_));
  }

  bool tumor() const { return config_.application == Application::kTumor; }

  std::shared_ptr<const elliptic::EllipticDiscretization> elliptic_disc() const {
    return elliptic::EllipticDiscretization::create(config_.nx, config_.ny);
  }

  std::shared_ptr<const tumor::TumorDiscretization> tumor_disc() const {
    return tumor::TumorDiscretization::create(config_.nx, config_.ny, config_.time, config_.qoi);
  }

  void verify() {
    goal::ErrorEstimateReport report;
    if (tumor()) {
      std::shared_ptr<const tumor::TumorDiscretization> disc;
      phase("discretize", [&] { disc = tumor_disc(); });
      const tumor::TumorModelPair pair(disc, config_.tumor_coarse, config_.tumor_fine);
      phase("estimates", [&] { report = goal::compare_estimates(pair, config_.verify_sources); });
      phase("write", [&] {
        const tumor::Trajectory u0 = tumor::march_coarse_forward(disc, config_.tumor_coarse);
        tumor::write_trajectory(u0, config_.qoi, config_.trajectory_levels, dir(), "u0");
        for (int n : config_.trajectory_levels) artifact("u0_" + std::to_string(n) + ".csv");
        artifact("u0_manifest.json");
        export_report(report, artifact("report.json"));
      });
    } else {
      std::shared_ptr<const elliptic::EllipticDiscretization> disc;
      phase("discretize", [&] { disc = elliptic_disc(); });
      const elliptic::EllipticModelPair pair(disc, config_.elliptic_coarse, config_.elliptic_fine,
                                             config_.nonlinearity);
      phase("estimates", [&] { report = goal::compare_estimates(pair, config_.verify_sources); });
      phase("write", [&] {
        const Vector u0 = pair.solve_coarse_forward();
        fem::write_field_csv(fem::Field(disc->mesh_ptr(), u0), artifact("u0.csv"));
        fem::write_field_csv(fem::Field(disc->mesh_ptr(), pair.solve_coarse_adjoint(u0)), artifact("p0.csv"));
        export_report(report, artifact("report.json"));
      });
    }
    char line[200];
    std::snprintf(line, sizeof line, "Q(u0) = %.6f", report.q_coarse);
    log(line);
    if (report.exact_error) {
      std::snprintf(line, sizeof line, "Q(u) = %.6f, exact error = %.6f", *report.q_fine, *report.exact_error);
      log(line);
    }
    for (const auto& s : report.estimates) {
      std::snprintf(line, sizeof line, "%-12s xi1 = %.6f  xi2 = %.6f  Q(e_hat) = %.6f", goal::to_string(s.source).c_str(),
                    s.xi1, s.xi2, s.q_ehat);
      log(line);
    }
  }

  void order_study() {
    goal::Homotopy family;
    if (tumor()) {
      std::shared_ptr<const tumor::TumorDiscretization> disc;
      phase("discretize", [&] { disc = tumor_disc(); });
      family = [this, disc](double s) -> std::unique_ptr<goal::ModelPair> {
        return std::make_unique<tumor::TumorModelPair>(disc, config_.tumor_coarse, config_.tumor_fine, s);
      };
    } else {
      std::shared_ptr<const elliptic::EllipticDiscretization> disc;
      phase("discretize", [&] { disc = elliptic_disc(); });
      family = [this, disc](double s) { return elliptic_homotopy(config_, disc, s); };
    }
    goal::OrderStudy study;
    try {
      phase("study", [&] { study = goal::order_study(family, config_.order_levels, &study); });
    } catch (...) {
      export_order_study(study, artifact("order_study.csv"));
      throw;
    }
    phase("write", [&] {
      export_order_study(study, artifact("order_study.csv"));
      write_json(artifact("order_study.json"), study);
    });
    char line[200];
    for (const auto& r : study.rows) {
      std::snprintf(line, sizeof line, "s = %-8g exact = %.6e  |exact - Q(e_hat)| = %.3e (first) %.3e (second)",
                    r.level, r.exact_error, r.deficit_first(), r.deficit_second());
      log(line);
    }
    if (study.slope_first) {
      std::snprintf(line, sizeof line, "log-log slope of the first-order deficit: %.3f", *study.slope_first);
      log(line);
    }
  }

  void calibrate() {
    std::unique_ptr<bayes::CalibrationTarget> target;
    phase("coarse", [&] {
      if (tumor()) {
        target = std::make_unique<bayes::TumorTarget>(tumor_disc(), config_.tumor_coarse, config_.estimator);
      } else {
        target = std::make_unique<bayes::EllipticTarget>(elliptic_disc(), config_.elliptic_coarse,
                                                         config_.nonlinearity, config_.estimator);
      }
    });
    bayes::ChainOptions chain;
    chain.max_samples = config_.mcmc.max_samples;
    chain.burn_in_fraction = config_.mcmc.burn_in;
    chain.proposal_scale = config_.mcmc.proposal_scale;
    chain.adapt = config_.mcmc.adapt;
    const std::uint64_t seed = options_.seed ? *options_.seed : config_.mcmc.seed;
    bayes::CalibrationRun run;
    phase("calibration", [&] {
      run = bayes::run_chains(config_.mcmc.chains, chain, seed, config_.prior, config_.noise, *target);
    });
    phase("write", [&] {
      for (std::size_t c = 0; c < run.chains.size(); ++c) {
        export_chain(run.chains[c].state, artifact("chain_" + std::to_string(c) + ".csv"));
        export_diagnostics(bayes::diagnostics(run.chains[c].state),
                           artifact("diagnostics_" + std::to_string(c) + ".csv"));
      }
      export_summary(run.summary, artifact("summary.json"));
    });
    const auto& s = run.summary;
    std::string line = "posterior mean:";
    char buf[80];
    for (Eigen::Index i = 0; i < s.mean.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %s = %.4g (std %.3g)", s.names[static_cast<std::size_t>(i)].c_str(), s.mean[i],
                    s.std[i]);
      line += buf;
    }
    log(line);
    std::snprintf(buf, sizeof buf, "Q(e_hat) at mean = %.5f (%.2f%% of Q(u0)), %lld pooled samples",
                  s.qoi_error_at_mean, 100.0 * s.relative_error_at_mean(), static_cast<long long>(s.pooled_samples));
    log(buf);
  }

  const RunConfig& config_;
  const RunOptions& options_;
  Manifest manifest_;
};

}  // namespace

RunManifest run_experiment(const RunConfig& config, const RunOptions& options) {
  return Run(config, options).execute();
}

}  // namespace goalcal::io
