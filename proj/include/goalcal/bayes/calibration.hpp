// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/elliptic/elliptic_pair.hpp"
#include "goalcal/goal/error_estimate.hpp"
#include "goalcal/tumor/tumor_pair.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace goalcal::bayes {

using Rng = std::mt19937_64;

/// Independent lognormal components: ln(theta_i) ~ N(ln_mean_i, ln_std_i^2).
struct LognormalPrior {
  Vector ln_mean;
  Vector ln_std;

  LognormalPrior() = default;
  LognormalPrior(Vector mean, Vector std);

  std::size_t dimension() const { return static_cast<std::size_t>(ln_mean.size()); }
  /// Density in theta (with the 1/theta_i factors); -inf if any theta_i <= 0.
  double log_density(const Vector& theta) const;
  Vector sample(Rng& rng) const;
  /// Componentwise quantile of the marginal lognormal.
  Vector quantile(double p) const;
};

double log_prior(const Vector& theta, const LognormalPrior& prior);

struct NoiseModel {
  double sigma = 0.01;

  /// dq^2 / (2 sigma^2)
  double cost(double dq) const;
  /// -cost - ln(sigma sqrt(2 pi))
  double log_likelihood(double dq) const;
};

/// Maps a fine-parameter vector to the estimated QoI error Q(u) - Q(u0)
/// against a fixed coarse solution. Implementations must be safe to call
/// concurrently.
class CalibrationTarget {
 public:
  virtual ~CalibrationTarget() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual double q_coarse() const = 0;
  virtual double qoi_error(const Vector& theta) const = 0;
  /// Exact fine solve, or which approximate error problem is solved.
  virtual goal::ErrorSource source() const = 0;
  bool exact() const { return source() == goal::ErrorSource::kExact; }
};

/// theta = (kappa, alpha).
class EllipticTarget final : public CalibrationTarget {
 public:
  EllipticTarget(std::shared_ptr<const elliptic::EllipticDiscretization> disc,
                 elliptic::EllipticCoarseParams coarse, elliptic::NonlinearityKind kind,
                 goal::ErrorSource source = goal::ErrorSource::kFirstOrder);

  std::size_t dimension() const override { return 2; }
  std::vector<std::string> parameter_names() const override { return {"kappa", "alpha"}; }
  double q_coarse() const override { return q0_; }
  double qoi_error(const Vector& theta) const override;
  goal::ErrorSource source() const override { return source_; }

  elliptic::EllipticModelPair pair(const Vector& theta) const;

 private:
  std::shared_ptr<const elliptic::EllipticDiscretization> disc_;
  elliptic::EllipticCoarseParams coarse_;
  elliptic::NonlinearityKind kind_;
  goal::ErrorSource source_;
  Vector u0_;
  double q0_ = 0.0;
  std::unique_ptr<elliptic::LinearizedErrorSolver> linearized_;
};

/// theta = (lambda_p, lambda_d, epsilon, C).
class TumorTarget final : public CalibrationTarget {
 public:
  TumorTarget(std::shared_ptr<const tumor::TumorDiscretization> disc, tumor::TumorCoarseParams coarse,
              goal::ErrorSource source = goal::ErrorSource::kFirstOrder);

  std::size_t dimension() const override { return 4; }
  std::vector<std::string> parameter_names() const override {
    return {"lambda_p", "lambda_d", "epsilon", "C"};
  }
  double q_coarse() const override { return q0_; }
  double qoi_error(const Vector& theta) const override;
  goal::ErrorSource source() const override { return source_; }

  static tumor::TumorFineParams params(const Vector& theta);

 private:
  std::shared_ptr<const tumor::TumorDiscretization> disc_;
  tumor::TumorCoarseParams coarse_;
  goal::ErrorSource source_;
  std::unique_ptr<tumor::LinearizedErrorSolver> linearized_;
  double q0_ = 0.0;
};

/// Result of one posterior evaluation.
struct Evaluation {
  double log_prior = 0.0;
  double log_likelihood = 0.0;
  double cost = 0.0;
  double qoi_error = 0.0;  // estimated Q(u) - Q(u0); the misfit is its negative
  bool failed = false;

  double log_posterior() const { return log_prior + log_likelihood; }
};

using Posterior = std::function<Evaluation(const Vector& theta)>;

/// Prior times the Gaussian likelihood of the estimated QoI error. Solver
/// failures give a -inf likelihood.
Posterior make_posterior(const LognormalPrior& prior, const NoiseModel& noise,
                         const CalibrationTarget& target);

struct Sample {
  std::int64_t index = 0;  // proposal index at which it was accepted
  Vector theta;
  double cost = 0.0;
  double qoi_error = 0.0;
  std::int64_t accepted_count = 0;  // accepted samples so far, this one included
};

/// Chain state after one proposal.
struct StepRecord {
  double cost = 0.0;
  double qoi_error = 0.0;
  std::int64_t accepted_count = 0;
};

struct ChainState {
  Vector theta;
  Evaluation eval;
  std::vector<Sample> accepted;
  std::vector<StepRecord> steps;
  std::int64_t proposals = 0;
  std::int64_t acceptances = 0;
  std::int64_t failures = 0;
  std::uint64_t seed = 0;
  // Optional record of the state after every step, for sampler checks.
  bool record_trace = false;
  std::vector<Vector> trace;

  double acceptance_rate() const {
    return proposals > 0 ? static_cast<double>(acceptances) / static_cast<double>(proposals) : 0.0;
  }
};

/// Starts a chain at theta; throws if the posterior is not finite there.
ChainState initial_state(const Vector& theta, const Posterior& posterior, std::uint64_t seed);

/// One random-walk Metropolis step in ln(theta) with per-component scale.
/// Returns true when the proposal was accepted.
bool mh_step(ChainState& state, const Vector& scale, Rng& rng, const Posterior& posterior);

struct ChainOptions {
  std::int64_t max_samples = 5000;     // proposals per chain
  double burn_in_fraction = 0.5;       // of accepted samples
  Vector initial_scale;                // ln-space step; empty means proposal_scale * ln_std
  double proposal_scale = 0.5;
  bool adapt = true;
  std::int64_t adapt_interval = 50;
  double target_low = 0.2;
  double target_high = 0.4;
  bool record_trace = false;
  // Cooperative cancellation, checked between steps.
  const std::atomic<bool>* cancel = nullptr;
};

struct ChainResult {
  ChainState state;
  Vector final_scale;
  std::int64_t adapt_until = 0;
};

/// Runs one chain from a prior draw (redrawn until the posterior is finite).
ChainResult run_chain(const LognormalPrior& prior, const Posterior& posterior,
                      const ChainOptions& options, std::uint64_t seed);

struct PosteriorSummary {
  std::vector<std::string> names;
  Vector mean;
  Vector std;
  std::int64_t pooled_samples = 0;
  std::vector<double> acceptance_rates;
  std::vector<std::int64_t> accepted_per_chain;
  std::vector<std::int64_t> retained_per_chain;
  std::vector<bool> low_acceptance;
  double qoi_error_at_mean = 0.0;
  double q_coarse = 0.0;
  double relative_error_at_mean() const { return qoi_error_at_mean / q_coarse; }
  double sigma = 0.0;
  goal::ErrorSource source = goal::ErrorSource::kFirstOrder;
  std::vector<std::uint64_t> seeds;
};

void to_json(nlohmann::json& j, const PosteriorSummary& s);
void from_json(const nlohmann::json& j, PosteriorSummary& s);

/// Seed of chain c derived from the run seed.
std::uint64_t chain_seed(std::uint64_t seed, int chain);

/// Discards the first burn-in fraction of each chain's accepted samples,
/// pools the rest and evaluates the target at the pooled mean.
PosteriorSummary summarize(const std::vector<ChainResult>& chains, double burn_in_fraction,
                           const CalibrationTarget& target, const NoiseModel& noise);

struct CalibrationRun {
  std::vector<ChainResult> chains;
  PosteriorSummary summary;
};

/// Independent chains on separate threads.
CalibrationRun run_chains(int n_chains, const ChainOptions& options, std::uint64_t seed,
                          const LognormalPrior& prior, const NoiseModel& noise,
                          const CalibrationTarget& target);

/// Per proposal: cost and QoI error of the current accepted sample, and the
/// running acceptance rate.
struct DiagnosticRow {
  std::int64_t sample_index = 0;
  double cost = 0.0;
  double qoi_error = 0.0;
  double acceptance_rate = 0.0;
};
std::vector<DiagnosticRow> diagnostics(const ChainState& chain);

}  // namespace goalcal::bayes
