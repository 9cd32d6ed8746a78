// SPDX-License-Identifier: Apache-2.0
#include "goalcal/bayes/calibration.hpp"

#include "goalcal/goal/error_estimate.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace goalcal::bayes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxInitialDraws = 1000;
constexpr double kLowAcceptance = 0.01;

}  // namespace

LognormalPrior::LognormalPrior(Vector mean, Vector std) : ln_mean(std::move(mean)), ln_std(std::move(std)) {
  if (ln_mean.size() != ln_std.size() || ln_mean.size() == 0) {
    throw std::invalid_argument("prior ln_mean and ln_std must have the same nonzero length");
  }
  for (Eigen::Index i = 0; i < ln_std.size(); ++i) {
    if (!(ln_std[i] > 0.0) || !std::isfinite(ln_std[i]) || !std::isfinite(ln_mean[i])) {
      throw std::invalid_argument("prior ln_std must be positive and finite");
    }
  }
}

double LognormalPrior::log_density(const Vector& theta) const {
  if (theta.size() != ln_mean.size()) throw std::invalid_argument("prior: dimension mismatch");
  double out = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(theta[i] > 0.0)) return -kInf;
    const double l = std::log(theta[i]);
    const double z = (l - ln_mean[i]) / ln_std[i];
    out += -0.5 * z * z - l - std::log(ln_std[i] * std::sqrt(2.0 * std::numbers::pi));
  }
  return out;
}

Vector LognormalPrior::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Vector out(ln_mean.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = std::exp(ln_mean[i] + ln_std[i] * normal(rng));
  return out;
}

Vector LognormalPrior::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  // Inverse standard normal CDF by bisection on erfc; accurate to round-off.
  double lo = -40.0, hi = 40.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
  }
  const double z = 0.5 * (lo + hi);
  return (ln_mean.array() + z * ln_std.array()).exp().matrix();
}

double log_prior(const Vector& theta, const LognormalPrior& prior) { return prior.log_density(theta); }

double NoiseModel::cost(double dq) const { return dq * dq / (2.0 * sigma * sigma); }

double NoiseModel::log_likelihood(double dq) const {
  return -cost(dq) - std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
}

EllipticTarget::EllipticTarget(std::shared_ptr<const elliptic::EllipticDiscretization> disc,
                               elliptic::EllipticCoarseParams coarse, elliptic::NonlinearityKind kind,
                               goal::ErrorSource source)
    : disc_(std::move(disc)), coarse_(coarse), kind_(kind), source_(source) {
  const auto reference = pair(Vector::Constant(2, 1.0));
  u0_ = reference.solve_coarse_forward();
  q0_ = reference.qoi(u0_);
  if (source_ == goal::ErrorSource::kFirstOrder && elliptic::LinearizedErrorSolver::supports(kind_)) {
    linearized_ = std::make_unique<elliptic::LinearizedErrorSolver>(disc_, u0_, kind_);
  }
}

elliptic::EllipticModelPair EllipticTarget::pair(const Vector& theta) const {
  return elliptic::EllipticModelPair(disc_, coarse_, {theta[0], theta[1]}, kind_);
}

double EllipticTarget::qoi_error(const Vector& theta) const {
  if (linearized_) return linearized_->qoi_error({theta[0], theta[1]});
  const auto p = pair(theta);
  switch (source_) {
    case goal::ErrorSource::kExact: return p.qoi(p.solve_fine_forward_from(u0_).solution) - q0_;
    case goal::ErrorSource::kSecondOrder:
      return goal::estimate_q_ehat(p, u0_, goal::solve_primal_error_second_order(p, u0_));
    case goal::ErrorSource::kFirstOrder: break;
  }
  return goal::estimate_q_ehat(p, u0_, goal::solve_primal_error(p, u0_));
}

TumorTarget::TumorTarget(std::shared_ptr<const tumor::TumorDiscretization> disc,
                         tumor::TumorCoarseParams coarse, goal::ErrorSource source)
    : disc_(std::move(disc)), coarse_(coarse), source_(source) {
  const tumor::TumorModelPair reference(disc_, coarse_, {});
  Vector u0 = reference.solve_coarse_forward();
  q0_ = reference.qoi(u0);
  linearized_ = std::make_unique<tumor::LinearizedErrorSolver>(disc_, std::move(u0));
}

tumor::TumorFineParams TumorTarget::params(const Vector& theta) {
  return {theta[0], theta[1], theta[2], theta[3]};
}

double TumorTarget::qoi_error(const Vector& theta) const {
  if (source_ == goal::ErrorSource::kFirstOrder) return linearized_->qoi_error(params(theta));
  const tumor::TumorModelPair p(disc_, coarse_, params(theta));
  if (source_ == goal::ErrorSource::kExact) return p.qoi(p.solve_fine_forward()) - q0_;
  const Vector& u0 = linearized_->coarse_trajectory();
  return goal::estimate_q_ehat(p, u0, goal::solve_primal_error_second_order(p, u0));
}

Posterior make_posterior(const LognormalPrior& prior, const NoiseModel& noise,
                         const CalibrationTarget& target) {
  if (prior.dimension() != target.dimension()) {
    throw std::invalid_argument("prior dimension does not match the calibration target");
  }
  if (!(noise.sigma > 0.0)) throw std::invalid_argument("noise sigma must be positive");
  return [prior, noise, &target](const Vector& theta) {
    Evaluation e;
    e.log_prior = prior.log_density(theta);
    if (!std::isfinite(e.log_prior)) {
      e.log_likelihood = -kInf;
      e.cost = kInf;
      e.qoi_error = kNaN;
      return e;
    }
    try {
      e.qoi_error = target.qoi_error(theta);
    } catch (const std::exception&) {
      e.qoi_error = kNaN;
    }
    if (!std::isfinite(e.qoi_error)) {
      e.failed = true;
      e.log_likelihood = -kInf;
      e.cost = kInf;
      return e;
    }
    e.cost = noise.cost(-e.qoi_error);
    e.log_likelihood = noise.log_likelihood(-e.qoi_error);
    return e;
  };
}

ChainState initial_state(const Vector& theta, const Posterior& posterior, std::uint64_t seed) {
  ChainState s;
  s.theta = theta;
  s.eval = posterior(theta);
  s.seed = seed;
  if (!std::isfinite(s.eval.log_posterior())) {
    throw std::invalid_argument("initial chain state has a non-finite posterior");
  }
  return s;
}

bool mh_step(ChainState& state, const Vector& scale, Rng& rng, const Posterior& posterior) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  Vector proposal = state.theta;
  double log_jacobian = 0.0;
  for (Eigen::Index i = 0; i < proposal.size(); ++i) {
    const double step = scale[i] * normal(rng);
    if (step != 0.0) {
      proposal[i] = std::exp(std::log(state.theta[i]) + step);
      log_jacobian += step;
    }
  }
  ++state.proposals;
  const Evaluation eval = posterior(proposal);
  if (eval.failed) ++state.failures;
  // Random walk in ln(theta): the target density there carries prod(theta).
  const double log_alpha = eval.log_posterior() - state.eval.log_posterior() + log_jacobian;
  const double u = uniform(rng);
  const bool accept = std::isfinite(eval.log_posterior()) && (log_alpha >= 0.0 || std::log(u) < log_alpha);
  if (accept) {
    state.theta = proposal;
    state.eval = eval;
    ++state.acceptances;
    state.accepted.push_back({state.proposals - 1, proposal, eval.cost, eval.qoi_error, state.acceptances});
  }
  state.steps.push_back({state.eval.cost, state.eval.qoi_error, state.acceptances});
  if (state.record_trace) state.trace.push_back(state.theta);
  return accept;
}

ChainResult run_chain(const LognormalPrior& prior, const Posterior& posterior,
                      const ChainOptions& options, std::uint64_t seed) {
  if (options.max_samples < 0) throw std::invalid_argument("max_samples must be nonnegative");
  Rng rng(seed);
  ChainResult result;
  bool started = false;
  for (int k = 0; k < kMaxInitialDraws && !started; ++k) {
    const Vector theta = prior.sample(rng);
    const Evaluation eval = posterior(theta);
    if (std::isfinite(eval.log_posterior())) {
      result.state.theta = theta;
      result.state.eval = eval;
      started = true;
    }
  }
  if (!started) throw std::runtime_error("no prior draw gave a finite posterior");
  result.state.seed = seed;
  result.state.record_trace = options.record_trace;

  Vector scale = options.initial_scale.size() > 0 ? options.initial_scale
                                                  : Vector(options.proposal_scale * prior.ln_std);
  result.adapt_until = options.adapt ? static_cast<std::int64_t>(options.burn_in_fraction *
                                                                 static_cast<double>(options.max_samples))
                                     : 0;
  std::int64_t batch_accepts = 0;
  for (std::int64_t n = 0; n < options.max_samples; ++n) {
    if (options.cancel != nullptr && options.cancel->load()) break;
    if (mh_step(result.state, scale, rng, posterior)) ++batch_accepts;
    if (n < result.adapt_until && (n + 1) % options.adapt_interval == 0) {
      const double rate = static_cast<double>(batch_accepts) / static_cast<double>(options.adapt_interval);
      if (rate < options.target_low) scale *= 0.7;
      if (rate > options.target_high) scale *= 1.4;
      batch_accepts = 0;
    }
  }
  result.final_scale = scale;
  return result;
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  // splitmix64 of the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(chain) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

PosteriorSummary summarize(const std::vector<ChainResult>& chains, double burn_in_fraction,
                           const CalibrationTarget& target, const NoiseModel& noise) {
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw std::invalid_argument("burn_in fraction must lie in [0, 1)");
  }
  PosteriorSummary s;
  s.names = target.parameter_names();
  s.q_coarse = target.q_coarse();
  s.sigma = noise.sigma;
  s.source = target.source();
  const auto m = static_cast<Eigen::Index>(target.dimension());
  Vector sum = Vector::Zero(m);
  Vector sum_sq = Vector::Zero(m);
  for (const auto& c : chains) {
    const auto& acc = c.state.accepted;
    const auto n = static_cast<std::int64_t>(acc.size());
    const auto drop = static_cast<std::int64_t>(std::floor(burn_in_fraction * static_cast<double>(n)));
    for (std::int64_t k = drop; k < n; ++k) {
      sum += acc[static_cast<std::size_t>(k)].theta;
    }
    s.accepted_per_chain.push_back(n);
    s.retained_per_chain.push_back(n - drop);
    s.pooled_samples += n - drop;
    s.acceptance_rates.push_back(c.state.acceptance_rate());
    s.low_acceptance.push_back(c.state.acceptance_rate() < kLowAcceptance);
    s.seeds.push_back(c.state.seed);
  }
  if (s.pooled_samples == 0) throw std::runtime_error("no accepted samples remain after burn-in");
  s.mean = sum / static_cast<double>(s.pooled_samples);
  for (const auto& c : chains) {
    const auto& acc = c.state.accepted;
    const auto n = static_cast<std::int64_t>(acc.size());
    const auto drop = static_cast<std::int64_t>(std::floor(burn_in_fraction * static_cast<double>(n)));
    for (std::int64_t k = drop; k < n; ++k) {
      sum_sq += (acc[static_cast<std::size_t>(k)].theta - s.mean).array().square().matrix();
    }
  }
  s.std = s.pooled_samples > 1 ? Vector((sum_sq / static_cast<double>(s.pooled_samples - 1)).cwiseSqrt())
                               : Vector::Zero(m);
  try {
    s.qoi_error_at_mean = target.qoi_error(s.mean);
  } catch (const std::exception&) {
    s.qoi_error_at_mean = kNaN;
  }
  return s;
}

CalibrationRun run_chains(int n_chains, const ChainOptions& options, std::uint64_t seed,
                          const LognormalPrior& prior, const NoiseModel& noise,
                          const CalibrationTarget& target) {
  if (n_chains < 1) throw std::invalid_argument("at least one chain is required");
  const Posterior posterior = make_posterior(prior, noise, target);
  CalibrationRun run;
  run.chains.resize(static_cast<std::size_t>(n_chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
  std::vector<std::thread> threads;
  for (int c = 0; c < n_chains; ++c) {
    threads.emplace_back([&, c] {
      try {
        run.chains[static_cast<std::size_t>(c)] = run_chain(prior, posterior, options, chain_seed(seed, c));
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  run.summary = summarize(run.chains, options.burn_in_fraction, target, noise);
  return run;
}

std::vector<DiagnosticRow> diagnostics(const ChainState& chain) {
  std::vector<DiagnosticRow> rows;
  rows.reserve(chain.steps.size());
  for (std::size_t k = 0; k < chain.steps.size(); ++k) {
    const auto& s = chain.steps[k];
    rows.push_back({static_cast<std::int64_t>(k), s.cost, s.qoi_error,
                    static_cast<double>(s.accepted_count) / static_cast<double>(k + 1)});
  }
  return rows;
}

void to_json(nlohmann::json& j, const PosteriorSummary& s) {
  std::vector<double> mean(s.mean.data(), s.mean.data() + s.mean.size());
  std::vector<double> std(s.std.data(), s.std.data() + s.std.size());
  j = {{"parameters", s.names},
       {"mean", mean},
       {"std", std},
       {"pooled_samples", s.pooled_samples},
       {"acceptance_rates", s.acceptance_rates},
       {"accepted_per_chain", s.accepted_per_chain},
       {"retained_per_chain", s.retained_per_chain},
       {"low_acceptance", s.low_acceptance},
       {"seeds", s.seeds},
       {"q_coarse", s.q_coarse},
       {"qoi_error_at_mean", std::isfinite(s.qoi_error_at_mean) ? nlohmann::json(s.qoi_error_at_mean)
                                                               : nlohmann::json(nullptr)},
       {"relative_error_at_mean", std::isfinite(s.qoi_error_at_mean)
                                      ? nlohmann::json(s.relative_error_at_mean())
                                      : nlohmann::json(nullptr)},
       {"sigma", s.sigma},
       {"error_source", goal::to_string(s.source)},
       {"cost_definition", "(Q(u0) - Q(u))^2 / (2 sigma^2), without the normalization constant"}};
}

void from_json(const nlohmann::json& j, PosteriorSummary& s) {
  s.names = j.at("parameters").get<std::vector<std::string>>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std = j.at("std").get<std::vector<double>>();
  s.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.std = Eigen::Map<const Vector>(std.data(), static_cast<Eigen::Index>(std.size()));
  s.pooled_samples = j.at("pooled_samples").get<std::int64_t>();
  s.acceptance_rates = j.at("acceptance_rates").get<std::vector<double>>();
  s.accepted_per_chain = j.at("accepted_per_chain").get<std::vector<std::int64_t>>();
  s.retained_per_chain = j.at("retained_per_chain").get<std::vector<std::int64_t>>();
  s.low_acceptance = j.at("low_acceptance").get<std::vector<bool>>();
  s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  s.q_coarse = j.at("q_coarse").get<double>();
  s.qoi_error_at_mean = j.at("qoi_error_at_mean").is_null() ? kNaN : j.at("qoi_error_at_mean").get<double>();
  s.sigma = j.at("sigma").get<double>();
  s.source = goal::parse_error_source(j.at("error_source").get<std::string>());
}

}  // namespace goalcal::bayes
