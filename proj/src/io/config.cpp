// SPDX-License-Identifier: Apache-2.0
#include "goalcal/io/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace goalcal::io {

namespace {

// Defaults of the tumor prior: ln-mean ln(test value) + 0.16, variance 0.16.
constexpr double kTumorLnShift = 0.16;
constexpr double kTumorLnStd = 0.4;
constexpr int kMaxCells = 4096;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

/// Typed access to one YAML mapping with key tracking for error messages.
class Block {
 public:
  Block(YAML::Node node, std::string path, std::set<std::string> allowed)
      : node_(std::move(node)), path_(std::move(path)) {
    if (!node_ || node_.IsNull()) {
      node_ = YAML::Node(YAML::NodeType::Map);
      return;
    }
    if (!node_.IsMap()) throw ConfigError(path_, "expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) throw ConfigError(join(path_, key), "unknown key");
    }
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }
  YAML::Node child(const std::string& key) const { return has(key) ? YAML::Node(node_[key]) : YAML::Node(); }
  std::string path(const std::string& key) const { return join(path_, key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? convert<T>(key) : fallback;
  }

  template <typename T>
  T require(const std::string& key) const {
    if (!has(key)) throw ConfigError(path(key), "missing required key");
    return convert<T>(key);
  }

  template <typename T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback) const {
    if (!has(key)) return fallback;
    const auto n = node_[key];
    if (!n.IsSequence()) throw ConfigError(path(key), "expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        out.push_back(n[i].as<T>());
      } catch (const YAML::Exception&) {
        throw ConfigError(path(key) + "[" + std::to_string(i) + "]", "wrong value type");
      }
    }
    return out;
  }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    try {
      return node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path(key), "wrong value type");
    }
  }

  YAML::Node node_;
  std::string path_;
};

void positive(double v, const std::string& key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be positive");
}

void nonnegative(double v, const std::string& key) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be nonnegative");
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

goal::ErrorSource source_at(const std::string& name, const std::string& key) {
  try {
    return goal::parse_error_source(name);
  } catch (const std::invalid_argument&) {
    throw ConfigError(key, "unknown error source '" + name + "' (first-order, second-order, exact-fine-oracle)");
  }
}

}  // namespace

std::string to_string(Application app) { return app == Application::kElliptic ? "elliptic" : "tumor"; }

Vector RunConfig::test_parameters() const {
  if (application == Application::kElliptic) {
    return Eigen::Vector2d(elliptic_fine.kappa, elliptic_fine.alpha);
  }
  return Eigen::Vector4d(tumor_fine.lambda_p, tumor_fine.lambda_d, tumor_fine.epsilon, tumor_fine.C);
}

bayes::LognormalPrior default_prior(Application app) {
  if (app == Application::kElliptic) {
    return {Eigen::Vector2d(-0.6535, 2.5475), Eigen::Vector2d(0.1997, 0.5003)};
  }
  const tumor::TumorFineParams t;
  const Eigen::Vector4d mean(std::log(t.lambda_p), std::log(t.lambda_d), std::log(t.epsilon), std::log(t.C));
  return {(mean.array() + kTumorLnShift).matrix(), Eigen::Vector4d::Constant(kTumorLnStd)};
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_string(text.str());
}

RunConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  const Block top(root, "",
                  {"application", "output_dir", "mesh", "elliptic", "tumor", "time", "qoi", "prior", "noise",
                   "estimator", "verify", "order_study", "mcmc"});
  RunConfig c;
  c.text = text;

  const auto app = top.require<std::string>("application");
  if (app == "elliptic") {
    c.application = Application::kElliptic;
  } else if (app == "tumor") {
    c.application = Application::kTumor;
  } else {
    throw ConfigError("application", "unknown application '" + app + "' (elliptic, tumor)");
  }
  const bool is_tumor = c.application == Application::kTumor;
  c.output_dir = top.get<std::string>("output_dir", "results/" + app);

  const Block mesh(top.child("mesh"), "mesh", {"nx", "ny"});
  c.nx = mesh.get<int>("nx", 50);
  c.ny = mesh.get<int>("ny", c.nx);
  if (c.nx < 1 || c.nx > kMaxCells) throw ConfigError("mesh.nx", "must lie in [1, 4096]");
  if (c.ny < 1 || c.ny > kMaxCells) throw ConfigError("mesh.ny", "must lie in [1, 4096]");

  if (is_tumor) {
    if (top.has("elliptic")) throw ConfigError("elliptic", "block not allowed for the tumor application");
    const Block tb(top.child("tumor"), "tumor", {"coarse", "test", "trajectory_levels"});
    const Block coarse(tb.child("coarse"), "tumor.coarse", {"lambda_p0", "lambda_d0", "D"});
    c.tumor_coarse.lambda_p0 = coarse.get("lambda_p0", c.tumor_coarse.lambda_p0);
    c.tumor_coarse.lambda_d0 = coarse.get("lambda_d0", c.tumor_coarse.lambda_d0);
    c.tumor_coarse.D = coarse.get("D", c.tumor_coarse.D);
    positive(c.tumor_coarse.lambda_p0, "tumor.coarse.lambda_p0");
    positive(c.tumor_coarse.lambda_d0, "tumor.coarse.lambda_d0");
    positive(c.tumor_coarse.D, "tumor.coarse.D");
    const Block test(tb.child("test"), "tumor.test", {"lambda_p", "lambda_d", "epsilon", "C"});
    c.tumor_fine.lambda_p = test.get("lambda_p", c.tumor_fine.lambda_p);
    c.tumor_fine.lambda_d = test.get("lambda_d", c.tumor_fine.lambda_d);
    c.tumor_fine.epsilon = test.get("epsilon", c.tumor_fine.epsilon);
    c.tumor_fine.C = test.get("C", c.tumor_fine.C);
    positive(c.tumor_fine.lambda_p, "tumor.test.lambda_p");
    positive(c.tumor_fine.lambda_d, "tumor.test.lambda_d");
    positive(c.tumor_fine.epsilon, "tumor.test.epsilon");
    positive(c.tumor_fine.C, "tumor.test.C");

    if (!top.has("time")) throw ConfigError("time.dt", "missing required key");
    const Block time(top.child("time"), "time", {"dt", "t_final"});
    const double dt = time.require<double>("dt");
    const double t_final = time.get("t_final", 1.0);
    positive(dt, "time.dt");
    positive(t_final, "time.t_final");
    try {
      c.time = tumor::TimeGrid::uniform(dt, t_final);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("time.t_final", e.what());
    }

    const Block q(top.child("qoi"), "qoi", {"observation_times", "window", "window_rule", "include_final"});
    c.qoi.observation_times = q.list<double>("observation_times", c.qoi.observation_times);
    c.qoi.window = q.get("window", c.qoi.window);
    positive(c.qoi.window, "qoi.window");
    try {
      c.qoi.rule = tumor::parse_window_rule(q.get<std::string>("window_rule", "interior"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("qoi.window_rule", e.what());
    }
    c.qoi.include_final = q.get("include_final", true);
    try {
      (void)c.qoi.time_weights(c.time);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("qoi.observation_times", e.what());
    }

    const int n = c.time.n_steps;
    c.trajectory_levels = tb.list<int>("trajectory_levels", {0, n / 4, n / 2, (3 * n) / 4, n});
    for (int level : c.trajectory_levels) {
      if (level < 0 || level > n) throw ConfigError("tumor.trajectory_levels", "level outside [0, n_steps]");
    }
  } else {
    for (const char* key : {"tumor", "time", "qoi"}) {
      if (top.has(key)) throw ConfigError(key, "block not allowed for the elliptic application");
    }
    const Block eb(top.child("elliptic"), "elliptic", {"kappa0", "nonlinearity", "test"});
    c.elliptic_coarse.kappa0 = eb.get("kappa0", c.elliptic_coarse.kappa0);
    positive(c.elliptic_coarse.kappa0, "elliptic.kappa0");
    try {
      c.nonlinearity = elliptic::parse_nonlinearity(eb.get<std::string>("nonlinearity", "quadratic"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("elliptic.nonlinearity", e.what());
    }
    const Block test(eb.child("test"), "elliptic.test", {"kappa", "alpha"});
    c.elliptic_fine.kappa = test.get("kappa", c.elliptic_fine.kappa);
    c.elliptic_fine.alpha = test.get("alpha", c.elliptic_fine.alpha);
    positive(c.elliptic_fine.kappa, "elliptic.test.kappa");
    nonnegative(c.elliptic_fine.alpha, "elliptic.test.alpha");
  }

  const auto fallback = default_prior(c.application);
  const Block prior(top.child("prior"), "prior", {"ln_mean", "ln_std"});
  const auto mean = prior.list<double>("ln_mean", to_std(fallback.ln_mean));
  const auto std = prior.list<double>("ln_std", to_std(fallback.ln_std));
  const std::size_t dim = is_tumor ? 4 : 2;
  if (mean.size() != dim) throw ConfigError("prior.ln_mean", "expected " + std::to_string(dim) + " entries");
  if (std.size() != dim) throw ConfigError("prior.ln_std", "expected " + std::to_string(dim) + " entries");
  for (double s : std) positive(s, "prior.ln_std");
  for (double m : mean) {
    if (!std::isfinite(m)) throw ConfigError("prior.ln_mean", "must be finite");
  }
  c.prior = bayes::LognormalPrior(to_vector(mean), to_vector(std));

  const Block noise(top.child("noise"), "noise", {"sigma"});
  c.noise.sigma = noise.get("sigma", 0.01);
  positive(c.noise.sigma, "noise.sigma");

  c.estimator = source_at(top.get<std::string>("estimator", "first-order"), "estimator");

  const Block verify(top.child("verify"), "verify", {"sources"});
  if (verify.has("sources")) {
    c.verify_sources.clear();
    for (const auto& s : verify.list<std::string>("sources", {})) {
      c.verify_sources.push_back(source_at(s, "verify.sources"));
    }
    if (c.verify_sources.empty()) throw ConfigError("verify.sources", "must not be empty");
  }

  const Block study(top.child("order_study"), "order_study", {"levels"});
  c.order_levels = study.list<double>("levels", c.order_levels);
  if (c.order_levels.size() < 2) throw ConfigError("order_study.levels", "needs at least two levels");
  for (double s : c.order_levels) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("order_study.levels", "levels must lie in (0, 1]");
  }

  const Block mc(top.child("mcmc"), "mcmc", {"chains", "max_samples", "burn_in", "seed", "proposal_scale", "adapt"});
  c.mcmc.chains = mc.get("chains", c.mcmc.chains);
  c.mcmc.max_samples = mc.get<std::int64_t>("max_samples", c.mcmc.max_samples);
  c.mcmc.burn_in = mc.get("burn_in", c.mcmc.burn_in);
  c.mcmc.seed = mc.get<std::uint64_t>("seed", c.mcmc.seed);
  c.mcmc.proposal_scale = mc.get("proposal_scale", c.mcmc.proposal_scale);
  c.mcmc.adapt = mc.get("adapt", c.mcmc.adapt);
  if (c.mcmc.chains < 1 || c.mcmc.chains > 64) throw ConfigError("mcmc.chains", "must lie in [1, 64]");
  if (c.mcmc.max_samples < 1) throw ConfigError("mcmc.max_samples", "must be at least 1");
  if (!(c.mcmc.burn_in >= 0.0 && c.mcmc.burn_in < 1.0)) throw ConfigError("mcmc.burn_in", "must lie in [0, 1)");
  nonnegative(c.mcmc.proposal_scale, "mcmc.proposal_scale");
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["application"] = to_string(c.application);
  j["output_dir"] = c.output_dir.string();
  j["mesh"] = {{"nx", c.nx}, {"ny", c.ny}};
  if (c.application == Application::kElliptic) {
    j["elliptic"] = {{"kappa0", c.elliptic_coarse.kappa0},
                     {"nonlinearity", elliptic::to_string(c.nonlinearity)},
                     {"test", {{"kappa", c.elliptic_fine.kappa}, {"alpha", c.elliptic_fine.alpha}}}};
  } else {
    j["tumor"] = {{"coarse",
                   {{"lambda_p0", c.tumor_coarse.lambda_p0},
                    {"lambda_d0", c.tumor_coarse.lambda_d0},
                    {"D", c.tumor_coarse.D}}},
                  {"test",
                   {{"lambda_p", c.tumor_fine.lambda_p},
                    {"lambda_d", c.tumor_fine.lambda_d},
                    {"epsilon", c.tumor_fine.epsilon},
                    {"C", c.tumor_fine.C}}},
                  {"trajectory_levels", c.trajectory_levels}};
    j["time"] = {{"dt", c.time.dt}, {"t_final", c.time.t_final()}, {"n_steps", c.time.n_steps}};
    j["qoi"] = {{"observation_times", c.qoi.observation_times},
                {"window", c.qoi.window},
                {"window_rule", tumor::to_string(c.qoi.rule)},
                {"include_final", c.qoi.include_final}};
  }
  j["prior"] = {{"ln_mean", to_std(c.prior.ln_mean)}, {"ln_std", to_std(c.prior.ln_std)}};
  j["noise"] = {{"sigma", c.noise.sigma}};
  j["estimator"] = goal::to_string(c.estimator);
  auto sources = nlohmann::json::array();
  for (auto s : c.verify_sources) sources.push_back(goal::to_string(s));
  j["verify"] = {{"sources", sources}};
  j["order_study"] = {{"levels", c.order_levels}};
  j["mcmc"] = {{"chains", c.mcmc.chains},
               {"max_samples", c.mcmc.max_samples},
               {"burn_in", c.mcmc.burn_in},
               {"seed", c.mcmc.seed},
               {"proposal_scale", c.mcmc.proposal_scale},
               {"adapt", c.mcmc.adapt}};
  return j;
}

}  // namespace goalcal::io
