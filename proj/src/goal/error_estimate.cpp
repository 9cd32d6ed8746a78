// SPDX-License-Identifier: Apache-2.0
#include "goalcal/goal/error_estimate.hpp"

#include <cmath>
#include <stdexcept>

namespace goalcal::goal {

Vector ModelPair::qoi_hessian(const Vector& u, const Vector&) const {
  return Vector::Zero(u.size());
}

Vector residual_vector(const ModelPair& pair, const Vector& u0) {
  return pair.load() - pair.fine_form(u0);
}

double residual(const ModelPair& pair, const Vector& u0, const Vector& q) {
  return residual_vector(pair, u0).dot(q);
}

Vector adjoint_residual_vector(const ModelPair& pair, const Vector& u0, const Vector& p0) {
  return pair.qoi_gradient(u0) - pair.fine_tangent_transpose(u0, p0);
}

double adjoint_residual(const ModelPair& pair, const Vector& u0, const Vector& v, const Vector& p0) {
  return adjoint_residual_vector(pair, u0, p0).dot(v);
}

Vector solve_primal_error(const ModelPair& pair, const Vector& u0) {
  return pair.solve_tangent(u0, nullptr, residual_vector(pair, u0));
}

ErrorFields solve_errors_first_order(const ModelPair& pair, const Vector& u0, const Vector& p0) {
  ErrorFields out;
  out.primal = solve_primal_error(pair, u0);
  out.adjoint = pair.solve_tangent_adjoint(u0, nullptr, adjoint_residual_vector(pair, u0, p0));
  return out;
}

Vector solve_primal_error_second_order(const ModelPair& pair, const Vector& u0,
                                       const QuadraticErrorOptions& options, int* iterations) {
  const Vector r = residual_vector(pair, u0);
  Vector e = pair.solve_tangent(u0, nullptr, r);
  int steps = 0;
  if (!pair.fine_is_linear()) {
    // d/de [B'(u0; e, .) + 1/2 B''(u0; e, e, .)] = B'(u0; ., .) + B''(u0; e, ., .)
    const double tol = options.absolute_tolerance + options.relative_tolerance * r.norm();
    std::vector<double> history;
    for (;;) {
      const Vector g = pair.fine_tangent(u0, e) + 0.5 * pair.fine_second(u0, e, e) - r;
      history.push_back(g.norm());
      if (!std::isfinite(history.back())) {
        throw NonconvergenceError("quadratic error problem produced non-finite residual", history);
      }
      if (history.back() <= tol) break;
      if (steps >= options.max_iterations) {
        throw NonconvergenceError("quadratic error problem did not converge", history);
      }
      e -= pair.solve_tangent(u0, &e, g);
      ++steps;
    }
  }
  if (iterations != nullptr) *iterations = steps;
  return e;
}

ErrorFields solve_errors_second_order(const ModelPair& pair, const Vector& u0, const Vector& p0,
                                      const QuadraticErrorOptions& options) {
  ErrorFields out;
  out.primal = solve_primal_error_second_order(pair, u0, options, &out.iterations);
  const Vector rhs = adjoint_residual_vector(pair, u0, p0) -
                     pair.fine_second_transpose(u0, out.primal, p0) +
                     pair.qoi_hessian(u0, out.primal);
  out.adjoint = pair.solve_tangent_adjoint(u0, &out.primal, rhs);
  return out;
}

double estimate_xi1(const ModelPair& pair, const Vector& u0, const Vector& p) {
  return residual(pair, u0, p);
}

double estimate_xi2(const ModelPair& pair, const Vector& u0, const Vector& p0, const Vector& e,
                    const Vector& eps) {
  const Vector p = p0 + eps;
  return residual(pair, u0, p) +
         0.5 * (pair.fine_second(u0, e, e).dot(p0 + 0.5 * eps) - pair.qoi_hessian(u0, e).dot(e));
}

double estimate_q_ehat(const ModelPair& pair, const Vector& u0, const Vector& e) {
  return pair.qoi_gradient(u0).dot(e);
}

std::string to_string(ErrorSource source) {
  switch (source) {
    case ErrorSource::kExact: return "exact";
    case ErrorSource::kFirstOrder: return "first-order";
    case ErrorSource::kSecondOrder: return "second-order";
  }
  return "unknown";
}

ErrorSource parse_error_source(const std::string& name) {
  if (name == "exact" || name == "exact-fine-oracle") return ErrorSource::kExact;
  if (name == "first-order") return ErrorSource::kFirstOrder;
  if (name == "second-order") return ErrorSource::kSecondOrder;
  throw std::invalid_argument("unknown error source '" + name + "'");
}

const EstimateSet* ErrorEstimateReport::find(ErrorSource source) const {
  for (const auto& s : estimates) {
    if (s.source == source) return &s;
  }
  return nullptr;
}

void to_json(nlohmann::json& j, const EstimateSet& s) {
  j = {{"source", to_string(s.source)},
       {"xi1", s.xi1},
       {"xi2", s.xi2},
       {"q_ehat", s.q_ehat},
       {"newton_iterations", s.newton_iterations}};
}

void from_json(const nlohmann::json& j, EstimateSet& s) {
  s.source = parse_error_source(j.at("source").get<std::string>());
  s.xi1 = j.at("xi1").get<double>();
  s.xi2 = j.at("xi2").get<double>();
  s.q_ehat = j.at("q_ehat").get<double>();
  s.newton_iterations = j.value("newton_iterations", 0);
}

void to_json(nlohmann::json& j, const ErrorEstimateReport& r) {
  j = {{"application", r.application}, {"q_coarse", r.q_coarse}};
  j["q_fine"] = r.q_fine ? nlohmann::json(*r.q_fine) : nlohmann::json(nullptr);
  j["exact_error"] = r.exact_error ? nlohmann::json(*r.exact_error) : nlohmann::json(nullptr);
  j["estimates"] = r.estimates;
  j["formulas"] = {{"xi1", "R(u0; p)"},
                   {"xi2", "R(u0; p0 + eps) + (B''(u0; e, e, p0 + eps/2) - Q''(u0; e, e)) / 2"},
                   {"q_ehat", "Q'(u0; e)"}};
}

void from_json(const nlohmann::json& j, ErrorEstimateReport& r) {
  r.application = j.at("application").get<std::string>();
  r.q_coarse = j.at("q_coarse").get<double>();
  r.q_fine.reset();
  r.exact_error.reset();
  if (j.contains("q_fine") && !j["q_fine"].is_null()) r.q_fine = j["q_fine"].get<double>();
  if (j.contains("exact_error") && !j["exact_error"].is_null()) {
    r.exact_error = j["exact_error"].get<double>();
  }
  r.estimates = j.at("estimates").get<std::vector<EstimateSet>>();
}

ErrorEstimateReport compare_estimates(const ModelPair& pair, const std::vector<ErrorSource>& sources) {
  ErrorEstimateReport report;
  report.application = pair.name();
  const Vector u0 = pair.solve_coarse_forward();
  const Vector p0 = pair.solve_coarse_adjoint(u0);
  report.q_coarse = pair.qoi(u0);
  for (ErrorSource source : sources) {
    EstimateSet set;
    set.source = source;
    ErrorFields fields;
    Vector p;
    if (source == ErrorSource::kExact) {
      const Vector u = pair.solve_fine_forward();
      p = pair.solve_fine_adjoint(u);
      report.q_fine = pair.qoi(u);
      report.exact_error = *report.q_fine - report.q_coarse;
      fields.primal = u - u0;
      fields.adjoint = p - p0;
    } else if (source == ErrorSource::kFirstOrder) {
      fields = solve_errors_first_order(pair, u0, p0);
      p = p0 + fields.adjoint;
    } else {
      fields = solve_errors_second_order(pair, u0, p0);
      p = p0 + fields.adjoint;
    }
    set.xi1 = estimate_xi1(pair, u0, p);
    set.xi2 = estimate_xi2(pair, u0, p0, fields.primal, fields.adjoint);
    set.q_ehat = estimate_q_ehat(pair, u0, fields.primal);
    set.newton_iterations = fields.iterations;
    report.estimates.push_back(set);
  }
  return report;
}

double OrderStudyRow::deficit_xi1() const { return std::abs(exact_error - xi1); }
double OrderStudyRow::deficit_first() const { return std::abs(exact_error - q_ehat_first); }
double OrderStudyRow::deficit_second() const { return std::abs(exact_error - q_ehat_second); }

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("loglog_slope: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

namespace {

// Deficits at round-off level carry no order information.
constexpr double kDeficitFloor = 1e-13;

std::optional<double> fit(const OrderStudy& s, double (OrderStudyRow::*deficit)() const) {
  std::vector<double> x, y;
  for (const auto& row : s.rows) {
    const double d = (row.*deficit)();
    x.push_back(std::abs(row.exact_error));
    y.push_back(d > kDeficitFloor ? d : 0.0);
  }
  return loglog_slope(x, y);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void to_json(nlohmann::json& j, const OrderStudy& s) {
  auto rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"level", r.level},
                    {"exact_error", r.exact_error},
                    {"xi1", r.xi1},
                    {"q_ehat_first", r.q_ehat_first},
                    {"q_ehat_second", r.q_ehat_second},
                    {"deficit_xi1", r.deficit_xi1()},
                    {"deficit_first", r.deficit_first()},
                    {"deficit_second", r.deficit_second()}});
  }
  j = {{"rows", rows},
       {"slope_xi1", optional_json(s.slope_xi1)},
       {"slope_first", optional_json(s.slope_first)},
       {"slope_second", optional_json(s.slope_second)}};
}

OrderStudy order_study(const Homotopy& family, const std::vector<double>& levels, OrderStudy* partial) {
  OrderStudy study;
  for (double s : levels) {
    try {
      const auto pair = family(s);
      const Vector u0 = pair->solve_coarse_forward();
      const Vector u = pair->solve_fine_forward();
      const Vector p = pair->solve_fine_adjoint(u);
      OrderStudyRow row;
      row.level = s;
      row.exact_error = pair->qoi(u) - pair->qoi(u0);
      row.xi1 = estimate_xi1(*pair, u0, p);
      row.q_ehat_first = estimate_q_ehat(*pair, u0, solve_primal_error(*pair, u0));
      row.q_ehat_second = estimate_q_ehat(*pair, u0, solve_primal_error_second_order(*pair, u0));
      study.rows.push_back(row);
    } catch (...) {
      if (partial != nullptr) *partial = study;
      throw;
    }
  }
  study.slope_xi1 = fit(study, &OrderStudyRow::deficit_xi1);
  study.slope_first = fit(study, &OrderStudyRow::deficit_first);
  study.slope_second = fit(study, &OrderStudyRow::deficit_second);
  if (partial != nullptr) *partial = study;
  return study;
}

}  // namespace goalcal::goal
