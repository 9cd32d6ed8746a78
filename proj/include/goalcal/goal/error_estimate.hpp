// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/goal/model_pair.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace goalcal::goal {

/// R(u0; .) = F(.) - B(u0; .) as a dual vector.
Vector residual_vector(const ModelPair& pair, const Vector& u0);
/// R(u0; q)
double residual(const ModelPair& pair, const Vector& u0, const Vector& q);
/// Rbar(u0; ., p0) = Q'(u0; .) - B'(u0; ., p0) as a dual vector.
Vector adjoint_residual_vector(const ModelPair& pair, const Vector& u0, const Vector& p0);
double adjoint_residual(const ModelPair& pair, const Vector& u0, const Vector& v, const Vector& p0);

/// Primal and adjoint error fields, exact or approximate.
struct ErrorFields {
  Vector primal;   // e = u - u0
  Vector adjoint;  // eps = p - p0
  int iterations = 0;  // Newton steps of the quadratic problem, 0 if linear
};

/// Linearized error problems around (u0, p0): two decoupled linear solves.
ErrorFields solve_errors_first_order(const ModelPair& pair, const Vector& u0, const Vector& p0);
/// Only the primal half of the first-order problem; what calibration needs.
Vector solve_primal_error(const ModelPair& pair, const Vector& u0);

struct QuadraticErrorOptions {
  double absolute_tolerance = 1e-12;
  double relative_tolerance = 1e-10;
  int max_iterations = 25;
};

/// Primal half of the quadratic problem below.
Vector solve_primal_error_second_order(const ModelPair& pair, const Vector& u0,
                                       const QuadraticErrorOptions& options = {}, int* iterations = nullptr);

/// Quadratic error problems: Newton on B'(u0; e, .) + 1/2 B''(u0; e, e, .) = R
/// from the first-order e, then the adjoint error with e-dependent coefficients.
ErrorFields solve_errors_second_order(const ModelPair& pair, const Vector& u0, const Vector& p0,
                                      const QuadraticErrorOptions& options = {});

/// R(u0; p)
double estimate_xi1(const ModelPair& pair, const Vector& u0, const Vector& p);
/// R(u0; p0 + eps) + [B''(u0; e, e, p0 + eps / 2) - Q''(u0; e, e)] / 2
double estimate_xi2(const ModelPair& pair, const Vector& u0, const Vector& p0, const Vector& e,
                    const Vector& eps);
/// Q'(u0; e)
double estimate_q_ehat(const ModelPair& pair, const Vector& u0, const Vector& e);

enum class ErrorSource { kExact, kFirstOrder, kSecondOrder };
std::string to_string(ErrorSource source);
ErrorSource parse_error_source(const std::string& name);

struct EstimateSet {
  ErrorSource source = ErrorSource::kFirstOrder;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double q_ehat = 0.0;
  int newton_iterations = 0;
};

struct ErrorEstimateReport {
  std::string application;
  double q_coarse = 0.0;
  std::optional<double> q_fine;
  std::optional<double> exact_error;
  std::vector<EstimateSet> estimates;

  const EstimateSet* find(ErrorSource source) const;
};

void to_json(nlohmann::json& j, const EstimateSet& s);
void from_json(const nlohmann::json& j, EstimateSet& s);
void to_json(nlohmann::json& j, const ErrorEstimateReport& r);
void from_json(const nlohmann::json& j, ErrorEstimateReport& r);

/// Coarse forward/adjoint solves followed by every requested estimate. The
/// exact source also runs the fine forward and adjoint solves.
ErrorEstimateReport compare_estimates(const ModelPair& pair, const std::vector<ErrorSource>& sources);

struct OrderStudyRow {
  double level = 0.0;
  double exact_error = 0.0;
  double xi1 = 0.0;            // with the exact fine adjoint
  double q_ehat_first = 0.0;
  double q_ehat_second = 0.0;
  double deficit_xi1() const;
  double deficit_first() const;
  double deficit_second() const;
};

struct OrderStudy {
  std::vector<OrderStudyRow> rows;
  // Least-squares slopes of log deficit against log |exact error|; empty
  // when fewer than two levels carry a nonzero deficit.
  std::optional<double> slope_xi1;
  std::optional<double> slope_first;
  std::optional<double> slope_second;
};

void to_json(nlohmann::json& j, const OrderStudy& s);

/// Pair at homotopy level s; level 0 should make the models coincide.
using Homotopy = std::function<std::unique_ptr<ModelPair>(double)>;

/// Throws on the first failing level; rows computed so far are kept in
/// `partial` when provided.
OrderStudy order_study(const Homotopy& family, const std::vector<double>& levels,
                       OrderStudy* partial = nullptr);

/// Slope of the least-squares line through (log x, log y), skipping pairs
/// where either value is not positive.
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace goalcal::goal
