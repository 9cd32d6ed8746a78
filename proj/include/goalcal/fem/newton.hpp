// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/linear_solver.hpp"

#include <functional>
#include <vector>

namespace goalcal::fem {

struct NewtonOptions {
  double absolute_tolerance = 1e-10;
  double relative_tolerance = 1e-12;
  int max_iterations = 25;
  // Consecutive residual increases that count as divergence.
  int divergence_window = 5;
};

struct NewtonResult {
  Vector solution;
  int iterations = 0;
  std::vector<double> residual_history;
};

using ResidualFunction = std::function<Vector(const Vector&)>;
using JacobianFunction = std::function<SparseMatrix(const Vector&)>;

/// Full Newton iteration J(u) du = -R(u). Stops when |R| <= atol or
/// |R| <= rtol |R(u0)|; throws NonconvergenceError otherwise.
NewtonResult newton_solve(const ResidualFunction& residual, const JacobianFunction& jacobian,
                          Vector initial_guess, LinearSolver& solver,
                          const NewtonOptions& options = {});

}  // namespace goalcal::fem
