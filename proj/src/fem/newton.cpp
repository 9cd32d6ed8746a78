// SPDX-License-Identifier: Apache-2.0
#include "goalcal/fem/newton.hpp"

#include <cmath>
#include <sstream>

namespace goalcal::fem {

NewtonResult newton_solve(const ResidualFunction& residual, const JacobianFunction& jacobian,
                          Vector initial_guess, LinearSolver& solver,
                          const NewtonOptions& options) {
  NewtonResult result;
  result.solution = std::move(initial_guess);
  Vector r = residual(result.solution);
  double norm = r.norm();
  const double initial = norm;
  result.residual_history.push_back(norm);
  int increases = 0;

  while (true) {
    if (!std::isfinite(norm)) {
      throw NonconvergenceError("Newton residual became non-finite", result.residual_history);
    }
    if (norm <= options.absolute_tolerance || norm <= options.relative_tolerance * initial) {
      return result;
    }
    if (result.iterations >= options.max_iterations) {
      std::ostringstream msg;
      msg << "Newton reached " << options.max_iterations << " iterations (residual " << norm << ")";
      throw NonconvergenceError(msg.str(), result.residual_history);
    }
    solver.factorize(jacobian(result.solution));
    result.solution -= solver.solve(r);
    ++result.iterations;

    const double previous = norm;
    r = residual(result.solution);
    norm = r.norm();
    result.residual_history.push_back(norm);
    increases = norm > previous ? increases + 1 : 0;
    if (increases >= options.divergence_window) {
      throw NonconvergenceError("Newton iteration diverged", result.residual_history);
    }
  }
}

}  // namespace goalcal::fem
