// SPDX-License-Identifier: Apache-2.0
#include "goalcal/fem/linear_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/KLUSupport>

#include <cmath>
#include <limits>
#include <sstream>

namespace goalcal::fem {

struct LinearSolver::Impl {
  SparseMatrix matrix;
  std::vector<int> outer;
  std::vector<int> inner;
  Eigen::KLU<SparseMatrix> lu;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
  bool analyzed = false;
  bool ready = false;

  bool same_pattern(const SparseMatrix& a) const {
    if (!analyzed || a.rows() != matrix.rows() || a.nonZeros() != static_cast<Eigen::Index>(inner.size())) {
      return false;
    }
    return std::equal(outer.begin(), outer.end(), a.outerIndexPtr()) &&
           std::equal(inner.begin(), inner.end(), a.innerIndexPtr());
  }
};

LinearSolver::LinearSolver(LinearSolverOptions options)
    : options_(options), impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

void LinearSolver::factorize(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("linear solver needs a square matrix");
  auto& s = *impl_;
  s.matrix = a;
  s.matrix.makeCompressed();
  s.ready = false;
  if (options_.kind == LinearSolverKind::kDirect) {
    if (!s.same_pattern(s.matrix)) {
      s.lu.analyzePattern(s.matrix);
      s.outer.assign(s.matrix.outerIndexPtr(), s.matrix.outerIndexPtr() + s.matrix.outerSize() + 1);
      s.inner.assign(s.matrix.innerIndexPtr(), s.matrix.innerIndexPtr() + s.matrix.nonZeros());
      s.analyzed = true;
    }
    s.lu.factorize(s.matrix);
    if (s.lu.info() != Eigen::Success) {
      throw SolverError("sparse LU factorization failed (singular or ill-conditioned matrix)",
                        std::numeric_limits<double>::infinity());
    }
  } else {
    s.cg.setTolerance(0.5 * options_.rtol);
    s.cg.setMaxIterations(options_.max_iterations);
    s.cg.compute(s.matrix);
  }
  s.ready = true;
}

Vector LinearSolver::solve(const Vector& rhs) const {
  const auto& s = *impl_;
  if (!s.ready) throw std::logic_error("LinearSolver::solve called before factorize");
  if (rhs.size() != s.matrix.rows()) throw std::invalid_argument("right-hand side has wrong size");
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Vector::Zero(rhs.size());

  Vector x;
  if (options_.kind == LinearSolverKind::kDirect) {
    x = s.lu.solve(rhs);
    // One refinement sweep is cheap next to the factorization.
    Vector r = rhs - s.matrix * x;
    if (r.norm() > options_.rtol * bnorm) x += s.lu.solve(r);
  } else {
    x = s.cg.solve(rhs);
  }
  const double achieved = (rhs - s.matrix * x).norm() / bnorm;
  if (!x.allFinite() || !(achieved <= options_.rtol)) {
    std::ostringstream msg;
    msg << "linear solve did not reach rtol " << options_.rtol << " (relative residual "
        << achieved << ")";
    throw SolverError(msg.str(), achieved);
  }
  return x;
}

Vector LinearSolver::solve(const SparseSystem& system) {
  factorize(system.matrix);
  return solve(system.rhs);
}

Vector solve_linear(const SparseSystem& system, LinearSolverOptions options) {
  LinearSolver solver(options);
  return solver.solve(system);
}

}  // namespace goalcal::fem
