// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/assembly.hpp"
#include "goalcal/fem/types.hpp"

#include <memory>
#include <vector>

namespace goalcal::fem {

enum class LinearSolverKind {
  kDirect,             // sparse LU, any nonsingular matrix
  kConjugateGradient,  // Jacobi-preconditioned CG, symmetric positive definite only
};

struct LinearSolverOptions {
  LinearSolverKind kind = LinearSolverKind::kDirect;
  double rtol = 1e-12;
  int max_iterations = 5000;
};

/// Sparse solver whose symbolic analysis is reused while the sparsity
/// pattern stays the same. Not thread-safe; give each thread its own.
class LinearSolver {
 public:
  explicit LinearSolver(LinearSolverOptions options = {});
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  const LinearSolverOptions& options() const { return options_; }

  void factorize(const SparseMatrix& a);
  /// Solves with the last factorized matrix. Throws SolverError if the
  /// residual exceeds rtol * |rhs|.
  Vector solve(const Vector& rhs) const;
  Vector solve(const SparseSystem& system);

 private:
  struct Impl;
  LinearSolverOptions options_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot direct solve of an assembled system.
Vector solve_linear(const SparseSystem& system, LinearSolverOptions options = {});

}  // namespace goalcal::fem
