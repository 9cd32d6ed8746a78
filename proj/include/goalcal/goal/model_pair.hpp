// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/types.hpp"

#include <optional>
#include <string>

namespace goalcal::goal {

/// A coarse/fine pair of discrete semilinear forms sharing one load F and
/// one quantity of interest Q.
///
/// States (u, v, p, ...) are flat coefficient vectors; for time-dependent
/// pairs they stack every time level. Forms that are linear in their last
/// argument are returned as dual vectors: entry i is the form evaluated at
/// the i-th test basis function, so B(u; q) = fine_form(u).dot(q). Entries
/// belonging to constrained (essential boundary) degrees of freedom are zero.
class ModelPair {
 public:
  virtual ~ModelPair() = default;

  virtual std::size_t dimension() const = 0;

  /// F(.)
  virtual Vector load() const = 0;
  /// B(u; .)
  virtual Vector fine_form(const Vector& u) const = 0;
  /// B0(u; .)
  virtual Vector coarse_form(const Vector& u) const = 0;
  /// B'(u; v, .)
  virtual Vector fine_tangent(const Vector& u, const Vector& v) const = 0;
  /// B'(u; ., p)
  virtual Vector fine_tangent_transpose(const Vector& u, const Vector& p) const = 0;
  /// B''(u; q, v, .)
  virtual Vector fine_second(const Vector& u, const Vector& q, const Vector& v) const = 0;
  /// B''(u; q, ., p)
  virtual Vector fine_second_transpose(const Vector& u, const Vector& q, const Vector& p) const = 0;

  virtual double qoi(const Vector& u) const = 0;
  /// Q'(u; .)
  virtual Vector qoi_gradient(const Vector& u) const = 0;
  /// Q''(u; q, .). Zero for the linear functionals used here.
  virtual Vector qoi_hessian(const Vector& u, const Vector& q) const;

  virtual Vector solve_coarse_forward() const = 0;
  virtual Vector solve_coarse_adjoint(const Vector& u0) const = 0;
  virtual Vector solve_fine_forward() const = 0;
  virtual Vector solve_fine_adjoint(const Vector& u) const = 0;

  /// Finds v with B'(u; v, q) + B''(u; s, v, q) = rhs(q) for all admissible
  /// q, where s is the optional shift. rhs is a dual vector.
  virtual Vector solve_tangent(const Vector& u, const Vector* shift, const Vector& rhs) const = 0;
  /// Finds p with B'(u; v, p) + B''(u; s, v, p) = rhs(v) for all admissible v.
  virtual Vector solve_tangent_adjoint(const Vector& u, const Vector* shift,
                                       const Vector& rhs) const = 0;

  /// True when the fine form is linear in the state, so B'' vanishes.
  virtual bool fine_is_linear() const { return false; }
  virtual std::string name() const = 0;
};

}  // namespace goalcal::goal
