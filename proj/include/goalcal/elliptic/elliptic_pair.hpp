// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/assembly.hpp"
#include "goalcal/fem/mesh.hpp"
#include "goalcal/fem/newton.hpp"
#include "goalcal/goal/model_pair.hpp"

#include <functional>
#include <memory>
#include <string>

namespace goalcal::elliptic {

/// 10 cos^2(4 pi x) cos^2(4 pi y)
double forcing(const Point& x);

/// Shape of the solution-dependent diffusivity k(u).
enum class NonlinearityKind {
  kQuadratic,    // kappa (1 + alpha u^2)
  kLinear,       // kappa (1 + alpha u)
  kExponential,  // kappa exp(alpha u)
};

NonlinearityKind parse_nonlinearity(const std::string& name);
std::string to_string(NonlinearityKind kind);

struct EllipticFineParams {
  double kappa = 0.25;
  double alpha = 10.0;
};

struct EllipticCoarseParams {
  double kappa0 = 0.25;
};

struct Diffusivity {
  NonlinearityKind kind = NonlinearityKind::kQuadratic;
  double kappa = 0.25;
  double alpha = 0.0;

  double value(double u) const;
  double derivative(double u) const;
  double second_derivative(double u) const;
};

/// Mesh-dependent data shared by every parameter value: assembler, boundary
/// mask, load F(v) = (f, v) and the QoI weights. Immutable after creation.
class EllipticDiscretization {
 public:
  static std::shared_ptr<const EllipticDiscretization> create(
      int nx, int ny, std::function<double(const Point&)> source = forcing);

  const fem::StructuredMesh& mesh() const { return assembler_.mesh(); }
  const std::shared_ptr<const fem::StructuredMesh>& mesh_ptr() const { return assembler_.mesh_ptr(); }
  const fem::Assembler& assembler() const { return assembler_; }
  const std::vector<bool>& boundary() const { return mesh().boundary_mask(); }
  /// F(phi_i), zero on boundary nodes.
  const Vector& load() const { return load_; }
  /// Integral of phi_i over the domain, unmasked: Q(u) = weights . u.
  const Vector& qoi_weights() const { return qoi_weights_; }
  /// Same weights with boundary entries zeroed (the dual vector of Q).
  const Vector& qoi_dual() const { return qoi_dual_; }
  const SparseMatrix& stiffness() const { return stiffness_; }

  void mask(Vector& dual) const;

 private:
  explicit EllipticDiscretization(std::shared_ptr<const fem::StructuredMesh> mesh);
  fem::Assembler assembler_;
  Vector load_;
  Vector qoi_weights_;
  Vector qoi_dual_;
  SparseMatrix stiffness_;
};

/// Fine model  B(u; v) = int k(u) grad u . grad v  with k from Diffusivity,
/// coarse model  B0(u; v) = int kappa0 grad u . grad v, homogeneous
/// Dirichlet data, F(v) = int f v and Q(u) = int u.
class EllipticModelPair final : public goal::ModelPair {
 public:
  EllipticModelPair(std::shared_ptr<const EllipticDiscretization> disc,
                    EllipticCoarseParams coarse, EllipticFineParams fine,
                    NonlinearityKind kind = NonlinearityKind::kQuadratic);

  const EllipticDiscretization& discretization() const { return *disc_; }
  const EllipticFineParams& fine_params() const { return fine_; }
  const EllipticCoarseParams& coarse_params() const { return coarse_; }
  const Diffusivity& diffusivity() const { return k_; }

  std::size_t dimension() const override;
  Vector load() const override;
  Vector fine_form(const Vector& u) const override;
  Vector coarse_form(const Vector& u) const override;
  Vector fine_tangent(const Vector& u, const Vector& v) const override;
  Vector fine_tangent_transpose(const Vector& u, const Vector& p) const override;
  Vector fine_second(const Vector& u, const Vector& q, const Vector& v) const override;
  Vector fine_second_transpose(const Vector& u, const Vector& q, const Vector& p) const override;
  double qoi(const Vector& u) const override;
  Vector qoi_gradient(const Vector& u) const override;

  Vector solve_coarse_forward() const override;
  Vector solve_coarse_adjoint(const Vector& u0) const override;
  Vector solve_fine_forward() const override;
  /// Newton from an explicit initial guess (normally the coarse solution).
  fem::NewtonResult solve_fine_forward_from(const Vector& guess,
                                            const fem::NewtonOptions& options = {}) const;
  Vector solve_fine_adjoint(const Vector& u) const override;
  Vector solve_tangent(const Vector& u, const Vector* shift, const Vector& rhs) const override;
  Vector solve_tangent_adjoint(const Vector& u, const Vector* shift, const Vector& rhs) const override;

  /// Matrix J_ij = B'(u; phi_j, phi_i) (+ B''(u; s, phi_j, phi_i)), unconstrained.
  SparseMatrix tangent_matrix(const Vector& u, const Vector* shift = nullptr) const;

  bool fine_is_linear() const override { return fine_.alpha == 0.0; }
  std::string name() const override { return "elliptic"; }

 private:
  std::shared_ptr<const EllipticDiscretization> disc_;
  EllipticCoarseParams coarse_;
  EllipticFineParams fine_;
  Diffusivity k_;
};

/// First-order error problem B'(u0; e, v) = R(u0; v) around a fixed coarse
/// solution, for diffusivities affine in alpha (quadratic and linear). Then
/// the tangent is kappa (K + alpha A(u0)) and the form kappa (K u0 + alpha n(u0)),
/// so a new parameter pair costs one matrix combination and one LU solve.
class LinearizedErrorSolver {
 public:
  LinearizedErrorSolver(std::shared_ptr<const EllipticDiscretization> disc, Vector coarse_solution,
                        NonlinearityKind kind);

  static bool supports(NonlinearityKind kind);

  const Vector& coarse_solution() const { return u0_; }
  Vector solve(const EllipticFineParams& params) const;
  /// Q(e_hat)
  double qoi_error(const EllipticFineParams& params) const;

 private:
  std::shared_ptr<const EllipticDiscretization> disc_;
  Vector u0_;
  SparseMatrix stiffness_;  // boundary rows and columns replaced by identity
  SparseMatrix nonlinear_;  // boundary rows and columns zeroed
  Vector diffusion_;        // K u0, masked
  Vector nonlinear_form_;   // n(u0), masked
};

}  // namespace goalcal::elliptic
