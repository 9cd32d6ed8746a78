// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/assembly.hpp"
#include "goalcal/fem/linear_solver.hpp"
#include "goalcal/fem/mesh.hpp"
#include "goalcal/fem/newton.hpp"
#include "goalcal/goal/model_pair.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace goalcal::tumor {

struct TumorFineParams {
  double lambda_p = 0.5;   // proliferation rate
  double lambda_d = 0.1;   // death rate
  double epsilon = 0.01;   // interfacial width coefficient
  double C = 1.0;          // double-well energy constant
};

struct TumorCoarseParams {
  double lambda_p0 = 0.2;
  double lambda_d0 = 0.1;
  double D = 0.05;
};

struct TimeGrid {
  double dt = 0.005;
  int n_steps = 200;

  static TimeGrid uniform(double dt, double t_final);
  double t_final() const { return dt * n_steps; }
  double time(int n) const { return dt * n; }
};

/// How an observation window [tau, tau + width] is sampled on the time grid.
enum class WindowRule {
  kInteriorNodes,  // time levels strictly inside the window, each weighted dt / width
  kStepEnd,        // every step ending inside the window: (tau, tau + width]
};

WindowRule parse_window_rule(const std::string& name);
std::string to_string(WindowRule rule);

/// Final-time volume average plus windowed time averages of the volume average.
struct QoISpec {
  std::vector<double> observation_times{0.2, 0.4, 0.6, 0.8};
  double window = 0.05;
  WindowRule rule = WindowRule::kInteriorNodes;
  bool include_final = true;

  std::size_t num_observations() const { return observation_times.size(); }
  /// Weight of each time level 0..N; throws if a window is not aligned with
  /// the grid or falls outside [0, t_F].
  std::vector<double> time_weights(const TimeGrid& grid) const;
};

/// Stacked nodal values for time levels 0..N.
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const fem::StructuredMesh> mesh, TimeGrid grid, Vector data);

  const fem::StructuredMesh& mesh() const { return *mesh_; }
  const TimeGrid& grid() const { return grid_; }
  const Vector& data() const { return data_; }
  Vector& data() { return data_; }
  std::size_t nodes() const { return mesh_->num_nodes(); }
  int n_steps() const { return grid_.n_steps; }

  auto step(int n) const { return data_.segment(static_cast<Eigen::Index>(n) * nodes_i(), nodes_i()); }
  auto step(int n) { return data_.segment(static_cast<Eigen::Index>(n) * nodes_i(), nodes_i()); }

 private:
  Eigen::Index nodes_i() const { return static_cast<Eigen::Index>(mesh_->num_nodes()); }
  std::shared_ptr<const fem::StructuredMesh> mesh_;
  TimeGrid grid_;
  Vector data_;
};

/// exp(-1.5 x); time independent.
double nutrient(double t, const Point& x);
/// Indicator of the disc |x - (0.5, 0.5)| < 0.2821.
double initial_tumor(const Point& x);
Vector initial_condition(const fem::StructuredMesh& mesh);

/// Mesh, time grid and QoI data shared by every parameter value.
class TumorDiscretization {
 public:
  static std::shared_ptr<const TumorDiscretization> create(int nx, int ny, TimeGrid grid,
                                                           QoISpec spec = {});

  const fem::StructuredMesh& mesh() const { return assembler_.mesh(); }
  const std::shared_ptr<const fem::StructuredMesh>& mesh_ptr() const { return assembler_.mesh_ptr(); }
  const fem::Assembler& assembler() const { return assembler_; }
  const TimeGrid& grid() const { return grid_; }
  const QoISpec& qoi_spec() const { return spec_; }
  const std::vector<double>& time_weights() const { return weights_; }

  std::size_t nodes() const { return mesh().num_nodes(); }
  std::size_t dimension() const { return nodes() * (grid_.n_steps + 1); }

  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  /// Mass matrix weighted by the nutrient f.
  const SparseMatrix& nutrient_mass() const { return nutrient_mass_; }
  /// (1/|Omega|, phi_i): dual vector of the volume average.
  const Vector& average_dual() const { return average_dual_; }
  const Vector& initial_state() const { return initial_; }
  /// Nutrient at quadrature point q of element e.
  double nutrient_at(std::size_t e, int q) const { return nutrient_q_[e * 4 + static_cast<std::size_t>(q)]; }

  /// Pointwise weight w(u_q, s_q, f_q) of two nodal fields and the nutrient.
  using Weight = std::function<double(double, double, double)>;
  /// (w phi_j, phi_i)
  SparseMatrix weighted_mass(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& s,
                             const Weight& weight) const;
  /// (w, phi_i)
  Vector weighted_load(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& s,
                       const Weight& weight) const;

 private:
  TumorDiscretization(std::shared_ptr<const fem::StructuredMesh> mesh, TimeGrid grid, QoISpec spec);
  fem::Assembler assembler_;
  TimeGrid grid_;
  QoISpec spec_;
  std::vector<double> weights_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  SparseMatrix nutrient_mass_;
  Vector average_dual_;
  Vector initial_;
  std::vector<double> nutrient_q_;
};

/// Linear combination of matrices sharing the assembler's sparsity pattern.
SparseMatrix combine(const SparseMatrix& pattern,
                     std::initializer_list<std::pair<double, const SparseMatrix*>> terms);

/// Allen-Cahn fine model against the linear reaction-diffusion coarse model,
/// both in backward-Euler space-time form with homogeneous Neumann data:
///
///   B(u; q)  = (u^0, q^0) + sum_n (u^n - u^{n-1}, q^n)
///              + dt [ eps (grad u^n, grad q^n) + (g(u^n), q^n) ],
///   g(u)     = Psi'(u) - lambda_p u (1 - u) f + lambda_d u,
///   B0(u; q) = same with D, and g0(u) = (lambda_d0 - lambda_p0 f) u,
///   F(q)     = (u_bar, q^0).
///
/// With blend s < 1 the fine form uses s g + (1 - s) g0 and diffusion
/// s eps + (1 - s) D, so s = 0 reproduces the coarse model.
class TumorModelPair final : public goal::ModelPair {
 public:
  TumorModelPair(std::shared_ptr<const TumorDiscretization> disc, TumorCoarseParams coarse,
                 TumorFineParams fine, double blend = 1.0);

  const TumorDiscretization& discretization() const { return *disc_; }
  const TumorFineParams& fine_params() const { return fine_; }
  const TumorCoarseParams& coarse_params() const { return coarse_; }
  double blend() const { return blend_; }
  /// Diffusion coefficient of the (blended) fine model.
  double diffusion() const;

  std::size_t dimension() const override { return disc_->dimension(); }
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
  Vector solve_fine_adjoint(const Vector& u) const override;
  Vector solve_tangent(const Vector& u, const Vector* shift, const Vector& rhs) const override;
  Vector solve_tangent_adjoint(const Vector& u, const Vector* shift, const Vector& rhs) const override;

  bool fine_is_linear() const override { return blend_ == 0.0; }
  std::string name() const override { return "tumor"; }

  // Pointwise reaction terms.
  double reaction(double u, double f) const;             // g(u)
  double reaction_derivative(double u, double f) const;  // g'(u)
  double reaction_second(double u, double f) const;      // g''(u)

  /// Used by every per-step Newton solve of the fine march.
  fem::NewtonOptions newton_options;

 private:
  SparseMatrix step_matrix(const Eigen::Ref<const Vector>& u, const Vector* shift, int n) const;
  SparseMatrix coarse_step_matrix() const;

  std::shared_ptr<const TumorDiscretization> disc_;
  TumorCoarseParams coarse_;
  TumorFineParams fine_;
  double blend_;
};

Trajectory march_coarse_forward(std::shared_ptr<const TumorDiscretization> disc,
                                const TumorCoarseParams& params);
Trajectory march_fine_forward(std::shared_ptr<const TumorDiscretization> disc,
                              const TumorFineParams& params);
double evaluate_qoi(const Trajectory& traj, const QoISpec& spec);
/// Throws NumericError if any nodal value leaves [lower, upper].
void check_bounded(const Trajectory& traj, double lower, double upper);

/// Caches the parameter-independent pieces of the linearized error problem
/// B'(u0; e, q) = R(u0; q) around a fixed coarse trajectory. The fine
/// parameters enter g and g' linearly, so each new parameter vector costs
/// one sparse combination and one CG solve per step.
class LinearizedErrorSolver {
 public:
  LinearizedErrorSolver(std::shared_ptr<const TumorDiscretization> disc, Vector coarse_trajectory);

  const Vector& coarse_trajectory() const { return u0_; }
  /// First-order error estimate e_hat (stacked trajectory, e_hat^0 = 0).
  Vector solve(const TumorFineParams& params) const;
  /// Q(e_hat) without storing the full trajectory.
  double qoi_error(const TumorFineParams& params) const;

 private:
  template <typename Visitor>
  void march(const TumorFineParams& params, Visitor&& visit) const;

  std::shared_ptr<const TumorDiscretization> disc_;
  Vector u0_;
  // Per step n = 1..N (index n - 1).
  std::vector<SparseMatrix> psi_mass_;        // (Psi''(u0)/C phi_j, phi_i)
  std::vector<SparseMatrix> growth_mass_;     // (-(1 - 2 u0) f phi_j, phi_i)
  std::vector<Vector> increment_;             // M (u0^n - u0^{n-1})
  std::vector<Vector> diffusion_;             // K u0^n
  std::vector<Vector> psi_load_;              // (Psi'(u0)/C, phi_i)
  std::vector<Vector> growth_load_;           // (-u0 (1 - u0) f, phi_i)
  std::vector<Vector> death_load_;            // M u0^n
};

/// One CSV per requested level plus manifest.json with dt, n_steps and the QoI spec.
void write_trajectory(const Trajectory& traj, const QoISpec& spec, const std::vector<int>& levels,
                      const std::filesystem::path& dir, const std::string& stem);

}  // namespace goalcal::tumor
