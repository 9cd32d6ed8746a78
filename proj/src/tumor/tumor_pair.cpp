// SPDX-License-Identifier: Apache-2.0
#include "goalcal/tumor/tumor_pair.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace goalcal::tumor {

using fem::ElementData;
using fem::LocalMatrix;
using fem::LocalVector;

namespace {

constexpr double kTumorRadius = 0.2821;
constexpr double kAlignTolerance = 1e-8;

int aligned_index(double t, double dt, const char* what) {
  const double r = t / dt;
  const double n = std::round(r);
  if (std::abs(r - n) > kAlignTolerance) {
    throw std::invalid_argument(std::string(what) + " is not a whole number of time steps");
  }
  return static_cast<int>(n);
}

fem::LinearSolver cg_solver() {
  return fem::LinearSolver({fem::LinearSolverKind::kConjugateGradient, 1e-12, 5000});
}

template <typename Fn>
auto at_step(int n, Fn&& fn) {
  try {
    return fn();
  } catch (const SolverError& e) {
    throw SolverError("time step " + std::to_string(n) + ": " + e.what(), e.achieved_residual());
  } catch (const NonconvergenceError& e) {
    throw NonconvergenceError("time step " + std::to_string(n) + ": " + e.what(),
                              e.residual_history());
  }
}

// Psi(u) = C u^2 (1 - u)^2, divided by C.
double psi1(double u) { return 2.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }
double psi2(double u) { return 2.0 - 12.0 * u + 12.0 * u * u; }
double psi3(double u) { return -12.0 + 24.0 * u; }

}  // namespace

TimeGrid TimeGrid::uniform(double dt, double t_final) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw std::invalid_argument("dt and t_final must be positive");
  return {dt, aligned_index(t_final, dt, "t_final")};
}

WindowRule parse_window_rule(const std::string& name) {
  if (name == "interior") return WindowRule::kInteriorNodes;
  if (name == "step_end") return WindowRule::kStepEnd;
  throw std::invalid_argument("unknown window rule '" + name + "'");
}

std::string to_string(WindowRule rule) {
  return rule == WindowRule::kInteriorNodes ? "interior" : "step_end";
}

std::vector<double> QoISpec::time_weights(const TimeGrid& grid) const {
  std::vector<double> w(static_cast<std::size_t>(grid.n_steps) + 1, 0.0);
  if (include_final) w.back() += 1.0;
  if (observation_times.empty()) return w;
  if (!(window > 0.0)) throw std::invalid_argument("observation window must be positive");
  const int width = aligned_index(window, grid.dt, "observation window");
  for (double tau : observation_times) {
    if (tau < -1e-12 || tau + window > grid.t_final() + 1e-12) {
      throw std::invalid_argument("observation window outside [0, t_final]");
    }
    const int first = aligned_index(tau, grid.dt, "observation time") + 1;
    const int last = first - 1 + width - (rule == WindowRule::kInteriorNodes ? 1 : 0);
    for (int n = first; n <= last; ++n) w[static_cast<std::size_t>(n)] += grid.dt / window;
  }
  return w;
}

Trajectory::Trajectory(std::shared_ptr<const fem::StructuredMesh> mesh, TimeGrid grid, Vector data)
    : mesh_(std::move(mesh)), grid_(grid), data_(std::move(data)) {
  if (static_cast<std::size_t>(data_.size()) != mesh_->num_nodes() * (grid_.n_steps + 1)) {
    throw std::invalid_argument("trajectory length does not match mesh and time grid");
  }
}

double nutrient(double, const Point& x) { return std::exp(-1.5 * x.x); }

double initial_tumor(const Point& x) {
  const double dx = x.x - 0.5;
  const double dy = x.y - 0.5;
  return dx * dx + dy * dy < kTumorRadius * kTumorRadius ? 1.0 : 0.0;
}

Vector initial_condition(const fem::StructuredMesh& mesh) {
  Vector v(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) v[static_cast<Eigen::Index>(i)] = initial_tumor(mesh.node(i));
  return v;
}

TumorDiscretization::TumorDiscretization(std::shared_ptr<const fem::StructuredMesh> mesh,
                                         TimeGrid grid, QoISpec spec)
    : assembler_(std::move(mesh)), grid_(grid), spec_(std::move(spec)) {}

std::shared_ptr<const TumorDiscretization> TumorDiscretization::create(int nx, int ny, TimeGrid grid,
                                                                       QoISpec spec) {
  if (grid.n_steps < 1 || !(grid.dt > 0.0)) throw std::invalid_argument("invalid time grid");
  auto mesh = std::make_shared<const fem::StructuredMesh>(nx, ny);
  std::shared_ptr<TumorDiscretization> d(new TumorDiscretization(mesh, grid, std::move(spec)));
  d->weights_ = d->spec_.time_weights(grid);
  const auto f = [](const Point& x) { return nutrient(0.0, x); };
  d->mass_ = d->assembler_.assemble_matrix(fem::mass_kernel());
  d->stiffness_ = d->assembler_.assemble_matrix(fem::stiffness_kernel(1.0));
  d->nutrient_mass_ = d->assembler_.assemble_matrix(fem::mass_kernel(f));
  const double area = mesh->rectangle().area();
  d->average_dual_ = d->assembler_.assemble_vector(
      fem::load_kernel([area](const Point&) { return 1.0 / area; }));
  d->initial_ = initial_condition(*mesh);
  d->nutrient_q_.resize(mesh->num_elements() * 4);
  for (std::size_t e = 0; e < mesh->num_elements(); ++e) {
    const auto el = d->assembler_.element(e);
    for (int q = 0; q < 4; ++q) d->nutrient_q_[e * 4 + static_cast<std::size_t>(q)] = f(el.points[q].x);
  }
  return d;
}

SparseMatrix TumorDiscretization::weighted_mass(const Eigen::Ref<const Vector>& u,
                                                const Eigen::Ref<const Vector>& s,
                                                const Weight& weight) const {
  return assembler_.assemble_matrix([&](const ElementData& el, LocalMatrix& a, LocalVector&) {
    const Eigen::Vector4d ue(u[el.nodes[0]], u[el.nodes[1]], u[el.nodes[2]], u[el.nodes[3]]);
    const Eigen::Vector4d se(s[el.nodes[0]], s[el.nodes[1]], s[el.nodes[2]], s[el.nodes[3]]);
    for (int q = 0; q < 4; ++q) {
      const auto& p = el.points[q];
      const Eigen::Map<const Eigen::Vector4d> phi(p.shape.data());
      const double w = p.jxw * weight(phi.dot(ue), phi.dot(se), nutrient_at(el.index, q));
      a.noalias() += w * phi * phi.transpose();
    }
  });
}

Vector TumorDiscretization::weighted_load(const Eigen::Ref<const Vector>& u,
                                          const Eigen::Ref<const Vector>& s,
                                          const Weight& weight) const {
  return assembler_.assemble_vector([&](const ElementData& el, LocalVector& b) {
    const Eigen::Vector4d ue(u[el.nodes[0]], u[el.nodes[1]], u[el.nodes[2]], u[el.nodes[3]]);
    const Eigen::Vector4d se(s[el.nodes[0]], s[el.nodes[1]], s[el.nodes[2]], s[el.nodes[3]]);
    for (int q = 0; q < 4; ++q) {
      const auto& p = el.points[q];
      const Eigen::Map<const Eigen::Vector4d> phi(p.shape.data());
      b.noalias() += p.jxw * weight(phi.dot(ue), phi.dot(se), nutrient_at(el.index, q)) * phi;
    }
  });
}

SparseMatrix combine(const SparseMatrix& pattern,
                     std::initializer_list<std::pair<double, const SparseMatrix*>> terms) {
  SparseMatrix out = pattern;
  Eigen::Map<Eigen::ArrayXd> values(out.valuePtr(), out.nonZeros());
  values.setZero();
  for (const auto& [coef, m] : terms) {
    if (m->nonZeros() != out.nonZeros()) throw std::logic_error("combine: pattern mismatch");
    values += coef * Eigen::Map<const Eigen::ArrayXd>(m->valuePtr(), m->nonZeros());
  }
  return out;
}

TumorModelPair::TumorModelPair(std::shared_ptr<const TumorDiscretization> disc,
                               TumorCoarseParams coarse, TumorFineParams fine, double blend)
    : disc_(std::move(disc)), coarse_(coarse), fine_(fine), blend_(blend) {
  if (!(blend >= 0.0 && blend <= 1.0)) throw std::invalid_argument("blend must lie in [0, 1]");
  if (!(fine.lambda_p > 0 && fine.lambda_d > 0 && fine.epsilon > 0 && fine.C > 0)) {
    throw std::invalid_argument("fine tumor parameters must be strictly positive");
  }
  if (!(coarse.lambda_p0 >= 0 && coarse.lambda_d0 >= 0 && coarse.D > 0)) {
    throw std::invalid_argument("coarse tumor rates must be nonnegative and D positive");
  }
}

double TumorModelPair::diffusion() const {
  return blend_ * fine_.epsilon + (1.0 - blend_) * coarse_.D;
}

double TumorModelPair::reaction(double u, double f) const {
  const double fine = fine_.C * psi1(u) - fine_.lambda_p * u * (1.0 - u) * f + fine_.lambda_d * u;
  if (blend_ == 1.0) return fine;
  return blend_ * fine + (1.0 - blend_) * (coarse_.lambda_d0 - coarse_.lambda_p0 * f) * u;
}

double TumorModelPair::reaction_derivative(double u, double f) const {
  const double fine = fine_.C * psi2(u) - fine_.lambda_p * (1.0 - 2.0 * u) * f + fine_.lambda_d;
  if (blend_ == 1.0) return fine;
  return blend_ * fine + (1.0 - blend_) * (coarse_.lambda_d0 - coarse_.lambda_p0 * f);
}

double TumorModelPair::reaction_second(double u, double f) const {
  return blend_ * (fine_.C * psi3(u) + 2.0 * fine_.lambda_p * f);
}

namespace {

Eigen::Index block(const TumorDiscretization& d) { return static_cast<Eigen::Index>(d.nodes()); }

}  // namespace

Vector TumorModelPair::load() const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dimension()));
  out.head(block(*disc_)) = disc_->mass() * disc_->initial_state();
  return out;
}

Vector TumorModelPair::fine_form(const Vector& u) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const double dt = d.grid().dt;
  Vector out(u.size());
  out.head(nb) = d.mass() * u.head(nb);
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    const auto un = u.segment(n * nb, nb);
    out.segment(n * nb, nb) =
        d.mass() * (un - u.segment((n - 1) * nb, nb)) +
        dt * (diffusion() * (d.stiffness() * un) +
              d.weighted_load(un, un, [this](double x, double, double f) { return reaction(x, f); }));
  }
  return out;
}

SparseMatrix TumorModelPair::coarse_step_matrix() const {
  const auto& d = *disc_;
  const double dt = d.grid().dt;
  return combine(d.mass(), {{1.0 + dt * coarse_.lambda_d0, &d.mass()},
                            {dt * coarse_.D, &d.stiffness()},
                            {-dt * coarse_.lambda_p0, &d.nutrient_mass()}});
}

Vector TumorModelPair::coarse_form(const Vector& u) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const SparseMatrix s = coarse_step_matrix();
  Vector out(u.size());
  out.head(nb) = d.mass() * u.head(nb);
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    out.segment(n * nb, nb) = s * u.segment(n * nb, nb) - d.mass() * u.segment((n - 1) * nb, nb);
  }
  return out;
}

SparseMatrix TumorModelPair::step_matrix(const Eigen::Ref<const Vector>& un, const Vector* shift,
                                         int n) const {
  const auto& d = *disc_;
  const double dt = d.grid().dt;
  SparseMatrix reaction_mass;
  if (shift != nullptr) {
    const auto nb = block(d);
    reaction_mass = d.weighted_mass(un, shift->segment(n * nb, nb), [this](double x, double s, double f) {
      return reaction_derivative(x, f) + reaction_second(x, f) * s;
    });
  } else {
    reaction_mass = d.weighted_mass(un, un, [this](double x, double, double f) {
      return reaction_derivative(x, f);
    });
  }
  return combine(d.mass(), {{1.0, &d.mass()},
                            {dt * diffusion(), &d.stiffness()},
                            {dt, &reaction_mass}});
}

Vector TumorModelPair::fine_tangent(const Vector& u, const Vector& v) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  Vector out(u.size());
  out.head(nb) = d.mass() * v.head(nb);
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    out.segment(n * nb, nb) = step_matrix(u.segment(n * nb, nb), nullptr, n) * v.segment(n * nb, nb) -
                              d.mass() * v.segment((n - 1) * nb, nb);
  }
  return out;
}

Vector TumorModelPair::fine_tangent_transpose(const Vector& u, const Vector& p) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const int steps = d.grid().n_steps;
  Vector out(u.size());
  out.head(nb) = d.mass() * (p.head(nb) - p.segment(nb, nb));
  for (int n = 1; n <= steps; ++n) {
    Vector col = step_matrix(u.segment(n * nb, nb), nullptr, n).transpose() * p.segment(n * nb, nb);
    if (n < steps) col -= d.mass() * p.segment((n + 1) * nb, nb);
    out.segment(n * nb, nb) = col;
  }
  return out;
}

Vector TumorModelPair::fine_second(const Vector& u, const Vector& q, const Vector& v) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const double dt = d.grid().dt;
  Vector out = Vector::Zero(u.size());
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    const SparseMatrix w = d.weighted_mass(u.segment(n * nb, nb), q.segment(n * nb, nb),
                                           [this](double x, double s, double f) {
                                             return reaction_second(x, f) * s;
                                           });
    out.segment(n * nb, nb) = dt * (w * v.segment(n * nb, nb));
  }
  return out;
}

Vector TumorModelPair::fine_second_transpose(const Vector& u, const Vector& q, const Vector& p) const {
  // The weighted mass matrix is symmetric, so the roles of v and p swap freely.
  return fine_second(u, q, p);
}

double TumorModelPair::qoi(const Vector& u) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  double total = 0.0;
  const auto& w = d.time_weights();
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (w[n] != 0.0) total += w[n] * d.average_dual().dot(u.segment(static_cast<Eigen::Index>(n) * nb, nb));
  }
  return total;
}

Vector TumorModelPair::qoi_gradient(const Vector&) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dimension()));
  const auto& w = d.time_weights();
  for (std::size_t n = 0; n < w.size(); ++n) {
    out.segment(static_cast<Eigen::Index>(n) * nb, nb) = w[n] * d.average_dual();
  }
  return out;
}

Vector TumorModelPair::solve_coarse_forward() const {
  const auto& d = *disc_;
  const auto nb = block(d);
  Vector u(static_cast<Eigen::Index>(dimension()));
  u.head(nb) = d.initial_state();
  fem::LinearSolver solver;
  solver.factorize(coarse_step_matrix());
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    u.segment(n * nb, nb) = at_step(n, [&] {
      return solver.solve(Vector(d.mass() * u.segment((n - 1) * nb, nb)));
    });
  }
  return u;
}

Vector TumorModelPair::solve_coarse_adjoint(const Vector& u0) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const int steps = d.grid().n_steps;
  const Vector g = qoi_gradient(u0);
  Vector p(g.size());
  fem::LinearSolver solver;
  solver.factorize(SparseMatrix(coarse_step_matrix().transpose()));
  for (int n = steps; n >= 1; --n) {
    Vector rhs = g.segment(n * nb, nb);
    if (n < steps) rhs += d.mass() * p.segment((n + 1) * nb, nb);
    p.segment(n * nb, nb) = at_step(n, [&] { return solver.solve(rhs); });
  }
  fem::LinearSolver mass_solver = cg_solver();
  mass_solver.factorize(d.mass());
  p.head(nb) = mass_solver.solve(Vector(g.head(nb) + d.mass() * p.segment(nb, nb)));
  return p;
}

Vector TumorModelPair::solve_fine_forward() const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const double dt = d.grid().dt;
  Vector u(static_cast<Eigen::Index>(dimension()));
  u.head(nb) = d.initial_state();
  fem::LinearSolver solver = cg_solver();
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    const Vector previous = u.segment((n - 1) * nb, nb);
    const auto residual = [&](const Vector& x) {
      return Vector(d.mass() * (x - previous) +
                    dt * (diffusion() * (d.stiffness() * x) +
                          d.weighted_load(x, x, [this](double y, double, double f) { return reaction(y, f); })));
    };
    const auto jacobian = [&](const Vector& x) { return step_matrix(x, nullptr, n); };
    u.segment(n * nb, nb) = at_step(n, [&] {
      return fem::newton_solve(residual, jacobian, previous, solver, newton_options).solution;
    });
  }
  return u;
}

Vector TumorModelPair::solve_fine_adjoint(const Vector& u) const {
  return solve_tangent_adjoint(u, nullptr, qoi_gradient(u));
}

Vector TumorModelPair::solve_tangent(const Vector& u, const Vector* shift, const Vector& rhs) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  Vector v(rhs.size());
  fem::LinearSolver solver = cg_solver();
  solver.factorize(d.mass());
  v.head(nb) = solver.solve(Vector(rhs.head(nb)));
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    solver.factorize(step_matrix(u.segment(n * nb, nb), shift, n));
    const Vector b = rhs.segment(n * nb, nb) + d.mass() * v.segment((n - 1) * nb, nb);
    v.segment(n * nb, nb) = at_step(n, [&] { return solver.solve(b); });
  }
  return v;
}

Vector TumorModelPair::solve_tangent_adjoint(const Vector& u, const Vector* shift,
                                             const Vector& rhs) const {
  const auto& d = *disc_;
  const auto nb = block(d);
  const int steps = d.grid().n_steps;
  Vector p(rhs.size());
  fem::LinearSolver solver = cg_solver();
  for (int n = steps; n >= 1; --n) {
    // Step matrices are symmetric.
    solver.factorize(step_matrix(u.segment(n * nb, nb), shift, n));
    Vector b = rhs.segment(n * nb, nb);
    if (n < steps) b += d.mass() * p.segment((n + 1) * nb, nb);
    p.segment(n * nb, nb) = at_step(n, [&] { return solver.solve(b); });
  }
  solver.factorize(d.mass());
  p.head(nb) = solver.solve(Vector(rhs.head(nb) + d.mass() * p.segment(nb, nb)));
  return p;
}

Trajectory march_coarse_forward(std::shared_ptr<const TumorDiscretization> disc,
                                const TumorCoarseParams& params) {
  TumorModelPair pair(disc, params, TumorFineParams{});
  return Trajectory(disc->mesh_ptr(), disc->grid(), pair.solve_coarse_forward());
}

Trajectory march_fine_forward(std::shared_ptr<const TumorDiscretization> disc,
                              const TumorFineParams& params) {
  TumorModelPair pair(disc, TumorCoarseParams{}, params);
  return Trajectory(disc->mesh_ptr(), disc->grid(), pair.solve_fine_forward());
}

double evaluate_qoi(const Trajectory& traj, const QoISpec& spec) {
  const auto w = spec.time_weights(traj.grid());
  const double area = traj.mesh().rectangle().area();
  fem::Assembler assembler(std::make_shared<const fem::StructuredMesh>(traj.mesh()));
  const Vector avg = assembler.assemble_vector(fem::load_kernel([area](const Point&) { return 1.0 / area; }));
  double total = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (w[n] != 0.0) total += w[n] * avg.dot(traj.step(static_cast<int>(n)));
  }
  return total;
}

void check_bounded(const Trajectory& traj, double lower, double upper) {
  const double lo = traj.data().minCoeff();
  const double hi = traj.data().maxCoeff();
  if (lo < lower || hi > upper) {
    throw NumericError("trajectory left [" + std::to_string(lower) + ", " + std::to_string(upper) +
                       "]: range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

LinearizedErrorSolver::LinearizedErrorSolver(std::shared_ptr<const TumorDiscretization> disc,
                                             Vector coarse_trajectory)
    : disc_(std::move(disc)), u0_(std::move(coarse_trajectory)) {
  const auto& d = *disc_;
  const auto nb = block(d);
  if (u0_.size() != static_cast<Eigen::Index>(d.dimension())) {
    throw std::invalid_argument("coarse trajectory has the wrong length");
  }
  const int steps = d.grid().n_steps;
  for (int n = 1; n <= steps; ++n) {
    const auto un = u0_.segment(n * nb, nb);
    psi_mass_.push_back(d.weighted_mass(un, un, [](double x, double, double) { return psi2(x); }));
    growth_mass_.push_back(d.weighted_mass(un, un, [](double x, double, double f) {
      return -(1.0 - 2.0 * x) * f;
    }));
    increment_.push_back(d.mass() * (un - u0_.segment((n - 1) * nb, nb)));
    diffusion_.push_back(d.stiffness() * un);
    psi_load_.push_back(d.weighted_load(un, un, [](double x, double, double) { return psi1(x); }));
    growth_load_.push_back(d.weighted_load(un, un, [](double x, double, double f) {
      return -x * (1.0 - x) * f;
    }));
    death_load_.push_back(d.mass() * un);
  }
}

template <typename Visitor>
void LinearizedErrorSolver::march(const TumorFineParams& params, Visitor&& visit) const {
  const auto& d = *disc_;
  const double dt = d.grid().dt;
  fem::LinearSolver solver = cg_solver();
  Vector e = Vector::Zero(block(d));
  for (int n = 1; n <= d.grid().n_steps; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    const SparseMatrix s = combine(d.mass(), {{1.0 + dt * params.lambda_d, &d.mass()},
                                              {dt * params.epsilon, &d.stiffness()},
                                              {dt * params.C, &psi_mass_[k]},
                                              {dt * params.lambda_p, &growth_mass_[k]}});
    // R(u0; q) restricted to level n: minus the fine step residual at u0.
    const Vector residual = increment_[k] + dt * (params.epsilon * diffusion_[k] + params.C * psi_load_[k] +
                                                  params.lambda_p * growth_load_[k] +
                                                  params.lambda_d * death_load_[k]);
    solver.factorize(s);
    const Vector b = d.mass() * e - residual;
    e = at_step(n, [&] { return solver.solve(b); });
    visit(n, e);
  }
}

Vector LinearizedErrorSolver::solve(const TumorFineParams& params) const {
  const auto nb = block(*disc_);
  Vector out = Vector::Zero(u0_.size());
  march(params, [&](int n, const Vector& e) { out.segment(n * nb, nb) = e; });
  return out;
}

double LinearizedErrorSolver::qoi_error(const TumorFineParams& params) const {
  const auto& w = disc_->time_weights();
  double total = 0.0;
  march(params, [&](int n, const Vector& e) {
    const double wn = w[static_cast<std::size_t>(n)];
    if (wn != 0.0) total += wn * disc_->average_dual().dot(e);
  });
  return total;
}

void write_trajectory(const Trajectory& traj, const QoISpec& spec, const std::vector<int>& levels,
                      const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["dt"] = traj.grid().dt;
  manifest["n_steps"] = traj.grid().n_steps;
  manifest["qoi_spec"] = {{"observation_times", spec.observation_times},
                          {"window", spec.window},
                          {"window_rule", to_string(spec.rule)},
                          {"include_final", spec.include_final}};
  auto files = nlohmann::json::array();
  for (int n : levels) {
    if (n < 0 || n > traj.n_steps()) throw std::out_of_range("trajectory level out of range");
    const auto name = stem + "_" + std::to_string(n) + ".csv";
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << "node_index,x,y,value\n";
    char line[128];
    const auto values = traj.step(n);
    for (std::size_t i = 0; i < traj.nodes(); ++i) {
      const Point& p = traj.mesh().node(i);
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", i, p.x, p.y,
                    values[static_cast<Eigen::Index>(i)]);
      out << line;
    }
    files.push_back({{"level", n}, {"time", traj.grid().time(n)}, {"file", name}});
  }
  manifest["files"] = files;
  std::ofstream out(dir / (stem + "_manifest.json"), std::ios::binary);
  out << manifest.dump(2) << '\n';
}

}  // namespace goalcal::tumor
