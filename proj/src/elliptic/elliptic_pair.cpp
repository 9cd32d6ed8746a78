// SPDX-License-Identifier: Apache-2.0
#include "goalcal/elliptic/elliptic_pair.hpp"

#include "goalcal/fem/linear_solver.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace goalcal::elliptic {

using fem::ElementData;
using fem::LocalMatrix;
using fem::LocalVector;

double forcing(const Point& x) {
  const double cx = std::cos(4.0 * std::numbers::pi * x.x);
  const double cy = std::cos(4.0 * std::numbers::pi * x.y);
  return 10.0 * cx * cx * cy * cy;
}

NonlinearityKind parse_nonlinearity(const std::string& name) {
  if (name == "quadratic") return NonlinearityKind::kQuadratic;
  if (name == "linear") return NonlinearityKind::kLinear;
  if (name == "exponential") return NonlinearityKind::kExponential;
  throw std::invalid_argument("unknown nonlinearity '" + name + "'");
}

std::string to_string(NonlinearityKind kind) {
  switch (kind) {
    case NonlinearityKind::kQuadratic: return "quadratic";
    case NonlinearityKind::kLinear: return "linear";
    case NonlinearityKind::kExponential: return "exponential";
  }
  return "unknown";
}

double Diffusivity::value(double u) const {
  switch (kind) {
    case NonlinearityKind::kQuadratic: return kappa * (1.0 + alpha * u * u);
    case NonlinearityKind::kLinear: return kappa * (1.0 + alpha * u);
    case NonlinearityKind::kExponential: return kappa * std::exp(alpha * u);
  }
  return kappa;
}

double Diffusivity::derivative(double u) const {
  switch (kind) {
    case NonlinearityKind::kQuadratic: return 2.0 * kappa * alpha * u;
    case NonlinearityKind::kLinear: return kappa * alpha;
    case NonlinearityKind::kExponential: return kappa * alpha * std::exp(alpha * u);
  }
  return 0.0;
}

double Diffusivity::second_derivative(double u) const {
  switch (kind) {
    case NonlinearityKind::kQuadratic: return 2.0 * kappa * alpha;
    case NonlinearityKind::kLinear: return 0.0;
    case NonlinearityKind::kExponential: return kappa * alpha * alpha * std::exp(alpha * u);
  }
  return 0.0;
}

EllipticDiscretization::EllipticDiscretization(std::shared_ptr<const fem::StructuredMesh> mesh)
    : assembler_(std::move(mesh)) {}

std::shared_ptr<const EllipticDiscretization> EllipticDiscretization::create(
    int nx, int ny, std::function<double(const Point&)> source) {
  auto mesh = std::make_shared<const fem::StructuredMesh>(nx, ny);
  std::shared_ptr<EllipticDiscretization> disc(new EllipticDiscretization(mesh));
  disc->load_ = disc->assembler_.assemble_vector(fem::load_kernel(std::move(source)));
  disc->mask(disc->load_);
  disc->qoi_weights_ = disc->assembler_.assemble_vector(fem::load_kernel([](const Point&) { return 1.0; }));
  disc->qoi_dual_ = disc->qoi_weights_;
  disc->mask(disc->qoi_dual_);
  disc->stiffness_ = disc->assembler_.assemble_matrix(fem::stiffness_kernel(1.0));
  return disc;
}

void EllipticDiscretization::mask(Vector& dual) const {
  const auto& b = boundary();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i]) dual[static_cast<Eigen::Index>(i)] = 0.0;
  }
}

EllipticModelPair::EllipticModelPair(std::shared_ptr<const EllipticDiscretization> disc,
                                     EllipticCoarseParams coarse, EllipticFineParams fine,
                                     NonlinearityKind kind)
    : disc_(std::move(disc)), coarse_(coarse), fine_(fine), k_{kind, fine.kappa, fine.alpha} {
  if (!(fine.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (!(coarse.kappa0 > 0.0)) throw std::invalid_argument("kappa0 must be positive");
  if (!std::isfinite(fine.alpha)) throw std::invalid_argument("alpha must be finite");
}

std::size_t EllipticModelPair::dimension() const { return disc_->mesh().num_nodes(); }

Vector EllipticModelPair::load() const { return disc_->load(); }

Vector EllipticModelPair::fine_form(const Vector& u) const {
  Vector out = disc_->assembler().assemble_vector([&](const ElementData& el, LocalVector& b) {
    for (int q = 0; q < fem::kPointsPerElement; ++q) {
      const auto& p = el.points[q];
      const Eigen::Vector2d flux = k_.value(el.value(u, q)) * el.gradient(u, q);
      for (int i = 0; i < 4; ++i) b[i] += p.jxw * flux.dot(p.grad[i]);
    }
  });
  disc_->mask(out);
  return out;
}

Vector EllipticModelPair::coarse_form(const Vector& u) const {
  Vector out = coarse_.kappa0 * (disc_->stiffness() * u);
  disc_->mask(out);
  return out;
}

Vector EllipticModelPair::fine_tangent(const Vector& u, const Vector& v) const {
  Vector out = disc_->assembler().assemble_vector([&](const ElementData& el, LocalVector& b) {
    for (int q = 0; q < fem::kPointsPerElement; ++q) {
      const auto& p = el.points[q];
      const double uq = el.value(u, q);
      const Eigen::Vector2d flux =
          k_.value(uq) * el.gradient(v, q) + k_.derivative(uq) * el.value(v, q) * el.gradient(u, q);
      for (int i = 0; i < 4; ++i) b[i] += p.jxw * flux.dot(p.grad[i]);
    }
  });
  disc_->mask(out);
  return out;
}

Vector EllipticModelPair::fine_tangent_transpose(const Vector& u, const Vector& pv) const {
  Vector out = disc_->assembler().assemble_vector([&](const ElementData& el, LocalVector& b) {
    for (int q = 0; q < fem::kPointsPerElement; ++q) {
      const auto& p = el.points[q];
      const double uq = el.value(u, q);
      const Eigen::Vector2d gp = el.gradient(pv, q);
      const double kq = k_.value(uq);
      const double cross = k_.derivative(uq) * el.gradient(u, q).dot(gp);
      for (int j = 0; j < 4; ++j) b[j] += p.jxw * (kq * p.grad[j].dot(gp) + cross * p.shape[j]);
    }
  });
  disc_->mask(out);
  return out;
}

Vector EllipticModelPair::fine_second(const Vector& u, const Vector& qv, const Vector& v) const {
  Vector out = disc_->assembler().assemble_vector([&](const ElementData& el, LocalVector& b) {
    for (int q = 0; q < fem::kPointsPerElement; ++q) {
      const auto& p = el.points[q];
      const double uq = el.value(u, q);
      const double d1 = k_.derivative(uq);
      const double d2 = k_.second_derivative(uq);
      const double qq = el.value(qv, q);
      const double vq = el.value(v, q);
      const Eigen::Vector2d flux = d1 * qq * el.gradient(v, q) + d1 * vq * el.gradient(qv, q) +
                                   d2 * qq * vq * el.gradient(u, q);
      for (int i = 0; i < 4; ++i) b[i] += p.jxw * flux.dot(p.grad[i]);
    }
  });
  disc_->mask(out);
  return out;
}

Vector EllipticModelPair::fine_second_transpose(const Vector& u, const Vector& qv,
                                                const Vector& pv) const {
  Vector out = disc_->assembler().assemble_vector([&](const ElementData& el, LocalVector& b) {
    for (int q = 0; q < fem::kPointsPerElement; ++q) {
      const auto& p = el.points[q];
      const double uq = el.value(u, q);
      const double d1 = k_.derivative(uq);
      const double d2 = k_.second_derivative(uq);
      const double qq = el.value(qv, q);
      const Eigen::Vector2d gp = el.gradient(pv, q);
      const double along = d1 * el.gradient(qv, q).dot(gp) + d2 * qq * el.gradient(u, q).dot(gp);
      for (int j = 0; j < 4; ++j) b[j] += p.jxw * (d1 * qq * p.grad[j].dot(gp) + along * p.shape[j]);
    }
  });
  disc_->mask(out);
  return out;
}

double EllipticModelPair::qoi(const Vector& u) const { return disc_->qoi_weights().dot(u); }

Vector EllipticModelPair::qoi_gradient(const Vector&) const { return disc_->qoi_dual(); }

SparseMatrix EllipticModelPair::tangent_matrix(const Vector& u, const Vector* shift) const {
  return disc_->assembler().assemble_matrix([&](const ElementData& el, LocalMatrix& a, LocalVector&) {
    for (int q = 0; q < fem::kPointsPerElement; ++q) {
      const auto& p = el.points[q];
      const double uq = el.value(u, q);
      double diff = k_.value(uq);
      double d1 = k_.derivative(uq);
      Eigen::Vector2d transport = d1 * el.gradient(u, q);
      if (shift != nullptr) {
        const double sq = el.value(*shift, q);
        diff += d1 * sq;
        transport += d1 * el.gradient(*shift, q) + k_.second_derivative(uq) * sq * el.gradient(u, q);
      }
      for (int i = 0; i < 4; ++i) {
        const double ti = transport.dot(p.grad[i]);
        for (int j = 0; j < 4; ++j) {
          a(i, j) += p.jxw * (diff * p.grad[j].dot(p.grad[i]) + ti * p.shape[j]);
        }
      }
    }
  });
}

namespace {

SparseMatrix combine_values(const SparseMatrix& a, double ca, const SparseMatrix& b, double cb) {
  SparseMatrix out = a;
  Eigen::Map<Eigen::ArrayXd>(out.valuePtr(), out.nonZeros()) =
      ca * Eigen::Map<const Eigen::ArrayXd>(a.valuePtr(), a.nonZeros()) +
      cb * Eigen::Map<const Eigen::ArrayXd>(b.valuePtr(), b.nonZeros());
  return out;
}

Vector constrained_solve(SparseMatrix a, Vector rhs, const EllipticDiscretization& disc) {
  fem::SparseSystem sys{std::move(a), std::move(rhs), {}};
  sys.constrain(disc.boundary(), 0.0);
  thread_local fem::LinearSolver solver;
  return solver.solve(sys);
}

}  // namespace

Vector EllipticModelPair::solve_coarse_forward() const {
  return constrained_solve(coarse_.kappa0 * disc_->stiffness(), disc_->load(), *disc_);
}

Vector EllipticModelPair::solve_coarse_adjoint(const Vector&) const {
  // B0 is symmetric and u-independent.
  return constrained_solve(coarse_.kappa0 * disc_->stiffness(), disc_->qoi_dual(), *disc_);
}

fem::NewtonResult EllipticModelPair::solve_fine_forward_from(const Vector& guess,
                                                             const fem::NewtonOptions& options) const {
  Vector start = guess;
  disc_->mask(start);
  const auto residual = [&](const Vector& u) { return Vector(fine_form(u) - disc_->load()); };
  const auto jacobian = [&](const Vector& u) {
    fem::SparseSystem sys{tangent_matrix(u), Vector::Zero(u.size()), {}};
    sys.constrain(disc_->boundary(), 0.0);
    return sys.matrix;
  };
  thread_local fem::LinearSolver solver;
  return fem::newton_solve(residual, jacobian, std::move(start), solver, options);
}

Vector EllipticModelPair::solve_fine_forward() const {
  return solve_fine_forward_from(solve_coarse_forward()).solution;
}

Vector EllipticModelPair::solve_fine_adjoint(const Vector& u) const {
  return solve_tangent_adjoint(u, nullptr, qoi_gradient(u));
}

Vector EllipticModelPair::solve_tangent(const Vector& u, const Vector* shift, const Vector& rhs) const {
  Vector b = rhs;
  disc_->mask(b);
  return constrained_solve(tangent_matrix(u, shift), std::move(b), *disc_);
}

Vector EllipticModelPair::solve_tangent_adjoint(const Vector& u, const Vector* shift,
                                                const Vector& rhs) const {
  Vector b = rhs;
  disc_->mask(b);
  SparseMatrix at = tangent_matrix(u, shift).transpose();
  return constrained_solve(std::move(at), std::move(b), *disc_);
}

LinearizedErrorSolver::LinearizedErrorSolver(std::shared_ptr<const EllipticDiscretization> disc,
                                             Vector coarse_solution, NonlinearityKind kind)
    : disc_(std::move(disc)), u0_(std::move(coarse_solution)) {
  if (!supports(kind)) throw std::invalid_argument("diffusivity is not affine in alpha");
  const auto& d = *disc_;
  const EllipticModelPair unit(disc_, {}, {1.0, 1.0}, kind);
  const Vector zero = Vector::Zero(u0_.size());

  fem::SparseSystem k{d.stiffness(), zero, {}};
  k.constrain(d.boundary(), 0.0);
  stiffness_ = std::move(k.matrix);

  nonlinear_ = unit.tangent_matrix(u0_);
  Eigen::Map<Eigen::ArrayXd>(nonlinear_.valuePtr(), nonlinear_.nonZeros()) -=
      Eigen::Map<const Eigen::ArrayXd>(d.stiffness().valuePtr(), d.stiffness().nonZeros());
  fem::SparseSystem a{nonlinear_, zero, {}};
  a.constrain(d.boundary(), 0.0);
  nonlinear_ = std::move(a.matrix);
  for (int col = 0; col < nonlinear_.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(nonlinear_, col); it; ++it) {
      if (d.boundary()[static_cast<std::size_t>(col)]) it.valueRef() = 0.0;
    }
  }

  diffusion_ = d.stiffness() * u0_;
  d.mask(diffusion_);
  nonlinear_form_ = unit.fine_form(u0_) - diffusion_;
  d.mask(nonlinear_form_);
}

bool LinearizedErrorSolver::supports(NonlinearityKind kind) {
  return kind == NonlinearityKind::kQuadratic || kind == NonlinearityKind::kLinear;
}

Vector LinearizedErrorSolver::solve(const EllipticFineParams& params) const {
  if (!(params.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  const double k = params.kappa;
  const double ka = params.kappa * params.alpha;
  const SparseMatrix j = combine_values(stiffness_, k, nonlinear_, ka);
  const Vector rhs = disc_->load() - k * diffusion_ - ka * nonlinear_form_;
  // One solver per thread keeps the symbolic analysis across calls.
  thread_local fem::LinearSolver solver;
  solver.factorize(j);
  return solver.solve(rhs);
}

double LinearizedErrorSolver::qoi_error(const EllipticFineParams& params) const {
  return disc_->qoi_weights().dot(solve(params));
}

}  // namespace goalcal::elliptic
