// SPDX-License-Identifier: Apache-2.0
#include "goalcal/fem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace goalcal::fem {
namespace {

// Reference square [-1, 1]^2, counter-clockwise corners.
constexpr std::array<std::array<double, 2>, 4> kCorners{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};

void check_finite(const LocalMatrix& a, const LocalVector& b, std::size_t e) {
  if (!a.allFinite() || !b.allFinite()) {
    throw NumericError("element kernel produced non-finite entries on element " +
                       std::to_string(e));
  }
}

}  // namespace

double ElementData::value(const Vector& nodal, int q) const {
  const auto& p = points[q];
  double v = 0.0;
  for (int a = 0; a < kNodesPerElement; ++a) v += p.shape[a] * nodal[nodes[a]];
  return v;
}

Eigen::Vector2d ElementData::gradient(const Vector& nodal, int q) const {
  const auto& p = points[q];
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int a = 0; a < kNodesPerElement; ++a) g += p.grad[a] * nodal[nodes[a]];
  return g;
}

Eigen::Vector4d ElementData::gather(const Vector& nodal) const {
  return {nodal[nodes[0]], nodal[nodes[1]], nodal[nodes[2]], nodal[nodes[3]]};
}

void SparseSystem::constrain(const std::vector<bool>& mask, const Vector& values) {
  if (mask.size() != static_cast<std::size_t>(matrix.rows())) {
    throw std::invalid_argument("constraint mask size does not match the system");
  }
  constrained = mask;
  for (int col = 0; col < matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
      const auto row = it.row();
      if (!mask[row] && !mask[col]) continue;
      if (!mask[row] && mask[col]) rhs[row] -= it.value() * values[col];
      it.valueRef() = row == col ? 1.0 : 0.0;
    }
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) rhs[static_cast<Eigen::Index>(i)] = values[static_cast<Eigen::Index>(i)];
  }
}

void SparseSystem::constrain(const std::vector<bool>& mask, double value) {
  constrain(mask, Vector::Constant(matrix.rows(), value));
}

Assembler::Assembler(std::shared_ptr<const StructuredMesh> mesh) : mesh_(std::move(mesh)) {
  const auto& m = *mesh_;
  const auto n = static_cast<Eigen::Index>(m.num_nodes());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(m.num_elements() * 16);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto nodes = m.element_nodes(e);
    for (auto r : nodes)
      for (auto c : nodes) triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), 0.0);
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  slots_.resize(m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto nodes = m.element_nodes(e);
    for (int a = 0; a < 4; ++a) {      // row
      for (int b = 0; b < 4; ++b) {    // column
        const int col = static_cast<int>(nodes[b]);
        const int* first = inner + outer[col];
        const int* last = inner + outer[col + 1];
        const int* hit = std::lower_bound(first, last, static_cast<int>(nodes[a]));
        slots_[e][a * 4 + b] = static_cast<int>(hit - inner);
      }
    }
  }

  // 2x2 Gauss-Legendre on the reference square mapped by a constant Jacobian.
  const double g = 1.0 / std::sqrt(3.0);
  const std::array<std::array<double, 2>, 4> gauss{{{-g, -g}, {g, -g}, {-g, g}, {g, g}}};
  const double jx = 0.5 * m.hx();
  const double jy = 0.5 * m.hy();
  for (int q = 0; q < kPointsPerElement; ++q) {
    auto& p = reference_[q];
    const double xi = gauss[q][0];
    const double eta = gauss[q][1];
    p.jxw = jx * jy;
    // Offset from the element's lower-left corner.
    p.x = {jx * (1.0 + xi), jy * (1.0 + eta)};
    for (int a = 0; a < kNodesPerElement; ++a) {
      const double sx = kCorners[a][0];
      const double sy = kCorners[a][1];
      p.shape[a] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta);
      p.grad[a] = {0.25 * sx * (1.0 + sy * eta) / jx, 0.25 * sy * (1.0 + sx * xi) / jy};
    }
  }
}

ElementData Assembler::element(std::size_t e) const {
  ElementData data;
  data.index = e;
  data.nodes = mesh_->element_nodes(e);
  data.points = reference_;
  const Point& origin = mesh_->node(data.nodes[0]);
  for (auto& p : data.points) {
    p.x.x += origin.x;
    p.x.y += origin.y;
  }
  return data;
}

SparseMatrix Assembler::assemble_matrix(const ElementKernel& kernel) const {
  SparseMatrix a = pattern_;
  double* values = a.valuePtr();
  std::fill(values, values + a.nonZeros(), 0.0);
  LocalMatrix local;
  LocalVector unused;
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    const ElementData data = element(e);
    local.setZero();
    unused.setZero();
    kernel(data, local, unused);
    check_finite(local, unused, e);
    const auto& slot = slots_[e];
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) values[slot[r * 4 + c]] += local(r, c);
  }
  return a;
}

SparseSystem Assembler::assemble(const ElementKernel& kernel) const {
  SparseSystem sys;
  sys.matrix = pattern_;
  sys.rhs = Vector::Zero(pattern_.rows());
  double* values = sys.matrix.valuePtr();
  std::fill(values, values + sys.matrix.nonZeros(), 0.0);
  LocalMatrix local;
  LocalVector local_rhs;
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    const ElementData data = element(e);
    local.setZero();
    local_rhs.setZero();
    kernel(data, local, local_rhs);
    check_finite(local, local_rhs, e);
    const auto& slot = slots_[e];
    for (int r = 0; r < 4; ++r) {
      sys.rhs[static_cast<Eigen::Index>(data.nodes[r])] += local_rhs[r];
      for (int c = 0; c < 4; ++c) values[slot[r * 4 + c]] += local(r, c);
    }
  }
  return sys;
}

Vector Assembler::assemble_vector(const VectorKernel& kernel) const {
  Vector out = Vector::Zero(pattern_.rows());
  LocalVector local;
  for (std::size_t e = 0; e < mesh_->num_elements(); ++e) {
    const ElementData data = element(e);
    local.setZero();
    kernel(data, local);
    if (!local.allFinite()) {
      throw NumericError("element kernel produced non-finite entries on element " +
                         std::to_string(e));
    }
    for (int r = 0; r < 4; ++r) out[static_cast<Eigen::Index>(data.nodes[r])] += local[r];
  }
  return out;
}

SparseSystem assemble(const StructuredMesh& mesh, const ElementKernel& kernel) {
  return Assembler(std::make_shared<const StructuredMesh>(mesh)).assemble(kernel);
}

ElementKernel mass_kernel(std::function<double(const Point&)> coefficient) {
  return [coefficient = std::move(coefficient)](const ElementData& el, LocalMatrix& a, LocalVector&) {
    for (const auto& p : el.points) {
      const double w = p.jxw * (coefficient ? coefficient(p.x) : 1.0);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) += w * p.shape[i] * p.shape[j];
    }
  };
}

ElementKernel stiffness_kernel(double coefficient) {
  return [coefficient](const ElementData& el, LocalMatrix& a, LocalVector&) {
    for (const auto& p : el.points) {
      const double w = p.jxw * coefficient;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) += w * p.grad[i].dot(p.grad[j]);
    }
  };
}

VectorKernel load_kernel(std::function<double(const Point&)> source) {
  return [source = std::move(source)](const ElementData& el, LocalVector& b) {
    for (const auto& p : el.points) {
      const double w = p.jxw * source(p.x);
      for (int i = 0; i < 4; ++i) b[i] += w * p.shape[i];
    }
  };
}

}  // namespace goalcal::fem
