// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/mesh.hpp"
#include "goalcal/fem/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace goalcal::fem {

inline constexpr int kNodesPerElement = 4;
inline constexpr int kPointsPerElement = 4;

/// Bilinear basis data at one 2x2 Gauss point, already mapped to the element.
struct QuadraturePoint {
  Point x;
  double jxw = 0.0;
  std::array<double, kNodesPerElement> shape{};
  std::array<Eigen::Vector2d, kNodesPerElement> grad{};
};

struct ElementData {
  std::size_t index = 0;
  std::array<std::size_t, kNodesPerElement> nodes{};
  std::array<QuadraturePoint, kPointsPerElement> points{};

  double value(const Vector& nodal, int q) const;
  Eigen::Vector2d gradient(const Vector& nodal, int q) const;
  Eigen::Vector4d gather(const Vector& nodal) const;
};

using LocalMatrix = Eigen::Matrix4d;
using LocalVector = Eigen::Vector4d;

/// Fills the local matrix and vector of one element. Both arrive zeroed.
using ElementKernel = std::function<void(const ElementData&, LocalMatrix&, LocalVector&)>;
using VectorKernel = std::function<void(const ElementData&, LocalVector&)>;

/// Assembled linear system with optional essential-boundary bookkeeping.
struct SparseSystem {
  SparseMatrix matrix;
  Vector rhs;
  std::vector<bool> constrained;

  /// Replaces constrained rows by identity rows with the prescribed value on
  /// the right-hand side. Columns are eliminated as well so symmetric
  /// operators stay symmetric.
  void constrain(const std::vector<bool>& mask, const Vector& values);
  void constrain(const std::vector<bool>& mask, double value = 0.0);
};

/// Q1 assembly over a structured mesh. The sparsity pattern and the
/// element-to-storage map are built once; each assembly only writes values.
class Assembler {
 public:
  explicit Assembler(std::shared_ptr<const StructuredMesh> mesh);

  const StructuredMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const StructuredMesh>& mesh_ptr() const { return mesh_; }
  const SparseMatrix& pattern() const { return pattern_; }

  /// Element data for element e; basis values are shared by all elements.
  ElementData element(std::size_t e) const;

  SparseSystem assemble(const ElementKernel& kernel) const;
  SparseMatrix assemble_matrix(const ElementKernel& kernel) const;
  Vector assemble_vector(const VectorKernel& kernel) const;

 private:
  std::shared_ptr<const StructuredMesh> mesh_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 16>> slots_;
  std::array<QuadraturePoint, kPointsPerElement> reference_;
};

/// One-shot assembly for callers that do not reuse the pattern.
SparseSystem assemble(const StructuredMesh& mesh, const ElementKernel& kernel);

// Common kernels.
ElementKernel mass_kernel(std::function<double(const Point&)> coefficient = {});
ElementKernel stiffness_kernel(double coefficient = 1.0);
VectorKernel load_kernel(std::function<double(const Point&)> source);

}  // namespace goalcal::fem
