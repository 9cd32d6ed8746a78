// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/types.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace goalcal::fem {

/// Axis-aligned rectangle given by its lower-left and upper-right corners.
struct Rectangle {
  Point lower{0.0, 0.0};
  Point upper{1.0, 1.0};

  double width() const { return upper.x - lower.x; }
  double height() const { return upper.y - lower.y; }
  double area() const { return width() * height(); }
};

/// Uniform nx-by-ny grid of bilinear quadrilaterals.
///
/// Nodes are numbered lexicographically, x fastest: node (i, j) has index
/// j * (nx + 1) + i. Element (i, j) has index j * nx + i and lists its nodes
/// counter-clockwise starting from the lower-left corner.
class StructuredMesh {
 public:
  StructuredMesh(int nx, int ny, Rectangle rect = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Rectangle& rectangle() const { return rect_; }
  double hx() const { return rect_.width() / nx_; }
  double hy() const { return rect_.height() / ny_; }
  /// Determinant of the reference-to-physical map, identical for all elements.
  double jacobian_determinant() const { return 0.25 * hx() * hy(); }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_elements() const { return static_cast<std::size_t>(nx_) * ny_; }

  std::size_t node_index(int i, int j) const {
    return static_cast<std::size_t>(j) * (nx_ + 1) + i;
  }
  const Point& node(std::size_t n) const { return nodes_[n]; }
  std::span<const Point> nodes() const { return nodes_; }
  std::array<std::size_t, 4> element_nodes(std::size_t e) const;

  /// True exactly for nodes lying on the rectangle's edge.
  const std::vector<bool>& boundary_mask() const { return boundary_; }
  std::size_t num_boundary_nodes() const;

 private:
  int nx_;
  int ny_;
  Rectangle rect_;
  std::vector<Point> nodes_;
  std::vector<bool> boundary_;
};

StructuredMesh build_mesh(int nx, int ny, Rectangle rect = {});

}  // namespace goalcal::fem
