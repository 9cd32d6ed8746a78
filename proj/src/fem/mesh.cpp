// SPDX-License-Identifier: Apache-2.0
#include "goalcal/fem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace goalcal::fem {

StructuredMesh::StructuredMesh(int nx, int ny, Rectangle rect)
    : nx_(nx), ny_(ny), rect_(rect) {
  if (nx < 1 || ny < 1) {
    throw std::invalid_argument("mesh element counts must be positive");
  }
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0) ||
      !std::isfinite(rect.area())) {
    throw std::invalid_argument("mesh rectangle is degenerate");
  }
  nodes_.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  boundary_.reserve(nodes_.capacity());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Edge nodes take the corner coordinates exactly.
      const double x = i == nx ? rect.upper.x : rect.lower.x + i * hx();
      const double y = j == ny ? rect.upper.y : rect.lower.y + j * hy();
      nodes_.push_back({x, y});
      boundary_.push_back(i == 0 || j == 0 || i == nx || j == ny);
    }
  }
}

std::array<std::size_t, 4> StructuredMesh::element_nodes(std::size_t e) const {
  const int i = static_cast<int>(e % nx_);
  const int j = static_cast<int>(e / nx_);
  return {node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1),
          node_index(i, j + 1)};
}

std::size_t StructuredMesh::num_boundary_nodes() const {
  return static_cast<std::size_t>(std::count(boundary_.begin(), boundary_.end(), true));
}

StructuredMesh build_mesh(int nx, int ny, Rectangle rect) {
  return StructuredMesh(nx, ny, rect);
}

}  // namespace goalcal::fem
