// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/fem/mesh.hpp"
#include "goalcal/fem/types.hpp"

#include <filesystem>
#include <memory>

namespace goalcal::fem {

/// Nodal coefficients of a Q1 function on a mesh.
class Field {
 public:
  Field(std::shared_ptr<const StructuredMesh> mesh, Vector values);
  static Field zeros(std::shared_ptr<const StructuredMesh> mesh);
  /// Nodal interpolant of fn.
  static Field interpolate(std::shared_ptr<const StructuredMesh> mesh,
                           const std::function<double(const Point&)>& fn);

  const StructuredMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const StructuredMesh>& mesh_ptr() const { return mesh_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

 private:
  std::shared_ptr<const StructuredMesh> mesh_;
  Vector values_;
};

/// CSV with header `node_index,x,y,value`, LF endings, 17 significant digits.
void write_field_csv(const Field& field, const std::filesystem::path& path);
/// Reads values back; node coordinates must match the mesh.
Field read_field_csv(std::shared_ptr<const StructuredMesh> mesh, const std::filesystem::path& path);

}  // namespace goalcal::fem
