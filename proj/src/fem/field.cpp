// SPDX-License-Identifier: Apache-2.0
#include "goalcal/fem/field.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace goalcal::fem {

Field::Field(std::shared_ptr<const StructuredMesh> mesh, Vector values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) throw std::invalid_argument("field needs a mesh");
  if (static_cast<std::size_t>(values_.size()) != mesh_->num_nodes()) {
    throw std::invalid_argument("field length does not match mesh node count");
  }
}

Field Field::zeros(std::shared_ptr<const StructuredMesh> mesh) {
  const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
  return Field(std::move(mesh), Vector::Zero(n));
}

Field Field::interpolate(std::shared_ptr<const StructuredMesh> mesh,
                         const std::function<double(const Point&)>& fn) {
  Vector v(static_cast<Eigen::Index>(mesh->num_nodes()));
  for (std::size_t i = 0; i < mesh->num_nodes(); ++i) v[static_cast<Eigen::Index>(i)] = fn(mesh->node(i));
  return Field(std::move(mesh), std::move(v));
}

void write_field_csv(const Field& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "node_index,x,y,value\n";
  char line[128];
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Point& p = field.mesh().node(i);
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", i, p.x, p.y,
                  field.values()[static_cast<Eigen::Index>(i)]);
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Field read_field_csv(std::shared_ptr<const StructuredMesh> mesh, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "node_index,x,y,value") throw std::runtime_error(path.string() + ": bad header");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(mesh->num_nodes()));
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t idx = 0;
    double x = 0, y = 0, value = 0;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &idx, &x, &y, &value) != 4 ||
        idx >= mesh->num_nodes()) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    const Point& p = mesh->node(idx);
    if (std::abs(p.x - x) > 1e-12 || std::abs(p.y - y) > 1e-12) {
      throw std::runtime_error(path.string() + ": node coordinates do not match the mesh");
    }
    v[static_cast<Eigen::Index>(idx)] = value;
    ++rows;
  }
  if (rows != mesh->num_nodes()) throw std::runtime_error(path.string() + ": wrong number of rows");
  return Field(std::move(mesh), std::move(v));
}

}  // namespace goalcal::fem
