// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "goalcal/goal/model_pair.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace goalcal::checks {

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

/// Zeroes the entries where the mask is set.
inline void clear(Vector& v, const std::vector<bool>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) v[static_cast<Eigen::Index>(i)] = 0.0;
  }
}

/// Log-log slope of |[B(u + h v) - B(u)] / h - B'(u; v)| over h = 1e-1 .. 1e-3.
inline double forward_difference_slope(const goal::ModelPair& pair, const Vector& u, const Vector& v) {
  const Vector exact = pair.fine_tangent(u, v);
  const Vector base = pair.fine_form(u);
  std::vector<double> lh, le;
  for (double h : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    const Vector fd = (pair.fine_form(u + h * v) - base) / h;
    lh.push_back(std::log(h));
    le.push_back(std::log((fd - exact).norm()));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lh.size(); ++i) mx += lh[i], my += le[i];
  mx /= lh.size();
  my /= le.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lh.size(); ++i) sxy += (lh[i] - mx) * (le[i] - my), sxx += (lh[i] - mx) * (lh[i] - mx);
  return sxy / sxx;
}

inline double relative(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

/// Checks shared by every pair: second derivative by central differences,
/// transpose identities, and the shifted tangent solves.
struct DerivativeReport {
  double second_fd = 0.0;
  double tangent_transpose = 0.0;
  double second_transpose = 0.0;
  double second_symmetry = 0.0;
  double tangent_solve = 0.0;
  double tangent_adjoint_solve = 0.0;
};

inline DerivativeReport check_derivatives(const goal::ModelPair& p, const Vector& u, const Vector& v,
                                          const Vector& q, const Vector& w) {
  DerivativeReport r;
  const double h = 1e-5;
  const Vector s = p.fine_second(u, q, v);
  r.second_fd = relative((p.fine_tangent(u + h * q, v) - p.fine_tangent(u - h * q, v)) / (2 * h), s);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  r.tangent_transpose = rel(p.fine_tangent(u, v).dot(w), p.fine_tangent_transpose(u, w).dot(v));
  r.second_transpose = rel(s.dot(w), p.fine_second_transpose(u, q, w).dot(v));
  r.second_symmetry = rel(s.dot(w), p.fine_second(u, v, q).dot(w));
  const Vector x = p.solve_tangent(u, &q, w);
  r.tangent_solve = relative(p.fine_tangent(u, x) + p.fine_second(u, q, x), w);
  const Vector y = p.solve_tangent_adjoint(u, &q, w);
  r.tangent_adjoint_solve = relative(p.fine_tangent_transpose(u, y) + p.fine_second_transpose(u, q, y), w);
  return r;
}

}  // namespace goalcal::checks
