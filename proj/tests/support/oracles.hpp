#pragma once

// Independent reference computations the solver code is checked against.
// None of these call the code under test beyond plain data types.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mict/field.hpp"
#include "mict/mesh.hpp"

namespace oracle {

using mict::GridSpec;
using mict::operator+;
using mict::operator-;
using mict::operator*;

inline double harmonic(double a, double b) { return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

// Face coupling k_face / h^2 (SI) between two neighbours along `axis`.
inline double coupling(const std::vector<double>& k, const GridSpec& g, std::size_t a, std::size_t b, int axis) {
  const double h = g.spacing[axis] * 1e-3;
  return harmonic(k[a], k[b]) / (h * h);
}

// Explicit matrix of div(k grad .) with zero flux on the shell.
inline Eigen::MatrixXd dense_laplacian(const GridSpec& g, const std::vector<double>& k) {
  const auto n = static_cast<Eigen::Index>(g.voxel_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int kk = 0; kk < g.dims[2]; ++kk)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const std::size_t a = g.index(i, j, kk);
        const int c[3] = {i, j, kk};
        for (int axis = 0; axis < 3; ++axis)
          for (int s : {-1, 1}) {
            int d[3] = {c[0], c[1], c[2]};
            d[axis] += s;
            if (!g.in_bounds(d[0], d[1], d[2])) continue;
            const std::size_t b = g.index(d[0], d[1], d[2]);
            const double w = coupling(k, g, a, b, axis);
            m(a, b) += w;
            m(a, a) -= w;
          }
      }
  return m;
}

// Dense direct solve of div(sigma grad phi) = 0 with phi = u on `anode`,
// 0 on `cathode` and zero flux on the shell.
inline std::vector<double> dense_potential(const GridSpec& g, const std::vector<double>& sigma,
                                           const std::vector<std::size_t>& anode,
                                           const std::vector<std::size_t>& cathode, double u) {
  const std::size_t n = g.voxel_count();
  std::vector<double> fixed(n, std::nan(""));
  for (auto i : anode) fixed[i] = u;
  for (auto i : cathode) fixed[i] = 0.0;
  std::vector<Eigen::Index> slot(n, -1);
  Eigen::Index m = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(fixed[i])) slot[i] = m++;
  const Eigen::MatrixXd full = dense_laplacian(g, sigma);
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < n; ++i) {
    if (slot[i] < 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = -full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v == 0.0) continue;
      if (slot[j] >= 0) a(slot[i], slot[j]) = v;
      else rhs[slot[i]] -= v * fixed[j];
    }
  }
  const Eigen::VectorXd x = a.llt().solve(rhs);
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = slot[i] >= 0 ? x[slot[i]] : fixed[i];
  return phi;
}

// Dead fraction after holding temperature t for `duration` s, integrated with
// `substeps` classical RK4 steps of the three-state kinetics.
inline double reference_dead_fraction(double temperature, double duration, double kf_scale, double kb, double tk,
                                      double a0, double v0, long substeps) {
  const double s = kf_scale * std::exp(temperature / tk);
  auto f = [&](double a, double d, double& da, double& dd) {
    const double v = 1.0 - a - d;
    const double kf = s * (1.0 - a);
    da = -kf * a + kb * v;
    dd = kf * v;
  };
  double a = a0, d = 1.0 - a0 - v0;
  const double h = duration / static_cast<double>(substeps);
  for (long i = 0; i < substeps; ++i) {
    double a1, d1, a2, d2, a3, d3, a4, d4;
    f(a, d, a1, d1);
    f(a + 0.5 * h * a1, d + 0.5 * h * d1, a2, d2);
    f(a + 0.5 * h * a2, d + 0.5 * h * d2, a3, d3);
    f(a + h * a3, d + h * d3, a4, d4);
    a += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
    d += h / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4);
  }
  return d;
}

// Two-phase Neumann similarity constant: front X(t) = 2 lambda sqrt(alpha_s t)
// for a half space at t_init frozen from a wall at t_wall, freezing at t_f.
// Densities equal in both phases. Bisection on the Stefan condition.
struct NeumannProblem {
  double rho, latent;
  double k_s, c_s, k_l, c_l;
  double t_wall, t_f, t_init;
  double alpha_s() const { return k_s / (rho * c_s); }
  double alpha_l() const { return k_l / (rho * c_l); }
};

inline double neumann_lambda(const NeumannProblem& p) {
  const double as = p.alpha_s(), al = p.alpha_l();
  const double nu = std::sqrt(as / al);
  auto g = [&](double lam) {
    const double solid = p.k_s * (p.t_f - p.t_wall) * std::exp(-lam * lam) / (std::erf(lam) * std::sqrt(std::numbers::pi * as));
    const double liquid = p.k_l * (p.t_init - p.t_f) * std::exp(-lam * lam * nu * nu) /
                          (std::erfc(lam * nu) * std::sqrt(std::numbers::pi * al));
    return solid - liquid - p.rho * p.latent * lam * std::sqrt(as);
  };
  double lo = 1e-9, hi = 5.0;
  if (g(lo) <= 0.0 || g(hi) >= 0.0) throw std::runtime_error("Neumann root not bracketed");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Quadratic scan: area-weighted mean distance from the triangle centroids of
// s to the nearest triangle of sigma.
inline double brute_alpha(const mict::TriangleMesh& s, const mict::TriangleMesh& sigma) {
  double num = 0.0, den = 0.0;
  for (const auto& f : s.faces) {
    const auto& a = s.vertices[f[0]];
    const auto& b = s.vertices[f[1]];
    const auto& c = s.vertices[f[2]];
    const double area = 0.5 * mict::norm(mict::cross(b - a, c - a));
    const mict::Vec3 centroid = (1.0 / 3.0) * (a + b + c);
    double best = 1e300;
    for (const auto& g : sigma.faces)
      best = std::min(best, mict::point_triangle_distance(centroid, sigma.vertices[g[0]], sigma.vertices[g[1]],
                                                          sigma.vertices[g[2]]));
    num += best * area;
    den += area;
  }
  return num / den;
}

// |S n Sigma| / |S| by explicit set intersection of voxel coordinates.
inline double brute_overlap(const mict::LabelMask& s, const mict::LabelMask& sigma) {
  std::set<std::array<int, 3>> in_s, in_sigma;
  const auto& g = s.grid();
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (s.at(i, j, k)) in_s.insert({i, j, k});
        if (sigma.at(i, j, k)) in_sigma.insert({i, j, k});
      }
  std::vector<std::array<int, 3>> both;
  std::set_intersection(in_s.begin(), in_s.end(), in_sigma.begin(), in_sigma.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(in_s.size());
}

// Manufactured azimuthal field H = r exp(-(r^2 + (z - zc)^2) / w^2) and the
// forcing that the homogeneous operator
//   (1/e) [d/dr (1/r d(r H)/dr) + d2H/dz2] + k0^2 H
// maps it to. All lengths in metres.
struct Manufactured {
  double zc, w;
  double h(double r, double z) const { return r * std::exp(-(r * r + (z - zc) * (z - zc)) / (w * w)); }
  template <typename C>
  C forcing(double r, double z, C eps, double k0sq) const {
    const double w2 = w * w;
    const double g = std::exp(-(r * r + (z - zc) * (z - zc)) / w2);
    const double radial = -(4.0 * r / w2) * (2.0 - r * r / w2) * g;
    const double axial = r * (-2.0 / w2 + 4.0 * (z - zc) * (z - zc) / (w2 * w2)) * g;
    return (radial + axial) / eps + k0sq * r * g;
  }
};

}  // namespace oracle
