#pragma once

#include <span>
#include <vector>

#include "mict/field.hpp"

namespace mict {

// Finite-volume form of div(k grad .) on the 7-point stencil. Face
// conductivities are harmonic means of the two adjacent cells; faces on the
// domain shell carry no flux. Coefficients are stored per unit cell volume
// (k_face / h^2 in SI, with h in metres), so apply() returns W/m^3 for a
// temperature input in K and a conductivity in W/m/K.
class DiffusionOperator {
 public:
  DiffusionOperator() = default;
  explicit DiffusionOperator(const ScalarField& conductivity);

  const GridSpec& grid() const { return grid_; }

  // Coupling between voxel idx and its +x / +y / +z neighbour. Zero on the
  // last layer along that axis.
  double gx(std::size_t idx) const { return gx_[idx]; }
  double gy(std::size_t idx) const { return gy_[idx]; }
  double gz(std::size_t idx) const { return gz_[idx]; }
  // Sum of the couplings of voxel idx to all its neighbours.
  double diagonal(std::size_t idx) const { return diag_[idx]; }

  void apply(std::span<const double> x, std::span<double> y) const;

  // Neighbour list used by callers that need explicit stencil access.
  template <typename Fn>
  void for_each_neighbour(std::size_t idx, Fn&& fn) const {
    const auto c = grid_.coords(idx);
    const std::size_t sx = 1, sy = grid_.dims[0], sz = sy * grid_.dims[1];
    if (c[0] + 1 < grid_.dims[0]) fn(idx + sx, gx_[idx]);
    if (c[0] > 0) fn(idx - sx, gx_[idx - sx]);
    if (c[1] + 1 < grid_.dims[1]) fn(idx + sy, gy_[idx]);
    if (c[1] > 0) fn(idx - sy, gy_[idx - sy]);
    if (c[2] + 1 < grid_.dims[2]) fn(idx + sz, gz_[idx]);
    if (c[2] > 0) fn(idx - sz, gz_[idx - sz]);
  }

 private:
  GridSpec grid_;
  std::vector<double> gx_, gy_, gz_, diag_;
};

double harmonic_mean(double a, double b);

// div(k grad f), zero flux across the domain shell.
ScalarField laplacian(const ScalarField& f, const ScalarField& conductivity);

// Trilinear interpolation; exact at voxel centres. Throws Domain outside the
// box of voxel centres.
double trilinear_sample(const ScalarField& f, const Vec3& p);

// Nearest-neighbour resample of m moved by t. Output voxel x takes the label
// at t^{-1}(x); points falling outside the grid become background.
LabelMask transform_mask(const LabelMask& m, const RigidTransform& t);

}  // namespace mict
