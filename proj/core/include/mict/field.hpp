#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mict/geometry.hpp"

namespace mict {

using Index3 = std::array<int, 3>;

inline constexpr std::size_t kDefaultVoxelCap = std::size_t{512} * 512 * 512;

// Regular voxel lattice. Geometry is in mm; `origin` is the world position of
// the centre of voxel (0,0,0).
struct GridSpec {
  Index3 dims{2, 2, 2};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  Index3 coords(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
            static_cast<int>(idx / (nx * ny))};
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  Vec3 world(int i, int j, int k) const {
    return {origin[0] + spacing[0] * i, origin[1] + spacing[1] * j, origin[2] + spacing[2] * k};
  }
  Vec3 world(std::size_t idx) const {
    const auto c = coords(idx);
    return world(c[0], c[1], c[2]);
  }
  // Fractional voxel coordinates of a world point.
  Vec3 continuous_index(const Vec3& p) const {
    return {(p[0] - origin[0]) / spacing[0], (p[1] - origin[1]) / spacing[1],
            (p[2] - origin[2]) / spacing[2]};
  }
  // True when p lies in the box spanned by the first and last voxel centres.
  bool contains(const Vec3& p) const;
  double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }
  double voxel_volume_m3() const { return voxel_volume_mm3() * 1e-9; }

  void validate(std::size_t voxel_cap = kDefaultVoxelCap) const;

  bool operator==(const GridSpec&) const = default;
};

enum class Unit {
  Kelvin,
  WattPerCubicMetre,
  Volt,
  VoltPerMetre,
  SiemensPerMetre,
  Dimensionless,
};

const char* to_string(Unit unit);

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(const GridSpec& grid, Unit unit, double fill = 0.0);
  ScalarField(const GridSpec& grid, Unit unit, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  Unit unit() const { return unit_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t idx) const { return values_[idx]; }
  double& operator[](std::size_t idx) { return values_[idx]; }
  double at(int i, int j, int k) const { return values_[grid_.index(i, j, k)]; }
  double& at(int i, int j, int k) { return values_[grid_.index(i, j, k)]; }

  double min() const;
  double max() const;
  bool all_finite() const;

  bool operator==(const ScalarField&) const = default;

 private:
  GridSpec grid_;
  Unit unit_ = Unit::Dimensionless;
  std::vector<double> values_;
};

using Legend = std::map<std::uint8_t, std::string>;

// Region labels. Id 0 is always the background.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(const GridSpec& grid, Legend legend);
  LabelMask(const GridSpec& grid, std::vector<std::uint8_t> labels, Legend legend);

  // Binary mask with legend {0: background, 1: name}.
  static LabelMask binary(const GridSpec& grid, const std::string& name = "lesion");

  const GridSpec& grid() const { return grid_; }
  const Legend& legend() const { return legend_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  std::uint8_t operator[](std::size_t idx) const { return labels_[idx]; }
  void set(std::size_t idx, std::uint8_t id);
  std::uint8_t at(int i, int j, int k) const { return labels_[grid_.index(i, j, k)]; }

  std::size_t count(std::uint8_t id) const;
  std::size_t count_nonzero() const;
  bool empty() const { return count_nonzero() == 0; }

  bool operator==(const LabelMask&) const = default;

 private:
  void check_legend() const;

  GridSpec grid_;
  std::vector<std::uint8_t> labels_;
  Legend legend_;
};

// Voxel indices whose centres lie in the flat-capped cylinder of `radius_mm`
// around the segment [tip - active_length_mm * direction, tip], plus the
// voxel nearest each point of the segment inside the grid. Sorted, unique.
std::vector<std::size_t> probe_voxels(const GridSpec& grid, const Probe& probe, double radius_mm,
                                      double active_length_mm);

// Distance (mm) from point p to the probe's active segment.
double distance_to_probe_axis(const Probe& probe, double active_length_mm, const Vec3& p);

}  // namespace mict
