#include "mict/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mict/error.hpp"

namespace mict {

bool GridSpec::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    const double lo = origin[a];
    const double hi = origin[a] + spacing[a] * (dims[a] - 1);
    const double eps = 1e-9 * spacing[a];
    if (!(p[a] >= lo - eps && p[a] <= hi + eps)) return false;
  }
  return true;
}

void GridSpec::validate(std::size_t voxel_cap) const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw Error(ErrorCode::InvalidArgument, "grid dims must all be >= 2");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive and finite");
    if (!std::isfinite(origin[a])) throw Error(ErrorCode::InvalidArgument, "grid origin must be finite");
  }
  if (voxel_count() > voxel_cap) {
    std::ostringstream os;
    os << "grid has " << voxel_count() << " voxels, above the cap of " << voxel_cap;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
}

const char* to_string(Unit unit) {
  switch (unit) {
    case Unit::Kelvin: return "K";
    case Unit::WattPerCubicMetre: return "W/m^3";
    case Unit::Volt: return "V";
    case Unit::VoltPerMetre: return "V/m";
    case Unit::SiemensPerMetre: return "S/m";
    case Unit::Dimensionless: return "1";
  }
  return "?";
}

ScalarField::ScalarField(const GridSpec& grid, Unit unit, double fill)
    : grid_(grid), unit_(unit), values_(grid.voxel_count(), fill) {
  if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidArgument, "field fill value is not finite");
}

ScalarField::ScalarField(const GridSpec& grid, Unit unit, std::vector<double> values)
    : grid_(grid), unit_(unit), values_(std::move(values)) {
  if (values_.size() != grid_.voxel_count())
    throw Error(ErrorCode::ShapeMismatch, "field value count does not match grid");
  if (!all_finite()) throw Error(ErrorCode::InvalidArgument, "field contains non-finite values");
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

LabelMask::LabelMask(const GridSpec& grid, Legend legend)
    : grid_(grid), labels_(grid.voxel_count(), 0), legend_(std::move(legend)) {
  legend_.try_emplace(0, "background");
}

LabelMask::LabelMask(const GridSpec& grid, std::vector<std::uint8_t> labels, Legend legend)
    : grid_(grid), labels_(std::move(labels)), legend_(std::move(legend)) {
  if (labels_.size() != grid_.voxel_count())
    throw Error(ErrorCode::ShapeMismatch, "label count does not match grid");
  legend_.try_emplace(0, "background");
  check_legend();
}

LabelMask LabelMask::binary(const GridSpec& grid, const std::string& name) {
  return LabelMask(grid, Legend{{0, "background"}, {1, name}});
}

void LabelMask::set(std::size_t idx, std::uint8_t id) {
  if (!legend_.contains(id))
    throw Error(ErrorCode::InvalidArgument, "label id " + std::to_string(id) + " is not in the legend");
  labels_[idx] = id;
}

void LabelMask::check_legend() const {
  std::array<bool, 256> seen{};
  for (auto id : labels_) seen[id] = true;
  for (int id = 0; id < 256; ++id)
    if (seen[id] && !legend_.contains(static_cast<std::uint8_t>(id)))
      throw Error(ErrorCode::InvalidArgument, "label id " + std::to_string(id) + " is not in the legend");
}

std::size_t LabelMask::count(std::uint8_t id) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), id));
}

std::size_t LabelMask::count_nonzero() const { return labels_.size() - count(0); }

double distance_to_probe_axis(const Probe& probe, double active_length_mm, const Vec3& p) {
  const Vec3 rel = p - probe.tip;
  const double s = std::clamp(dot(rel, probe.direction), -active_length_mm, 0.0);
  return norm(rel - s * probe.direction);
}

std::vector<std::size_t> probe_voxels(const GridSpec& grid, const Probe& probe, double radius_mm,
                                      double active_length_mm) {
  std::vector<std::size_t> out;
  const Vec3 base = probe.tip - active_length_mm * probe.direction;
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::min(base[a], probe.tip[a]) - radius_mm;
    hi[a] = std::max(base[a], probe.tip[a]) + radius_mm;
  }
  const Vec3 ilo = grid.continuous_index(lo);
  const Vec3 ihi = grid.continuous_index(hi);
  int b0[3], b1[3];
  for (int a = 0; a < 3; ++a) {
    b0[a] = std::max(0, static_cast<int>(std::floor(ilo[a])));
    b1[a] = std::min(grid.dims[a] - 1, static_cast<int>(std::ceil(ihi[a])));
  }
  for (int k = b0[2]; k <= b1[2]; ++k)
    for (int j = b0[1]; j <= b1[1]; ++j)
      for (int i = b0[0]; i <= b1[0]; ++i) {
        const Vec3 rel = grid.world(i, j, k) - probe.tip;
        const double s = dot(rel, probe.direction);
        if (s > 1e-9 || s < -active_length_mm - 1e-9) continue;
        if (norm(rel - s * probe.direction) <= radius_mm + 1e-9) out.push_back(grid.index(i, j, k));
      }
  // A probe thinner than the voxels still owns the voxels its axis runs through.
  const double step = 0.5 * std::min({grid.spacing[0], grid.spacing[1], grid.spacing[2]});
  const int samples = static_cast<int>(std::ceil(active_length_mm / step));
  for (int n = 0; n <= samples; ++n) {
    const Vec3 q = probe.tip - std::min(active_length_mm, n * step) * probe.direction;
    if (!grid.contains(q)) continue;
    const Vec3 c = grid.continuous_index(q);
    int idx[3];
    for (int a = 0; a < 3; ++a) idx[a] = std::clamp(static_cast<int>(std::lround(c[a])), 0, grid.dims[a] - 1);
    out.push_back(grid.index(idx[0], idx[1], idx[2]));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace mict
