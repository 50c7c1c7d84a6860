#include "mict/cell_death.hpp"

#include <algorithm>
#include <cmath>

#include "mict/error.hpp"

namespace mict {

CellStateField CellStateField::initial(const GridSpec& grid, double vulnerable_fraction) {
  if (!(vulnerable_fraction >= 0.0 && vulnerable_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "vulnerable fraction must lie in [0, 1]");
  return {ScalarField(grid, Unit::Dimensionless, 1.0 - vulnerable_fraction),
          ScalarField(grid, Unit::Dimensionless, vulnerable_fraction), ScalarField(grid, Unit::Dimensionless, 0.0)};
}

double CellStateField::conservation_error() const {
  double err = 0.0;
  for (std::size_t i = 0; i < alive.size(); ++i)
    err = std::max(err, std::abs(alive[i] + vulnerable[i] + dead[i] - 1.0));
  return err;
}

DeathModelParams DeathModelParams::fixture() {
  return {3.33e-3 * std::exp(-273.15 / 40.5), 7.77e-3, 40.5, 0.8};
}

void DeathModelParams::validate() const {
  if (!(forward_rate >= 0.0) || !(backward_rate >= 0.0) || !(temperature_scale > 0.0))
    throw Error(ErrorCode::InvalidArgument, "death model rates must be non-negative and T_k positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "lesion threshold must lie in (0, 1)");
}

namespace {

struct Rates {
  double da, dd;
};

Rates rates(double a, double v, double scale, double kb) {
  const double kf = std::max(0.0, scale * (1.0 - a));
  return {-kf * a + kb * v, kf * v};
}

constexpr int kMaxExplicitSubsteps = 400;

}  // namespace

CellState step_cell(const CellState& s, double temperature, const DeathModelParams& p, double dt) {
  if (!(dt > 0.0)) return s;
  const double scale = p.forward_rate * std::exp(std::min(temperature, 2000.0) / p.temperature_scale);
  const double bound = scale + p.backward_rate;
  const int n = bound > 0.0 ? std::max(1, static_cast<int>(std::ceil(dt * bound / 0.1))) : 1;
  double a = s.alive, d = s.dead;
  if (n > kMaxExplicitSubsteps) {
    // Stiff: linearly implicit sub-steps with k_f frozen at the start of each.
    const double h = dt / kMaxExplicitSubsteps;
    for (int i = 0; i < kMaxExplicitSubsteps; ++i) {
      const double v0 = std::max(0.0, 1.0 - a - d);
      const double kf = std::max(0.0, scale * (1.0 - a));
      const double a11 = 1.0 + h * kf, a12 = -h * p.backward_rate;
      const double a21 = -h * kf, a22 = 1.0 + h * (p.backward_rate + kf);
      const double det = a11 * a22 - a12 * a21;
      const double an = (a * a22 - a12 * v0) / det;
      const double vn = (a11 * v0 - a21 * a) / det;
      d = std::clamp(d + h * kf * vn, d, 1.0);
      a = std::clamp(an, 0.0, 1.0 - d);
    }
    return {a, 1.0 - a - d, d};
  }
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const double v = 1.0 - a - d;
    const Rates k1 = rates(a, v, scale, p.backward_rate);
    const double a1 = a + h * k1.da, d1 = d + h * k1.dd;
    const Rates k2 = rates(a1, 1.0 - a1 - d1, scale, p.backward_rate);
    const double d_prev = d;
    a += 0.5 * h * (k1.da + k2.da);
    d = std::clamp(d + 0.5 * h * (k1.dd + k2.dd), d_prev, 1.0);
    a = std::clamp(a, 0.0, 1.0 - d);
  }
  return {a, 1.0 - a - d, d};
}

void advance_death(CellStateField& cells, const ScalarField& temperature, const DeathModelParams& params, double dt) {
  if (!(temperature.grid() == cells.grid())) throw Error(ErrorCode::ShapeMismatch, "cell state and temperature grids differ");
  for (std::size_t i = 0; i < temperature.size(); ++i) {
    const CellState s = step_cell({cells.alive[i], cells.vulnerable[i], cells.dead[i]}, temperature[i], params, dt);
    cells.alive[i] = s.alive;
    cells.vulnerable[i] = s.vulnerable;
    cells.dead[i] = s.dead;
  }
}

CellStateField step_death(const CellStateField& cells, const ScalarField& temperature, const DeathModelParams& params,
                          double dt) {
  CellStateField out = cells;
  advance_death(out, temperature, params, dt);
  return out;
}

Lesion extract_superlevel(const ScalarField& f, double threshold) {
  Lesion l;
  l.mask = LabelMask::binary(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] >= threshold) l.mask.set(i, 1);
  const std::size_t n = l.mask.count_nonzero();
  l.empty = n == 0;
  l.mask_volume_ml = static_cast<double>(n) * f.grid().voxel_volume_mm3() * 1e-3;
  if (!l.empty) {
    // Padding value strictly below the threshold closes surfaces at the shell.
    const double outside = std::min(f.min(), threshold) - 1.0;
    l.surface = iso_surface(f, threshold, outside);
    l.surface_volume_ml = l.surface.enclosed_volume() * 1e-3;
  }
  return l;
}

Lesion extract_lesion(const CellStateField& cells, double threshold) { return extract_superlevel(cells.dead, threshold); }

Lesion lesion_from_mask(const LabelMask& mask) {
  Lesion l;
  l.mask = LabelMask::binary(mask.grid());
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) l.mask.set(i, 1);
  const std::size_t n = l.mask.count_nonzero();
  l.empty = n == 0;
  l.mask_volume_ml = static_cast<double>(n) * mask.grid().voxel_volume_mm3() * 1e-3;
  if (!l.empty) {
    l.surface = mask_surface(l.mask);
    l.surface_volume_ml = l.surface.enclosed_volume() * 1e-3;
  }
  return l;
}

bool dead_fraction_monotone_check(const std::vector<ScalarField>& history) {
  for (std::size_t s = 1; s < history.size(); ++s) {
    const auto& prev = history[s - 1];
    const auto& cur = history[s];
    if (!(prev.grid() == cur.grid())) return false;
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (cur[i] < prev[i] - 1e-9) return false;
  }
  return true;
}

}  // namespace mict
