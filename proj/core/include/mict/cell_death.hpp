#pragma once

#include <vector>

#include "mict/field.hpp"
#include "mict/mesh.hpp"

namespace mict {

// Alive / Vulnerable / Dead fractions per voxel.
struct CellStateField {
  ScalarField alive;
  ScalarField vulnerable;
  ScalarField dead;

  static CellStateField initial(const GridSpec& grid, double vulnerable_fraction = 0.01);
  const GridSpec& grid() const { return alive.grid(); }
  // max |A + V + D - 1| over all voxels.
  double conservation_error() const;
};

struct DeathModelParams {
  double forward_rate;       // k_f scale, 1/s
  double backward_rate;      // k_b, 1/s
  double temperature_scale;  // T_k, K
  double threshold = 0.8;

  // Literature fixture constants for the kelvin form of the rate law.
  static DeathModelParams fixture();
  void validate() const;
};

struct CellState {
  double alive;
  double vulnerable;
  double dead;
};

// Integrates dA/dt = -k_f A + k_b V, dD/dt = k_f V with
// k_f = k_f_scale exp(T / T_k) (1 - A), holding T fixed over dt. Explicit
// RK2 sub-steps sized so that the largest rate times the sub-step is <= 0.1.
// Past 400 such sub-steps the voxel is stiff and 400 linearly implicit
// sub-steps are used instead; both conserve A + V + D and never lower D.
CellState step_cell(const CellState& s, double temperature, const DeathModelParams& params, double dt);

CellStateField step_death(const CellStateField& cells, const ScalarField& temperature, const DeathModelParams& params,
                          double dt);
// In place form of step_death.
void advance_death(CellStateField& cells, const ScalarField& temperature, const DeathModelParams& params, double dt);

struct Lesion {
  LabelMask mask;
  TriangleMesh surface;
  double mask_volume_ml = 0.0;
  double surface_volume_ml = 0.0;
  bool empty = true;
};

// Superlevel set {f >= threshold} as mask and surface. Used for the damage
// field (cell death) and the field maximum (IRE).
Lesion extract_superlevel(const ScalarField& f, double threshold);
Lesion extract_lesion(const CellStateField& cells, double threshold);
// Lesion from a binary mask (cryo isotherm rule); surface at iso 0.5.
Lesion lesion_from_mask(const LabelMask& mask);

// True iff D never decreases (tolerance 1e-9) between consecutive fields.
bool dead_fraction_monotone_check(const std::vector<ScalarField>& history);

}  // namespace mict
