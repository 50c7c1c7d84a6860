#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mict/equipment.hpp"
#include "mict/field.hpp"

namespace mict {

// ---- RFA ----

struct RfaSourceSpec {
  std::vector<Vec3> points;     // mm
  double width = 2.0;           // sigma, mm
  double power = 0.0;           // W
  std::vector<double> weights;  // empty means uniform

  void validate() const;
};

// Tine points of a probe from its equipment layout; a single point at the
// tip when the equipment lists none.
std::vector<Vec3> tine_points(const Probe& probe, const EquipmentDef* equipment);

// Q(x) = sum_i w_i P (2 pi s^2)^{-3/2} exp(-|x - c_i|^2 / (2 s^2)) in W/m^3.
// Throws Domain when a point lies outside the grid.
ScalarField rfa_source(const RfaSourceSpec& spec, const GridSpec& grid);

// ---- MWA ----

using Complex = std::complex<double>;

// Vertex lattice on the (r, z) half plane of a probe: node (i, j) sits at
// r = i h, z = z0 + j h (mm, z along the probe direction, 0 at the tip).
struct RzGrid {
  double h = 0.5;  // mm
  int nr = 60;     // last radial node index
  int nz = 130;    // last axial node index
  double z0 = -45.0;

  std::size_t size() const { return static_cast<std::size_t>(nr + 1) * (nz + 1); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(nr + 1) * j; }
  double r(int i) const { return i * h; }
  double z(int j) const { return z0 + j * h; }
};

struct MwaAntennaSpec {
  double frequency = 2.45e9;       // Hz
  double power = 0.0;              // W at the generator
  double slot_offset = 5.0;        // mm behind the tip
  double slot_width = 1.0;         // mm
  double probe_radius = 1.0;       // mm, radius of the ring source
  double resolution = 0.5;         // mm
  double radius = 30.0;            // mm, outer r of the half plane
  double behind = 45.0;            // mm behind the tip
  double ahead = 20.0;             // mm ahead of the tip
  double reflected_fraction = 0.0; // of the input power

  void validate() const;
  RzGrid grid() const;
};

EmPoint em_params_at(double temperature, const EmTable& table);

// eps_r - j sigma / (omega eps0)
Complex complex_permittivity(double relative_permittivity, double conductivity, double frequency);

// Solves d/dr((1/(e r)) d(rH)/dr) + d/dz((1/e) dH/dz) + k0^2 H = f for the
// azimuthal magnetic field, H = 0 on the axis and first-order absorbing
// conditions on the outer edges. Throws SolverError if the factorization fails.
std::vector<Complex> solve_axisymmetric_h(const RzGrid& grid, double frequency, std::span<const Complex> eps_c,
                                          std::span<const Complex> forcing);

struct RzField {
  std::vector<Complex> er;
  std::vector<Complex> ez;
};

RzField electric_field(const RzGrid& grid, double frequency, std::span<const Complex> eps_c,
                       std::span<const Complex> h);

// 0.5 sigma |E|^2 per node.
std::vector<double> sar_from_field(const RzField& e, std::span<const double> sigma);

// 2 pi * integral of f r dr dz over the half plane, in SI, taken exactly for
// the bilinear interpolant that revolve() samples.
double revolved_integral(const RzGrid& grid, std::span<const double> f);

struct MwaSolution {
  RzGrid grid;
  std::vector<double> sar;  // W/m^3 per node
  std::vector<Complex> h;
  double input_power = 0.0;
  double reflected_power = 0.0;
  double deposited_power = 0.0;  // revolved SAR integral
};

// Ring-slot source, field solve and SAR scaled so the revolved deposited
// power equals power * (1 - reflected_fraction).
MwaSolution mwa_sar(const MwaAntennaSpec& spec, std::span<const double> permittivity,
                    std::span<const double> conductivity);

// Bilinear (r, z) lookup of an axisymmetric field about the probe axis; zero
// outside the half plane.
ScalarField revolve(const RzGrid& rz, std::span<const double> f, const GridSpec& grid, const Probe& probe,
                    Unit unit = Unit::WattPerCubicMetre);

// World position (mm) of node (r, z) in the plane spanned by the probe axis
// and the first perpendicular basis vector.
Vec3 rz_world(const Probe& probe, double r, double z);

}  // namespace mict
