#include "mict/sources.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "mict/error.hpp"

namespace mict {

namespace {
constexpr double kEps0 = 8.8541878128e-12;
constexpr double kMu0 = 1.25663706212e-6;
}  // namespace

void RfaSourceSpec::validate() const {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "RFA source needs at least one point");
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "RFA Gaussian width must be positive");
  if (!(power >= 0.0) || !std::isfinite(power)) throw Error(ErrorCode::InvalidArgument, "RFA power must be non-negative");
  if (!weights.empty()) {
    if (weights.size() != points.size()) throw Error(ErrorCode::InvalidArgument, "one weight per RFA point");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "RFA weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "RFA weights must sum to 1");
  }
}

std::vector<Vec3> tine_points(const Probe& probe, const EquipmentDef* equipment) {
  if (!equipment || equipment->tines.empty()) return {probe.tip};
  const auto basis = perpendicular_basis(probe.direction);
  std::vector<Vec3> out;
  for (const auto& t : equipment->tines) {
    const double a = t.angle_deg * std::numbers::pi / 180.0;
    out.push_back(probe.tip + t.axial * probe.direction + (t.radial * std::cos(a)) * basis[0] +
                  (t.radial * std::sin(a)) * basis[1]);
  }
  return out;
}

ScalarField rfa_source(const RfaSourceSpec& spec, const GridSpec& grid) {
  spec.validate();
  for (const auto& p : spec.points)
    if (!grid.contains(p)) throw Error(ErrorCode::Domain, "RFA source point outside the grid");
  const std::size_t n = spec.points.size();
  const double s = spec.width * 1e-3;
  const double peak = spec.power * std::pow(2.0 * std::numbers::pi * s * s, -1.5);
  const double inv = 1.0 / (2.0 * spec.width * spec.width);
  ScalarField q(grid, Unit::WattPerCubicMetre);
  for (std::size_t idx = 0; idx < q.size(); ++idx) {
    const Vec3 x = grid.world(idx);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 d = x - spec.points[i];
      const double w = spec.weights.empty() ? 1.0 / static_cast<double>(n) : spec.weights[i];
      acc += w * std::exp(-dot(d, d) * inv);
    }
    q[idx] = peak * acc;
  }
  return q;
}

void MwaAntennaSpec::validate() const {
  if (!(frequency > 0.0)) throw Error(ErrorCode::InvalidArgument, "MWA frequency must be positive");
  if (!(power >= 0.0)) throw Error(ErrorCode::InvalidArgument, "MWA power must be non-negative");
  if (!(resolution > 0.0) || !(radius > 2 * resolution) || !(behind >= 0.0) || !(ahead >= 0.0) ||
      !(behind + ahead > 2 * resolution))
    throw Error(ErrorCode::InvalidArgument, "MWA r-z domain is degenerate");
  if (!(slot_width > 0.0) || !(probe_radius >= 0.0) || probe_radius >= radius)
    throw Error(ErrorCode::InvalidArgument, "MWA slot geometry is invalid");
  if (!(reflected_fraction >= 0.0 && reflected_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "reflected fraction must lie in [0, 1)");
}

RzGrid MwaAntennaSpec::grid() const {
  RzGrid g;
  g.h = resolution;
  g.nr = static_cast<int>(std::ceil(radius / resolution - 1e-9));
  g.nz = static_cast<int>(std::ceil((behind + ahead) / resolution - 1e-9));
  g.z0 = -behind;
  return g;
}

EmPoint em_params_at(double t, const EmTable& table) {
  if (table.empty()) throw Error(ErrorCode::InvalidArgument, "empty EM table");
  if (t <= table.front().temperature) return table.front();
  if (t >= table.back().temperature) return table.back();
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& a = table[i - 1];
    const auto& b = table[i];
    if (t <= b.temperature) {
      const double s = (t - a.temperature) / (b.temperature - a.temperature);
      return {t, a.permittivity + s * (b.permittivity - a.permittivity),
              a.conductivity + s * (b.conductivity - a.conductivity)};
    }
  }
  return table.back();
}

Complex complex_permittivity(double eps_r, double sigma, double frequency) {
  return {eps_r, -sigma / (2.0 * std::numbers::pi * frequency * kEps0)};
}

std::vector<Complex> solve_axisymmetric_h(const RzGrid& g, double frequency, std::span<const Complex> eps,
                                          std::span<const Complex> forcing) {
  if (eps.size() != g.size() || forcing.size() != g.size())
    throw Error(ErrorCode::ShapeMismatch, "r-z inputs do not match the grid");
  const double h = g.h * 1e-3;
  const double big_r = g.r(g.nr) * 1e-3;
  const double k0sq = std::pow(2.0 * std::numbers::pi * frequency, 2) * kEps0 * kMu0;
  const double k0 = std::sqrt(k0sq);
  const int nr = g.nr, nz = g.nz;
  const auto unknown = [nr](int i, int j) { return (i - 1) + nr * j; };
  const int n = nr * (nz + 1);

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 5);
  Eigen::VectorXcd rhs(n);
  const auto inv_eps = [&](int i, int j) { return 1.0 / eps[g.index(i, j)]; };
  for (int j = 0; j <= nz; ++j)
    for (int i = 1; i <= nr; ++i) {
      const int row = unknown(i, j);
      const Complex ie = inv_eps(i, j);
      const Complex kloc = k0 * std::sqrt(eps[g.index(i, j)]);
      Complex diag = k0sq;
      const double ri = i * h;
      // radial: [a_p (r+ H+ - r H) - a_m (r H - r- H-)] / h^2
      const double rm = (i - 0.5) * h;
      const Complex am = 0.5 * (ie + inv_eps(i - 1, j)) / rm;
      diag -= am * ri / (h * h);
      if (i > 1) trip.emplace_back(row, unknown(i - 1, j), am * ((i - 1) * h) / (h * h));
      if (i < nr) {
        const Complex ap = 0.5 * (ie + inv_eps(i + 1, j)) / ((i + 0.5) * h);
        diag -= ap * ri / (h * h);
        trip.emplace_back(row, unknown(i + 1, j), ap * ((i + 1) * h) / (h * h));
      } else {
        // ghost H_{N+1} = H_{N-1} - 2 h beta H_N, beta = jk + 1/(2R)
        const Complex beta = Complex(0.0, 1.0) * kloc + 1.0 / (2.0 * big_r);
        const double rp1 = ri + h;
        const Complex ap = ie / (ri + 0.5 * h);
        diag -= ap * ri / (h * h);
        diag += ap * rp1 * (-2.0 * h * beta) / (h * h);
        if (i > 1) trip.emplace_back(row, unknown(i - 1, j), ap * rp1 / (h * h));
      }
      // axial; the absorbing ghost node folds into the opposite neighbour
      const Complex ghost = Complex(0.0, 1.0) * kloc * (-2.0 * h);
      Complex cp = 0.0, cm = 0.0;
      if (j < nz) {
        const Complex bp = 0.5 * (ie + inv_eps(i, j + 1));
        cp += bp / (h * h);
        diag -= bp / (h * h);
      } else {
        cm += ie / (h * h);
        diag += ie * (ghost - 1.0) / (h * h);
      }
      if (j > 0) {
        const Complex bm = 0.5 * (ie + inv_eps(i, j - 1));
        cm += bm / (h * h);
        diag -= bm / (h * h);
      } else {
        cp += ie / (h * h);
        diag += ie * (ghost - 1.0) / (h * h);
      }
      if (j < nz) trip.emplace_back(row, unknown(i, j + 1), cp);
      if (j > 0) trip.emplace_back(row, unknown(i, j - 1), cm);
      trip.emplace_back(row, row, diag);
      rhs[row] = forcing[g.index(i, j)];
    }
  Eigen::SparseMatrix<Complex> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw SolverError("MWA field factorization failed", 1.0);
  const Eigen::VectorXcd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw SolverError("MWA field solve failed", 1.0);
  const double resid = (a * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
  if (!std::isfinite(resid) || resid > 1e-6) throw SolverError("MWA field solve is inaccurate", resid);
  std::vector<Complex> out(g.size(), 0.0);
  for (int j = 0; j <= nz; ++j)
    for (int i = 1; i <= nr; ++i) out[g.index(i, j)] = x[unknown(i, j)];
  return out;
}

RzField electric_field(const RzGrid& g, double frequency, std::span<const Complex> eps, std::span<const Complex> hf) {
  const double h = g.h * 1e-3;
  const double omega = 2.0 * std::numbers::pi * frequency;
  RzField e{std::vector<Complex>(g.size()), std::vector<Complex>(g.size())};
  const auto H = [&](int i, int j) { return hf[g.index(i, j)]; };
  for (int j = 0; j <= g.nz; ++j)
    for (int i = 0; i <= g.nr; ++i) {
      const std::size_t idx = g.index(i, j);
      const Complex denom = Complex(0.0, omega * kEps0) * eps[idx];
      Complex dz;
      if (j == 0) dz = (H(i, 1) - H(i, 0)) / h;
      else if (j == g.nz) dz = (H(i, j) - H(i, j - 1)) / h;
      else dz = (H(i, j + 1) - H(i, j - 1)) / (2.0 * h);
      Complex curl;
      if (i == 0) curl = 2.0 * H(1, j) / h;
      else if (i == g.nr) curl = (i * h * H(i, j) - (i - 1) * h * H(i - 1, j)) / (h * i * h);
      else curl = ((i + 1) * h * H(i + 1, j) - (i - 1) * h * H(i - 1, j)) / (2.0 * h * i * h);
      e.er[idx] = -dz / denom;
      e.ez[idx] = curl / denom;
    }
  return e;
}

std::vector<double> sar_from_field(const RzField& e, std::span<const double> sigma) {
  if (sigma.size() != e.er.size()) throw Error(ErrorCode::ShapeMismatch, "conductivity does not match the field");
  std::vector<double> sar(sigma.size());
  for (std::size_t i = 0; i < sar.size(); ++i) sar[i] = 0.5 * sigma[i] * (std::norm(e.er[i]) + std::norm(e.ez[i]));
  return sar;
}

double revolved_integral(const RzGrid& g, std::span<const double> f) {
  const double h = g.h * 1e-3;
  double acc = 0.0;
  for (int j = 0; j <= g.nz; ++j) {
    const double wz = (j == 0 || j == g.nz) ? 0.5 : 1.0;
    // Exact r dr weights of the piecewise-linear interpolant in r.
    for (int i = 0; i <= g.nr; ++i) {
      const double wr = i == 0 ? 1.0 / 6.0 : i == g.nr ? 0.5 * i - 1.0 / 6.0 : i;
      acc += wz * wr * h * f[g.index(i, j)];
    }
  }
  return 2.0 * std::numbers::pi * acc * h * h;
}

MwaSolution mwa_sar(const MwaAntennaSpec& spec, std::span<const double> permittivity,
                    std::span<const double> conductivity) {
  spec.validate();
  const RzGrid g = spec.grid();
  if (permittivity.size() != g.size() || conductivity.size() != g.size())
    throw Error(ErrorCode::ShapeMismatch, "EM parameters do not match the r-z grid");
  std::vector<Complex> eps(g.size()), forcing(g.size());
  const double s = 0.5 * spec.slot_width;
  for (int j = 0; j <= g.nz; ++j)
    for (int i = 0; i <= g.nr; ++i) {
      const std::size_t idx = g.index(i, j);
      eps[idx] = complex_permittivity(permittivity[idx], conductivity[idx], spec.frequency);
      const double dr = g.r(i) - spec.probe_radius, dz = g.z(j) + spec.slot_offset;
      forcing[idx] = std::exp(-(dr * dr + dz * dz) / (2.0 * s * s));
    }
  MwaSolution out;
  out.grid = g;
  out.h = solve_axisymmetric_h(g, spec.frequency, eps, forcing);
  out.sar = sar_from_field(electric_field(g, spec.frequency, eps, out.h), conductivity);
  const double raw = revolved_integral(g, out.sar);
  out.input_power = spec.power;
  out.reflected_power = spec.power * spec.reflected_fraction;
  const double target = spec.power - out.reflected_power;
  if (target > 0.0) {
    if (!(raw > 0.0) || !std::isfinite(raw)) throw SolverError("MWA field deposits no power", raw);
    const double scale = target / raw;
    for (auto& v : out.sar) v *= scale;
    for (auto& v : out.h) v *= std::sqrt(scale);
  } else {
    std::fill(out.sar.begin(), out.sar.end(), 0.0);
  }
  out.deposited_power = revolved_integral(g, out.sar);
  return out;
}

Vec3 rz_world(const Probe& probe, double r, double z) {
  const auto basis = perpendicular_basis(probe.direction);
  return probe.tip + z * probe.direction + r * basis[0];
}

ScalarField revolve(const RzGrid& rz, std::span<const double> f, const GridSpec& grid, const Probe& probe, Unit unit) {
  if (f.size() != rz.size()) throw Error(ErrorCode::ShapeMismatch, "r-z field does not match its grid");
  ScalarField out(grid, unit);
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    const Vec3 p = grid.world(idx) - probe.tip;
    const double z = dot(p, probe.direction);
    const double r = norm(p - z * probe.direction);
    const double fi = r / rz.h, fj = (z - rz.z0) / rz.h;
    if (fi > rz.nr || fj < 0.0 || fj > rz.nz) continue;
    const int i0 = std::min(static_cast<int>(fi), rz.nr - 1);
    const int j0 = std::min(static_cast<int>(fj), rz.nz - 1);
    const double a = fi - i0, b = fj - j0;
    out[idx] = (1 - a) * (1 - b) * f[rz.index(i0, j0)] + a * (1 - b) * f[rz.index(i0 + 1, j0)] +
               (1 - a) * b * f[rz.index(i0, j0 + 1)] + a * b * f[rz.index(i0 + 1, j0 + 1)];
  }
  return out;
}

}  // namespace mict
