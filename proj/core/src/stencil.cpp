#include "mict/stencil.hpp"

#include <cmath>

#include "mict/error.hpp"

namespace mict {

double harmonic_mean(double a, double b) {
  const double s = a + b;
  return s > 0.0 ? 2.0 * a * b / s : 0.0;
}

DiffusionOperator::DiffusionOperator(const ScalarField& conductivity) : grid_(conductivity.grid()) {
  const std::size_t n = grid_.voxel_count();
  gx_.assign(n, 0.0);
  gy_.assign(n, 0.0);
  gz_.assign(n, 0.0);
  diag_.assign(n, 0.0);
  const double hx = grid_.spacing[0] * 1e-3, hy = grid_.spacing[1] * 1e-3, hz = grid_.spacing[2] * 1e-3;
  const double ix = 1.0 / (hx * hx), iy = 1.0 / (hy * hy), iz = 1.0 / (hz * hz);
  const auto [nx, ny, nz] = grid_.dims;
  const std::size_t sy = nx, sz = static_cast<std::size_t>(nx) * ny;
  const auto k = conductivity.values();
  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t idx = grid_.index(i, j, kk);
        if (i + 1 < nx) gx_[idx] = harmonic_mean(k[idx], k[idx + 1]) * ix;
        if (j + 1 < ny) gy_[idx] = harmonic_mean(k[idx], k[idx + sy]) * iy;
        if (kk + 1 < nz) gz_[idx] = harmonic_mean(k[idx], k[idx + sz]) * iz;
      }
  for (std::size_t idx = 0; idx < n; ++idx)
    for_each_neighbour(idx, [&](std::size_t, double g) { diag_[idx] += g; });
}

void DiffusionOperator::apply(std::span<const double> x, std::span<double> y) const {
  const auto [nx, ny, nz] = grid_.dims;
  const std::size_t sy = nx, sz = static_cast<std::size_t>(nx) * ny;
  auto edge = [&](int i, int j, int k, std::size_t idx) {
    const double xc = x[idx];
    double acc = 0.0;
    if (i + 1 < nx) acc += gx_[idx] * (x[idx + 1] - xc);
    if (i > 0) acc += gx_[idx - 1] * (x[idx - 1] - xc);
    if (j + 1 < ny) acc += gy_[idx] * (x[idx + sy] - xc);
    if (j > 0) acc += gy_[idx - sy] * (x[idx - sy] - xc);
    if (k + 1 < nz) acc += gz_[idx] * (x[idx + sz] - xc);
    if (k > 0) acc += gz_[idx - sz] * (x[idx - sz] - xc);
    y[idx] = acc;
  };
  const double* gx = gx_.data();
  const double* gy = gy_.data();
  const double* gz = gz_.data();
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = grid_.index(0, j, k);
      if (nx < 3 || j == 0 || k == 0 || j == ny - 1 || k == nz - 1) {
        for (int i = 0; i < nx; ++i) edge(i, j, k, row + i);
        continue;
      }
      edge(0, j, k, row);
      // Interior run: no bounds tests, so the compiler can vectorize it.
      const double* xp = x.data();
      double* yp = y.data();
      const std::size_t end = row + nx - 1;
      for (std::size_t idx = row + 1; idx < end; ++idx) {
        const double xc = xp[idx];
        yp[idx] = gx[idx] * (xp[idx + 1] - xc) + gx[idx - 1] * (xp[idx - 1] - xc) + gy[idx] * (xp[idx + sy] - xc) +
                  gy[idx - sy] * (xp[idx - sy] - xc) + gz[idx] * (xp[idx + sz] - xc) +
                  gz[idx - sz] * (xp[idx - sz] - xc);
      }
      edge(nx - 1, j, k, end);
    }
}

ScalarField laplacian(const ScalarField& f, const ScalarField& conductivity) {
  if (!(f.grid() == conductivity.grid()))
    throw Error(ErrorCode::ShapeMismatch, "laplacian: field and conductivity grids differ");
  const DiffusionOperator op(conductivity);
  const Unit out_unit = f.unit() == Unit::Kelvin ? Unit::WattPerCubicMetre : Unit::Dimensionless;
  ScalarField out(f.grid(), out_unit, 0.0);
  op.apply(f.values(), out.values());
  return out;
}

double trilinear_sample(const ScalarField& f, const Vec3& p) {
  const GridSpec& g = f.grid();
  if (!g.contains(p)) throw Error(ErrorCode::Domain, "trilinear_sample: point outside grid");
  const Vec3 c = g.continuous_index(p);
  int i0[3];
  double w[3];
  for (int a = 0; a < 3; ++a) {
    const double clamped = std::clamp(c[a], 0.0, static_cast<double>(g.dims[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(clamped)), g.dims[a] - 2);
    w[a] = clamped - i0[a];
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double wt = (dx ? w[0] : 1.0 - w[0]) * (dy ? w[1] : 1.0 - w[1]) * (dz ? w[2] : 1.0 - w[2]);
        if (wt != 0.0) acc += wt * f.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
      }
  return acc;
}

LabelMask transform_mask(const LabelMask& m, const RigidTransform& t) {
  const GridSpec& g = m.grid();
  const RigidTransform inv = t.inverse();
  const Mat3 r = inv.matrix();
  std::vector<std::uint8_t> out(g.voxel_count(), 0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 src = r * g.world(i, j, k) + inv.translation;
        const Vec3 c = g.continuous_index(src);
        const int si = static_cast<int>(std::lround(c[0]));
        const int sj = static_cast<int>(std::lround(c[1]));
        const int sk = static_cast<int>(std::lround(c[2]));
        if (g.in_bounds(si, sj, sk)) out[g.index(i, j, k)] = m.at(si, sj, sk);
      }
  return LabelMask(g, std::move(out), m.legend());
}

}  // namespace mict
