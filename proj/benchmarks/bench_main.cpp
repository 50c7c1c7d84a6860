#include <random>

#include <benchmark/benchmark.h>

#include "mict/bioheat.hpp"
#include "mict/cell_death.hpp"
#include "mict/electro.hpp"
#include "mict/mesh.hpp"
#include "mict/sources.hpp"
#include "mict/validation.hpp"

using namespace mict;

namespace {

GridSpec cube(int n, double h) {
  GridSpec g;
  g.dims = {n, n, n};
  g.spacing = {h, h, h};
  const double o = -0.5 * (n - 1) * h;
  g.origin = {o, o, o};
  return g;
}

TissueProperties liver() {
  TissueProperties t = make_tissue(1060.0, 3600.0, 0.512, 6.4e4);
  t.electrical_conductivity = 0.333;
  t.latent_heat = 250e3;
  t.solidus = 265.0;
  t.liquidus = 272.0;
  t.frozen_conductivity = 2.0;
  t.frozen_specific_heat = 1800.0;
  return t;
}

ScalarField ball(const GridSpec& g, double r) {
  ScalarField f(g, Unit::Dimensionless);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = r - norm(g.world(i));
  return f;
}

}  // namespace

static void BM_BioheatStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GridSpec g = cube(n, 96.0 / n);
  const BioheatSolver solver(MaterialMap::uniform(g, liver()), ThermalBoundary::dirichlet());
  const ScalarField q = rfa_source({{{0, 0, 0}}, 2.5, 20.0, {}}, g);
  ThermalState s = initial_state(g);
  for (auto _ : state) {
    s = solver.step(s, q, 0.5);
    benchmark::DoNotOptimize(s.temperature.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.voxel_count()));
}
BENCHMARK(BM_BioheatStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_CryoStep(benchmark::State& state) {
  const GridSpec g = cube(32, 2.0);
  const MaterialMap m = MaterialMap::uniform(g, liver());
  ThermalBoundary b = ThermalBoundary::dirichlet();
  for (int k = 10; k < 20; ++k) b.fixed_voxels.push_back(g.index(16, 16, k));
  b.fixed_temperature = 113.0;
  const ScalarField q(g, Unit::WattPerCubicMetre, 0.0);
  ThermalState s = initial_state(g);
  for (int i = 0; i < 10; ++i) s = step_cryo(s, m, q, 1.0, b);
  for (auto _ : state) benchmark::DoNotOptimize(step_cryo(s, m, q, 1.0, b).temperature.values().data());
}
BENCHMARK(BM_CryoStep)->Unit(benchmark::kMillisecond);

static void BM_DeathStep(benchmark::State& state) {
  const GridSpec g = cube(64, 1.0);
  ScalarField t(g, Unit::Kelvin);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(310.0, 370.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  const DeathModelParams p = DeathModelParams::fixture();
  CellStateField c = CellStateField::initial(g);
  for (auto _ : state) {
    advance_death(c, t, p, 0.5);
    benchmark::DoNotOptimize(c.dead.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.voxel_count()));
}
BENCHMARK(BM_DeathStep)->Unit(benchmark::kMillisecond);

static void BM_RfaSource(benchmark::State& state) {
  const GridSpec g = cube(96, 1.0);
  const RfaSourceSpec spec{{{0, 0, 0}, {5, 0, -3}, {-5, 0, -3}}, 2.5, 30.0, {}};
  for (auto _ : state) benchmark::DoNotOptimize(rfa_source(spec, g).values().data());
}
BENCHMARK(BM_RfaSource)->Unit(benchmark::kMillisecond);

static void BM_SolvePotential(benchmark::State& state) {
  const GridSpec g = cube(40, 1.0);
  const ScalarField sigma(g, Unit::SiemensPerMetre, 0.333);
  Probe a, c;
  a.id = "a";
  c.id = "c";
  a.kind = c.kind = ProbeKind::IreElectrode;
  a.tip = {-7.5, 0, 7.5};
  c.tip = {7.5, 0, 7.5};
  for (auto _ : state) benchmark::DoNotOptimize(solve_potential(sigma, {"a", "c", 1500.0, 15.0, 0.5}, a, c).values().data());
}
BENCHMARK(BM_SolvePotential)->Unit(benchmark::kMillisecond);

static void BM_SurfaceAlpha(benchmark::State& state) {
  const GridSpec g = cube(48, 1.0);
  const TriangleMesh s = iso_surface(ball(g, 12.0), 0.0, -100.0);
  const TriangleMesh sigma = iso_surface(ball(g, 15.0), 0.0, -100.0);
  const SurfaceIndex index(sigma);
  for (auto _ : state) benchmark::DoNotOptimize(surface_alpha(s, index));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(s.faces.size()));
}
BENCHMARK(BM_SurfaceAlpha)->Unit(benchmark::kMillisecond);

static void BM_IsoSurface(benchmark::State& state) {
  const GridSpec g = cube(64, 1.0);
  const ScalarField f = ball(g, 20.0);
  for (auto _ : state) benchmark::DoNotOptimize(iso_surface(f, 0.0, -100.0).faces.size());
}
BENCHMARK(BM_IsoSurface)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
