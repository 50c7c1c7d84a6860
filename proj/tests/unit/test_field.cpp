#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mict/error.hpp"
#include "mict/stencil.hpp"
#include "oracles.hpp"

using namespace mict;

namespace {

GridSpec line_grid(int n, double h) {
  GridSpec g;
  g.dims = {n, 3, 3};
  g.spacing = {h, h, h};
  return g;
}

ScalarField random_field(const GridSpec& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarField f(g, Unit::Dimensionless);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

}  // namespace

TEST_SUITE("core-field") {
  TEST_CASE("laplacian annihilates constants") {
    const GridSpec g = fixture::centred_grid(6, 1.5);
    std::mt19937_64 rng(1);
    const ScalarField k = random_field(g, rng, 0.1, 2.0);
    const ScalarField c(g, Unit::Kelvin, 310.0);
    const ScalarField l = laplacian(c, k);
    for (std::size_t i = 0; i < l.size(); ++i) CHECK(std::abs(l[i]) <= 1e-6);
  }

  TEST_CASE("laplacian of x^2 is 2 in the interior") {
    // h = 1 m keeps the SI coefficients in plain units.
    const GridSpec g = line_grid(12, 1000.0);
    ScalarField f(g, Unit::Dimensionless), k(g, Unit::Dimensionless, 1.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = g.world(i)[0] * 1e-3;
      f[i] = x * x;
    }
    const ScalarField l = laplacian(f, k);
    for (int i = 1; i < 11; ++i) CHECK(std::abs(l.at(i, 1, 1) - 2.0) < 1e-6);
  }

  TEST_CASE("laplacian matches the dense stencil matrix exactly") {
    const GridSpec g = fixture::centred_grid(5, 1.0);
    std::mt19937_64 rng(7);
    const ScalarField f = random_field(g, rng);
    const ScalarField k(g, Unit::Dimensionless, 1.0);
    const Eigen::MatrixXd m = oracle::dense_laplacian(g, std::vector<double>(k.values().begin(), k.values().end()));
    Eigen::VectorXd x(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) x[i] = f[i];
    const Eigen::VectorXd y = m * x;
    const ScalarField l = laplacian(f, k);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      err = std::max(err, std::abs(l[i] - y[i]));
      scale = std::max(scale, std::abs(y[i]));
    }
    // Same stencil, summation order may differ by rounding only.
    CHECK(err <= 1e-12 * scale);
  }

  TEST_CASE("laplacian is linear and symmetric") {
    const GridSpec g = fixture::centred_grid(8, 1.0);
    std::mt19937_64 rng(3);
    const ScalarField f = random_field(g, rng), h = random_field(g, rng);
    const ScalarField k(g, Unit::Dimensionless, 1.0);
    ScalarField comb(g, Unit::Dimensionless);
    for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = 2.5 * f[i] - 0.75 * h[i];
    const ScalarField lf = laplacian(f, k), lh = laplacian(h, k), lc = laplacian(comb, k);
    double lin = 0.0, fLh = 0.0, hLf = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      lin = std::max(lin, std::abs(lc[i] - (2.5 * lf[i] - 0.75 * lh[i])));
      scale = std::max(scale, std::abs(lc[i]));
      fLh += f[i] * lh[i];
      hLf += h[i] * lf[i];
    }
    CHECK(lin <= 1e-9 * scale);
    CHECK(std::abs(fLh - hLf) <= 1e-7 * std::max(std::abs(fLh), 1.0));
  }

  TEST_CASE("laplacian rejects mismatched grids") {
    const ScalarField a(fixture::centred_grid(4, 1.0), Unit::Kelvin);
    const ScalarField b(fixture::centred_grid(5, 1.0), Unit::Dimensionless, 1.0);
    CHECK_THROWS_AS(laplacian(a, b), Error);
  }

  TEST_CASE("trilinear sampling") {
    GridSpec g;
    g.dims = {4, 5, 6};
    g.spacing = {1.0, 2.0, 0.5};
    g.origin = {-1.0, 3.0, 0.25};
    ScalarField f(g, Unit::Dimensionless);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto p = g.world(i);
      f[i] = 2 * p[0] + 3 * p[1] + p[2];
    }
    CHECK(trilinear_sample(f, g.world(2, 3, 4)) == f.at(2, 3, 4));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(-1.0, 2.0), uy(3.0, 11.0), uz(0.25, 2.75);
    for (int n = 0; n < 100; ++n) {
      const Vec3 p{ux(rng), uy(rng), uz(rng)};
      CHECK(std::abs(trilinear_sample(f, p) - (2 * p[0] + 3 * p[1] + p[2])) < 1e-9);
    }
    ScalarField two(line_grid(2, 1.0), Unit::Dimensionless);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) two.at(1, j, k) = 10.0;
    CHECK(trilinear_sample(two, {0.5, 1.0, 1.0}) == doctest::Approx(5.0));
    CHECK_THROWS_AS(trilinear_sample(f, {-1.5, 3.0, 0.25}), Error);
  }

  TEST_CASE("transform_mask") {
    const GridSpec g = fixture::centred_grid(24, 1.0);
    const LabelMask ball = fixture::ball_mask(g, {0, 0, 0}, 7.0);
    CHECK(transform_mask(ball, RigidTransform::identity()) == ball);

    RigidTransform shift;
    shift.translation = {1.0, 0.0, 0.0};
    const LabelMask moved = transform_mask(ball, shift);
    for (int k = 0; k < 24; ++k)
      for (int j = 0; j < 24; ++j)
        for (int i = 1; i < 24; ++i) CHECK_EQ(moved.at(i, j, k), ball.at(i - 1, j, k));

    RigidTransform rot;
    rot.rotation = {0.0, 0.0, 10.0 * std::numbers::pi / 180.0};
    const LabelMask turned = transform_mask(ball, rot);
    const double change = std::abs(static_cast<double>(turned.count_nonzero()) - ball.count_nonzero());
    CHECK(change < 0.05 * ball.count_nonzero());

    // t^-1 o t only disturbs voxels next to the boundary.
    RigidTransform t;
    t.rotation = {0.1, -0.05, 0.2};
    t.translation = {0.3, -0.7, 0.2};
    const LabelMask back = transform_mask(transform_mask(ball, t), t.inverse());
    for (std::size_t i = 0; i < ball.size(); ++i)
      if (back[i] != ball[i]) CHECK(std::abs(distance(g.world(i), {0, 0, 0}) - 7.0) <= std::sqrt(3.0) + 1e-9);
  }

  TEST_CASE("rigid transform inverse round trip") {
    RigidTransform t;
    t.rotation = {0.3, -0.2, 1.1};
    t.translation = {5.0, -2.0, 7.5};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const RigidTransform inv = t.inverse();
    for (int n = 0; n < 50; ++n) {
      const Vec3 p{u(rng), u(rng), u(rng)};
      CHECK(distance(inv.apply(t.apply(p)), p) < 1e-9);
    }
  }

  TEST_CASE("grid, mask and probe invariants") {
    GridSpec bad;
    bad.dims = {0, 2, 2};
    CHECK_THROWS_AS(bad.validate(), Error);
    const GridSpec g = fixture::centred_grid(4, 1.0);
    CHECK_THROWS_AS(LabelMask(g, std::vector<std::uint8_t>(64, 3), Legend{{0, "background"}}), Error);
    Probe p;
    p.direction = {0.0, 0.0, 2.0};
    CHECK_THROWS_AS(p.validate(), Error);
    p.direction = {0.0, 0.6, 0.8};
    CHECK_NOTHROW(p.validate());
  }

  TEST_CASE("probe voxels cover the axis of a thin probe") {
    const GridSpec g = fixture::centred_grid(16, 2.0);
    Probe p;
    p.tip = {0.0, 0.0, 0.0};
    const auto v = probe_voxels(g, p, 0.5, 10.0);
    CHECK(v.size() >= 5);
    for (auto i : v) CHECK(distance_to_probe_axis(p, 10.0, g.world(i)) <= std::sqrt(3.0) + 1e-9);
  }
}
