#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "mict/error.hpp"
#include "mict/sources.hpp"
#include "oracles.hpp"

using namespace mict;

namespace {

double total_power(const ScalarField& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i];
  return s * q.grid().voxel_volume_m3();
}

MwaAntennaSpec small_antenna(double power) {
  MwaAntennaSpec s;
  s.power = power;
  s.resolution = 0.5;
  s.radius = 14.0;
  s.behind = 24.0;
  s.ahead = 10.0;
  return s;
}

std::pair<std::vector<double>, std::vector<double>> uniform_em(const RzGrid& g, double eps, double sigma) {
  return {std::vector<double>(g.size(), eps), std::vector<double>(g.size(), sigma)};
}

}  // namespace

TEST_SUITE("sources") {
  TEST_CASE("RFA peak value and integral") {
    const double sigma = 2.0;
    const GridSpec g = fixture::centred_grid(41, 0.5);  // +/- 10 mm = 5 sigma
    RfaSourceSpec spec{{{0, 0, 0}}, sigma, 40.0, {}};
    const ScalarField q = rfa_source(spec, g);
    const double s = sigma * 1e-3;
    CHECK(q.at(20, 20, 20) == doctest::Approx(40.0 * std::pow(2 * std::numbers::pi * s * s, -1.5)).epsilon(1e-12));
    CHECK(std::abs(total_power(q) - 40.0) <= 0.01 * 40.0);
  }

  TEST_CASE("RFA translation equivariance and superposition") {
    const GridSpec g = fixture::centred_grid(30, 1.0);
    const RfaSourceSpec a{{{-2.5, 0.5, 1.5}}, 2.5, 30.0, {}};
    RfaSourceSpec b = a;
    b.points[0] = b.points[0] + Vec3{3.0, -2.0, 1.0};
    const ScalarField qa = rfa_source(a, g), qb = rfa_source(b, g);
    for (int k = 0; k < 29; ++k)
      for (int j = 2; j < 30; ++j)
        for (int i = 0; i < 27; ++i) CHECK(qb.at(i + 3, j - 2, k + 1) == doctest::Approx(qa.at(i, j, k)).epsilon(1e-12));

    const RfaSourceSpec pair{{{-4, 0, 0}, {5, 1, -2}}, 2.0, 50.0, {0.3, 0.7}};
    const ScalarField qp = rfa_source(pair, g);
    const ScalarField q1 = rfa_source({{pair.points[0]}, 2.0, 15.0, {}}, g);
    const ScalarField q2 = rfa_source({{pair.points[1]}, 2.0, 35.0, {}}, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < qp.size(); ++i) worst = std::max(worst, std::abs(qp[i] - (q1[i] + q2[i])));
    CHECK(worst <= 1e-12 * qp.max());
  }

  TEST_CASE("RFA input validation and tines") {
    const GridSpec g = fixture::centred_grid(10, 1.0);
    CHECK_THROWS_AS(rfa_source({{{20, 0, 0}}, 2.0, 1.0, {}}, g), Error);
    CHECK_THROWS_AS(rfa_source({{}, 2.0, 1.0, {}}, g), Error);
    CHECK_THROWS_AS(rfa_source({{{0, 0, 0}}, 2.0, 1.0, {0.5}}, g), Error);
    Probe p;
    p.direction = {1, 0, 0};
    EquipmentDef umbrella;
    umbrella.tines = {{0, 0, 0, 1}, {-3, 10, 0, 1}, {-3, 10, 90, 1}};
    const auto pts = tine_points(p, &umbrella);
    REQUIRE(pts.size() == 3);
    CHECK(distance(pts[0], p.tip) < 1e-12);
    CHECK(pts[1][0] == doctest::Approx(-3.0));
    CHECK(std::hypot(pts[1][1], pts[1][2]) == doctest::Approx(10.0));
    CHECK(std::abs(dot(pts[1] - Vec3{-3, 0, 0}, pts[2] - Vec3{-3, 0, 0})) < 1e-9);
    CHECK(tine_points(p, nullptr).size() == 1);
  }

  TEST_CASE("EM table interpolation clamps") {
    const EmTable t{{60.0, 50.0, 2.0}, {80.0, 40.0, 1.0}};
    CHECK(em_params_at(70.0, t).permittivity == doctest::Approx(45.0));
    CHECK(em_params_at(70.0, t).conductivity == doctest::Approx(1.5));
    CHECK(em_params_at(10.0, t).permittivity == 50.0);
    CHECK(em_params_at(200.0, t).conductivity == 1.0);
    const Complex e = complex_permittivity(43.0, 1.69, 2.45e9);
    CHECK(e.real() == 43.0);
    CHECK(e.imag() == doctest::Approx(-1.69 / (2 * std::numbers::pi * 2.45e9 * 8.8541878128e-12)));
  }

  TEST_CASE("manufactured axisymmetric solution") {
    RzGrid g;
    g.h = 0.2;
    g.nr = 60;
    g.nz = 120;
    g.z0 = -12.0;
    const double f = 2.45e9;
    const Complex eps = complex_permittivity(43.0, 1.69, f);
    const double k0sq = std::pow(2 * std::numbers::pi * f, 2) * 8.8541878128e-12 * 1.25663706212e-6;
    const oracle::Manufactured m{0.0, 3e-3};
    std::vector<Complex> e(g.size(), eps), rhs(g.size());
    for (int j = 0; j <= g.nz; ++j)
      for (int i = 0; i <= g.nr; ++i) rhs[g.index(i, j)] = m.forcing(g.r(i) * 1e-3, g.z(j) * 1e-3, eps, k0sq);
    const auto h = solve_axisymmetric_h(g, f, e, rhs);
    double err = 0.0, peak = 0.0;
    for (int j = 0; j <= g.nz; ++j)
      for (int i = 0; i <= g.nr; ++i) {
        const double exact = m.h(g.r(i) * 1e-3, g.z(j) * 1e-3);
        err = std::max(err, std::abs(h[g.index(i, j)] - exact));
        peak = std::max(peak, std::abs(exact));
      }
    CHECK(err < 0.02 * peak);
  }

  TEST_CASE("SAR is linear in conductivity and power") {
    RzField e;
    e.er = {Complex(1, 2), Complex(0, 0), Complex(3, -1)};
    e.ez = {Complex(0.5, 0), Complex(1, 1), Complex(0, 2)};
    const auto s1 = sar_from_field(e, std::vector<double>{0.5, 1.0, 2.0});
    const auto s2 = sar_from_field(e, std::vector<double>{1.0, 2.0, 4.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(s2[i] == doctest::Approx(2 * s1[i]));
    CHECK(s1[0] == doctest::Approx(0.5 * 0.5 * (5.0 + 0.25)));

    const MwaAntennaSpec a = small_antenna(30.0), b = small_antenna(60.0);
    const auto [eps, sig] = uniform_em(a.grid(), 43.0, 1.69);
    const MwaSolution sa = mwa_sar(a, eps, sig), sb = mwa_sar(b, eps, sig);
    CHECK(sa.deposited_power == doctest::Approx(30.0).epsilon(1e-9));
    double worst = 0.0;
    for (std::size_t i = 0; i < sa.sar.size(); ++i) worst = std::max(worst, std::abs(sb.sar[i] - 2.0 * sa.sar[i]));
    CHECK(worst <= 1e-9 * *std::max_element(sb.sar.begin(), sb.sar.end()));
    MwaAntennaSpec r = a;
    r.reflected_fraction = 0.2;
    CHECK(mwa_sar(r, eps, sig).deposited_power == doctest::Approx(24.0).epsilon(1e-9));
  }

  TEST_CASE("revolved SAR keeps its power on the voxel grid") {
    MwaAntennaSpec s = small_antenna(30.0);
    const auto [eps, sig] = uniform_em(s.grid(), 43.0, 1.69);
    const MwaSolution sol = mwa_sar(s, eps, sig);
    GridSpec g;
    g.dims = {57, 57, 69};
    g.spacing = {0.5, 0.5, 0.5};
    g.origin = {-14.0, -14.0, -24.0};
    Probe p;
    const ScalarField q = revolve(sol.grid, sol.sar, g, p);
    CHECK(std::abs(total_power(q) - 30.0) <= 0.02 * 30.0);
    // Peak sits near the slot, behind the tip.
    std::size_t arg = 0;
    for (std::size_t i = 0; i < q.size(); ++i)
      if (q[i] > q[arg]) arg = i;
    CHECK(g.world(arg)[2] < 0.0);
    CHECK(g.world(arg)[2] > -15.0);
  }
}
