#include <fstream>
#include <iterator>

#include "doctest.h"
#include "fixtures.hpp"
#include "mict/electro.hpp"
#include "mict/runner.hpp"

using namespace mict;
namespace fs = std::filesystem;

namespace {

fs::path scenario(const std::string& name) { return fixture::data_dir() / "scenarios" / (name + ".xml"); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Relative path -> bytes for every file below dir.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

RunResult run_file(const std::string& name, const fs::path& out, std::optional<double> cadence = {},
                   bool deterministic = false) {
  RunRequest r;
  r.scenario_path = scenario(name);
  r.output_dir = out;
  r.snapshot_every = cadence;
  r.deterministic = deterministic;
  return run(r);
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("zero-duration protocol") {
    fixture::TempDir dir;
    const RunResult r = run_file("zero_duration", dir.path());
    CHECK(r.lesion.empty);
    CHECK(r.lesion.mask.count_nonzero() == 0);
    CHECK(r.simulated_time == 0.0);
    CHECK(r.protocol_time == 0.0);
    CHECK(r.steps.empty());
    for (const char* f : {"lesion.mhd", "lesion.obj", "run_log.json", "scenario.resolved.xml"})
      CHECK(fs::exists(dir.path() / f));
  }

  TEST_CASE("rfa lesion on the 64 grid is contained about the tip") {
    fixture::TempDir dir;
    const RunResult r = run_file("rfa_64", dir.path());
    CHECK_FALSE(r.lesion.empty);
    CHECK(r.lesion.mask_volume_ml > 0.0);
    const GridSpec& g = r.lesion.mask.grid();
    double far = 0.0;
    for (std::size_t i = 0; i < g.voxel_count(); ++i)
      if (r.lesion.mask[i]) far = std::max(far, distance(g.world(i), {0, 0, 0}));
    CHECK(far < 20.0);
    CHECK(r.simulated_time == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(r.simulated_time == r.protocol_time);
  }

  TEST_CASE("identical requests give identical output directories") {
    fixture::TempDir a, b;
    const RunResult ra = run_file("rfa_small", a.path(), {}, true);
    const RunResult rb = run_file("rfa_small", b.path(), {}, true);
    CHECK(ra.lesion.mask == rb.lesion.mask);
    CHECK_FALSE(ra.lesion.empty);
    const auto ta = tree(a.path()), tb = tree(b.path());
    CHECK(ta.size() == tb.size());
    CHECK(ta == tb);
    CHECK(ta.count("snapshots/temperature_t00060.000.mhd") == 1);
    CHECK(ra.snapshots.size() == 4);  // two fields at 60 s and 120 s
  }

  TEST_CASE("snapshot cadence does not change the physics") {
    fixture::TempDir a, b, c;
    const RunResult fine = run_file("rfa_small", a.path(), 30.0);
    const RunResult coarse = run_file("rfa_small", b.path(), 60.0);
    const RunResult none = run_file("rfa_small", c.path(), 0.0);
    CHECK(fine.lesion.mask == coarse.lesion.mask);
    CHECK(fine.lesion.mask == none.lesion.mask);
    CHECK(fine.fields.at("temperature") == none.fields.at("temperature"));
    CHECK(fine.snapshots.size() == 8);
    CHECK(none.snapshots.empty());
    CHECK(fine.simulated_time == fine.protocol_time);
    CHECK(fine.simulated_time == doctest::Approx(120.0).epsilon(1e-12));
  }

  TEST_CASE("signals at start and a hot voxel beside the probe") {
    GridSpec g = fixture::centred_grid(21, 1.0);
    Probe p;
    p.id = "p";
    p.tip = {0, 0, 0};
    p.direction = {0, 0, 1};
    const auto region = probe_signal_region(g, {p}, 1.0, 10.0, 2.0);
    CHECK_FALSE(region.empty());
    Protocol proto;
    proto.steps.push_back(ProtocolStep{});
    proto.steps[0].value = 10.0;
    proto.steps[0].max_duration = 60.0;
    const ProtocolState st = protocol_start(proto);
    ScalarField t(g, Unit::Kelvin, 310.0);
    ProtocolSignals s = signals_from_state(st, 1.0, t, region, 80.0);
    CHECK(s.probe_temperature == 310.0);
    CHECK(s.elapsed == 1.0);
    CHECK(s.impedance == 80.0);

    // 2 mm off the shaft, 1 mm behind the tip: within radius + signal radius.
    const std::size_t beside = g.index(12, 10, 9);
    CHECK(std::find(region.begin(), region.end(), beside) != region.end());
    t[beside] = 375.0;
    CHECK(signals_from_state(st, 1.0, t, region, 80.0).probe_temperature == 375.0);
    // Far voxels are not part of the signal.
    ScalarField t2(g, Unit::Kelvin, 310.0);
    t2.at(20, 20, 0) = 400.0;
    CHECK(signals_from_state(st, 1.0, t2, region, 80.0).probe_temperature == 310.0);

    // A run starts from body temperature.
    fixture::TempDir dir;
    const RunResult r = run_file("rfa_small", dir.path());
    REQUIRE_FALSE(r.steps.empty());
    CHECK(r.events.front().what == "start");
    CHECK(r.steps.front().signals.probe_temperature > 310.0);
    CHECK(r.steps.front().signals.probe_temperature < r.steps.back().max_temperature + 1e-9);
  }

  TEST_CASE("IRE impedance signal equals the proxy of the solved potential") {
    ScenarioParse p = load_scenario(scenario("ire_small"));
    REQUIRE(p.ok());
    ScenarioDoc doc = *p.doc;
    doc.outputs.fields = {"potential", "field"};
    fixture::TempDir dir;
    RunRequest req;
    req.scenario = doc;
    req.output_dir = dir.path();
    const RunResult r = run(req);
    REQUIRE_FALSE(r.steps.empty());
    CHECK(r.potential_solves == 1);
    const ScalarField& phi = r.fields.at("potential");
    const ScalarField sigma(phi.grid(), Unit::SiemensPerMetre, 0.333);
    const double z = impedance_proxy(phi, sigma, 1500.0, probe_voxels(phi.grid(), *doc.probe("anode"), 0.5, 15.0));
    for (const auto& s : r.steps) CHECK(s.signals.impedance == z);
    CHECK(z > 0.0);
    CHECK(r.simulated_time == doctest::Approx(9.0).epsilon(1e-12));
    CHECK_FALSE(r.lesion.empty);
  }

  TEST_CASE("invalid scenario reports every issue") {
    fixture::TempDir dir;
    const fs::path bad = dir.path() / "bad.xml";
    std::string text = slurp(scenario("rfa_small"));
    const auto drop = [&](const std::string& s) {
      const auto at = text.find(s);
      REQUIRE(at != std::string::npos);
      text.erase(at, s.size());
    };
    drop(R"(<parameter name="thermal_conductivity" value="0.512" unit="W/m/K"/>)");
    drop(R"(<parameter name="thermal_conductivity" value="0.55" unit="W/m/K"/>)");
    std::ofstream(bad) << text;
    try {
      run_file("no_such_scenario", dir.path() / "out");
      FAIL("missing file accepted");
    } catch (const ScenarioInvalid& e) {
      REQUIRE(e.issues().size() == 1);
      CHECK(e.issues()[0].kind == "io");
    }
    RunRequest req;
    req.scenario_path = bad;
    req.output_dir = dir.path() / "out";
    try {
      run(req);
      FAIL("invalid scenario ran");
    } catch (const ScenarioInvalid& e) {
      CHECK(e.issues().size() == 2);
    }
  }
}
