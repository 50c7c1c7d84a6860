#include <fstream>
#include <functional>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mict/error.hpp"
#include "mict/scenario.hpp"
#include "mict/volume_io.hpp"

using namespace mict;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

const char* kProtocol = R"(  <protocol id="const">
    <step setpoint="power" value="30 W" max_duration="60 s"/>
  </protocol>)";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("scenario-io") {
  TEST_CASE("read a 2^3 zero volume") {
    fixture::TempDir dir;
    spit(dir.path() / "z.mhd",
         "ObjectType = Image\nNDims = 3\nDimSize = 2 2 2\nElementSpacing = 1 1 1\nOffset = 0 0 0\n"
         "ElementType = MET_UCHAR\nElementDataFile = z.raw\n");
    spit(dir.path() / "z.raw", std::string(8, '\0'));
    const Volume v = read_volume(dir.path() / "z.mhd");
    CHECK(v.grid.dims == Index3{2, 2, 2});
    CHECK(v.type == ElementType::UInt8);
    CHECK(v.values == std::vector<double>(8, 0.0));
  }

  TEST_CASE("random 16^3 mask round-trips byte-identical") {
    fixture::TempDir dir;
    GridSpec g = fixture::centred_grid(16, 0.75);
    std::mt19937_64 rng(42);
    std::vector<std::uint8_t> labels(g.voxel_count());
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 3);
    const LabelMask m(g, labels, Legend{{0, "background"}, {1, "a"}, {2, "b"}});
    write_volume(dir.path() / "m.mhd", to_volume(m));
    const Volume back = read_volume(dir.path() / "m.mhd");
    const LabelMask m2 = to_mask(back, m.legend());
    CHECK(m2 == m);
    const std::string raw = slurp(dir.path() / "m.raw");
    REQUIRE(raw.size() == labels.size());
    CHECK(std::equal(raw.begin(), raw.end(), labels.begin(),
                     [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }));
    write_volume(dir.path() / "m2.mhd", back);
    CHECK(slurp(dir.path() / "m2.raw") == raw);
  }

  TEST_CASE("float volume round trip is exact in float32") {
    fixture::TempDir dir;
    const GridSpec g = fixture::centred_grid(5, 1.0);
    ScalarField f(g, Unit::Kelvin);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(300.0 + 0.37 * static_cast<double>(i));
    write_volume(dir.path() / "f.mhd", to_volume(f));
    CHECK(to_field(read_volume(dir.path() / "f.mhd"), Unit::Kelvin) == f);
    const std::string inline_bytes = serialize_volume_inline(to_volume(f));
    CHECK(parse_volume_inline(inline_bytes) == to_volume(f));
  }

  TEST_CASE("volume errors carry distinct codes") {
    fixture::TempDir dir;
    const std::string header =
        "ObjectType = Image\nNDims = 3\nDimSize = 2 2 2\nElementSpacing = 1 1 1\nOffset = 0 0 0\n"
        "ElementType = MET_UCHAR\nElementDataFile = z.raw\n";
    spit(dir.path() / "z.mhd", header);
    spit(dir.path() / "z.raw", std::string(7, '\0'));
    CHECK(code_of([&] { read_volume(dir.path() / "z.mhd"); }) == ErrorCode::SizeMismatch);
    spit(dir.path() / "bad.mhd", "NDims = 3\nDimSize = 2 2\n");
    CHECK(code_of([&] { read_volume(dir.path() / "bad.mhd"); }) == ErrorCode::MalformedHeader);
    std::string dbl = header;
    dbl.replace(dbl.find("MET_UCHAR"), 9, "MET_DOUBLE");
    spit(dir.path() / "d.mhd", dbl);
    CHECK(code_of([&] { read_volume(dir.path() / "d.mhd"); }) == ErrorCode::UnsupportedElementType);
    CHECK(code_of([&] { read_volume(dir.path() / "none.mhd"); }) == ErrorCode::Io);
  }

  TEST_CASE("parse a minimal RFA scenario") {
    const ScenarioParse r = parse_scenario(fixture::rfa_xml(kProtocol));
    REQUIRE_MESSAGE(r.ok(), to_string(r.issues));
    const ScenarioDoc& d = *r.doc;
    CHECK(d.modality == Modality::Rfa);
    CHECK(d.grid.dims == Index3{16, 16, 16});
    REQUIRE(d.tissues.count("liver"));
    CHECK(d.tissues.at("liver").conductivity == doctest::Approx(0.512));
    CHECK(d.tissues.at("liver").latent_heat == doctest::Approx(250e3));
    REQUIRE(d.probes.size() == 1);
    REQUIRE(d.protocol.steps.size() == 1);
    CHECK(*d.protocol.steps[0].value == 30.0);
    CHECK(d.protocol.steps[0].max_duration == 60.0);
    // Registry defaults are materialized.
    CHECK(d.real("body_temperature") == 310.0);
  }

  TEST_CASE("a missing tissue parameter gives exactly one issue") {
    std::string xml = fixture::rfa_xml(kProtocol);
    const std::string line = R"(<parameter name="thermal_conductivity" value="0.512" unit="W/m/K"/>)";
    xml.erase(xml.find(line), line.size());
    const ScenarioParse r = parse_scenario(xml);
    CHECK_FALSE(r.ok());
    REQUIRE(r.issues.size() == 1);
    CHECK(r.issues[0].kind == "missing-parameter");
    CHECK(r.issues[0].parameter == "thermal_conductivity");
    CHECK(r.issues[0].scope == "tissue:liver");
  }

  TEST_CASE("celsius is a unit mismatch") {
    std::string xml = fixture::rfa_xml(kProtocol);
    const std::string from = R"(value="265" unit="K")", to = R"(value="-8" unit="°C")";
    xml.replace(xml.find(from), from.size(), to);
    const ScenarioParse r = parse_scenario(xml);
    CHECK_FALSE(r.ok());
    REQUIRE_MESSAGE(r.issues.size() == 1, to_string(r.issues));
    CHECK(r.issues[0].kind == "unit-mismatch");
    CHECK(r.issues[0].parameter == "solidus_temperature");
  }

  TEST_CASE("all failures are reported together") {
    std::string xml = fixture::rfa_xml(kProtocol, R"(<parameter name="thermal_dt" value="1" unit="W"/>)");
    const std::string line = R"(<parameter name="density" value="1060" unit="kg/m^3"/>)";
    xml.erase(xml.find(line), line.size());
    const ScenarioParse r = parse_scenario(xml);
    CHECK_FALSE(r.ok());
    CHECK(r.issues.size() >= 2);
  }

  TEST_CASE("to_xml round trip") {
    for (const char* name : {"rfa_small.xml", "mwa_small.xml", "cryo_small.xml", "ire_small.xml", "zero_duration.xml"}) {
      CAPTURE(name);
      const ScenarioParse a = load_scenario(fixture::data_dir() / "scenarios" / name);
      REQUIRE_MESSAGE(a.ok(), to_string(a.issues));
      const std::string text = to_xml(*a.doc);
      const ScenarioParse b = parse_scenario(text);
      REQUIRE_MESSAGE(b.ok(), to_string(b.issues));
      CHECK(*b.doc == *a.doc);
      CHECK(to_xml(*b.doc) == text);
    }
  }

  TEST_CASE("composition through the default library") {
    const std::string lib = (fixture::data_dir() / "library" / "default.xml").string();
    const std::string xml = fixture::scenario_xml(
        "RFA", R"(  <probe id="p1" kind="RFA" tip="0 0 0" direction="0 0 1" unit="mm" equipment="rfa-straight"/>
  <composition library=")" + lib + R"(" model="rfa-pennes" equipment="rfa-straight" organ="liver" protocol="rfa-constant"/>
  <parameters><parameter name="applied_power" value="25" unit="W"/></parameters>)");
    const ScenarioParse r = parse_scenario(xml);
    REQUIRE_MESSAGE(r.ok(), to_string(r.issues));
    CHECK(r.doc->real("applied_power") == 25.0);
    REQUIRE_FALSE(r.doc->protocol.steps.empty());
    CHECK(*r.doc->protocol.steps[0].value == 25.0);

    std::string missing = xml;
    const std::string p = R"(<parameter name="applied_power" value="25" unit="W"/>)";
    missing.erase(missing.find(p), p.size());
    const ScenarioParse m = parse_scenario(missing);
    CHECK_FALSE(m.ok());
    bool demand = false;
    for (const auto& i : m.issues) demand |= i.kind == "missing-parameter" && i.parameter == "applied_power";
    CHECK(demand);
  }

  TEST_CASE("region primitives paint the mask") {
    const ScenarioParse r = load_scenario(fixture::data_dir() / "scenarios" / "rfa_small.xml");
    REQUIRE(r.ok());
    const LabelMask m = r.doc->region_mask();
    const double ml = static_cast<double>(m.count(1)) * m.grid().voxel_volume_mm3() * 1e-3;
    const double expect = 4.0 / 3.0 * std::numbers::pi * 512.0 * 1e-3;
    CHECK(std::abs(ml - expect) < 0.15 * expect);
  }
}
