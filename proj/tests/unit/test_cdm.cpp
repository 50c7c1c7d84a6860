#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mict/cdm.hpp"
#include "mict/error.hpp"

using namespace mict;

namespace {

const ComponentLibrary& default_library() {
  static const LibraryLoad load = load_library(fixture::data_dir() / "library" / "default.xml");
  REQUIRE_MESSAGE(load.ok(), to_string(load.issues));
  return load.library;
}

Parameter real_param(const std::string& name, Dimension dim, double v) {
  Parameter p;
  p.name = name;
  p.dimension = dim;
  p.value = v;
  return p;
}

bool has_issue(const std::vector<Issue>& issues, const std::string& kind) {
  for (const auto& i : issues)
    if (i.kind == kind) return true;
  return false;
}

std::string wrap(const std::string& body) { return "<library schema_version=\"1\">" + body + "</library>"; }

Protocol single_step(double max_duration, std::vector<Guard> guards, double value = 30.0) {
  Protocol p;
  p.id = "t";
  ProtocolStep s;
  s.value = value;
  s.max_duration = max_duration;
  s.guards = std::move(guards);
  p.steps.push_back(s);
  return p;
}

}  // namespace

TEST_SUITE("cdm") {
  TEST_CASE("default library is valid and every allowed combination composes") {
    const auto& lib = default_library();
    CHECK(lib.validate().empty());
    CHECK(check_compositions(lib).empty());
    CHECK(lib.of_kind(ComponentKind::Protocol).size() >= 4);
  }

  TEST_CASE("compose precedence: case beats organ") {
    const auto& lib = default_library();
    const Composition base = compose(lib, "rfa-pennes", "rfa-straight", "liver", "rfa-impedance", {});
    CHECK(std::get<double>(base.parameters.at("thermal_conductivity").value) == 0.512);
    CHECK(base.parameters.at("thermal_conductivity").source == "liver");
    const Composition over = compose(lib, "rfa-pennes", "rfa-straight", "liver", "rfa-impedance",
                                     {real_param("thermal_conductivity", Dimension::ThermalConductivity, 0.6)});
    CHECK(std::get<double>(over.parameters.at("thermal_conductivity").value) == 0.6);
    CHECK(over.parameters.at("thermal_conductivity").source == "case");
    // Overridable protocol default.
    CHECK(std::get<double>(base.parameters.at("applied_power").value) == 30.0);
    CHECK(base.demands.empty());
  }

  TEST_CASE("a prompted parameter without value becomes a demand") {
    const auto& lib = default_library();
    const Composition c = compose(lib, "rfa-pennes", "rfa-straight", "liver", "rfa-constant", {});
    CHECK(c.demands == std::vector<std::string>{"applied_power"});
    const Composition supplied = compose(lib, "rfa-pennes", "rfa-straight", "liver", "rfa-constant",
                                         {real_param("applied_power", Dimension::Power, 40.0)});
    CHECK(supplied.demands.empty());
    CHECK(std::get<double>(supplied.parameters.at("applied_power").value) == 40.0);
  }

  TEST_CASE("disallowed and invalid combinations throw") {
    const auto& lib = default_library();
    try {
      compose(lib, "rfa-pennes", "rfa-straight", "kidney", "rfa-constant", {});
      FAIL("kidney RFA composed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DisallowedCombination);
    }
    // No shared tag between model, equipment and protocol.
    try {
      compose(lib, "rfa-pennes", "mwa-antenna", "liver", "rfa-constant", {});
      FAIL("mismatched modality composed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DisallowedCombination);
    }
    try {
      compose(lib, "rfa-pennes", "liver", "liver", "rfa-constant", {});
      FAIL("organ used as equipment");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
    try {
      compose(lib, "rfa-pennes", "rfa-straight", "liver", "rfa-constant",
              {real_param("applied_power", Dimension::Power, 1.0), real_param("applied_power", Dimension::Power, 2.0)});
      FAIL("duplicate case parameter accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Ambiguity);
    }
  }

  TEST_CASE("library structural checks") {
    const auto dup = parse_library(wrap(R"(<component id="a" kind="organ" tags="x"/><component id="a" kind="organ" tags="x"/>)"));
    CHECK(has_issue(dup.issues, "duplicate-id"));
    const auto untagged = parse_library(wrap(R"(<component id="a" kind="organ"/>)"));
    CHECK(has_issue(untagged.issues, "missing-tags"));
    const auto prompt = parse_library(wrap(
        R"(<component id="p" kind="protocol" tags="rfa"><parameter name="applied_power" value="3" unit="W" prompt="true"/>
           <step setpoint="power" max_duration="1 s"/></component>)"));
    CHECK(has_issue(prompt.issues, "prompt-conflict"));
    const auto ire = parse_library(wrap(
        R"(<component id="p" kind="protocol" tags="ire"><step setpoint="potential" value="1 kV" max_duration="1 s"/></component>)"));
    CHECK_FALSE(ire.ok());
    const auto rules = parse_library(wrap(R"(<component id="m" kind="numerical-model" tags="t"/>
      <rule model="t" allowed="true"/><rule organ="*" model="t" equipment="*" protocol="*" allowed="false"/>)"));
    CHECK(has_issue(rules.issues, "rule-conflict"));
  }

  TEST_CASE("library protocol guards parse") {
    const auto& lib = default_library();
    const ComponentDef* p = lib.find("rfa-impedance");
    REQUIRE(p);
    REQUIRE(p->protocol);
    REQUIRE(p->protocol->steps.size() == 1);
    const Guard& g = p->protocol->steps[0].guards.at(0);
    CHECK(g.signal == Signal::Impedance);
    CHECK(g.action == GuardAction::RepeatStep);
    CHECK(g.threshold == 200.0);
    CHECK(g.value == 0.5);
    CHECK(p->protocol->steps[0].max_duration == 720.0);
    const ComponentDef* ire = lib.find("ire-pulses");
    REQUIRE(ire);
    CHECK(*ire->protocol->steps[0].value == 1500.0);
  }
}

TEST_SUITE("protocol") {
  TEST_CASE("a 60 s step ends on duration") {
    const Protocol p = single_step(60.0, {});
    ProtocolState st = protocol_start(p);
    CHECK(st.setpoint == 30.0);
    int steps = 0;
    std::optional<ProtocolEvent> end;
    while (!st.terminal && steps < 1000) {
      st = protocol_next(p, st, {st.step_elapsed, 310.0, 80.0}, 1.0);
      ++steps;
      if (st.last_event) end = st.last_event;
    }
    CHECK(steps == 60);
    REQUIRE(end);
    CHECK(end->what == "duration");
    CHECK(end->time == doctest::Approx(60.0));
    CHECK(st.setpoint == 0.0);
    CHECK(step_remaining(p, st) == 0.0);
  }

  TEST_CASE("temperature ramp crosses the guard within one dt") {
    const Protocol p = single_step(1e9, {{Signal::ProbeTemperature, Comparator::GreaterEqual, 373.0,
                                          GuardAction::AdvanceStep, 1.0}});
    for (double dt : {0.5, 1.0, 0.3, 2.0}) {
      CAPTURE(dt);
      ProtocolState st = protocol_start(p);
      while (!st.terminal) {
        const double t = st.total_elapsed + dt;
        st = protocol_next(p, st, {st.step_elapsed + dt, 310.0 + 2.0 * t, 0.0}, dt);
      }
      REQUIRE(st.last_event);
      CHECK(st.last_event->what == "advance");
      CHECK(st.last_event->time >= 31.5 - 1e-9);
      CHECK(st.last_event->time < 31.5 + dt);
    }
  }

  TEST_CASE("impedance guard repeats at half power up to the cap") {
    Protocol p = single_step(600.0, {{Signal::Impedance, Comparator::GreaterEqual, 200.0, GuardAction::RepeatStep, 0.5}});
    p.repeat_cap = 2;
    ProtocolState st = protocol_start(p);
    st = protocol_next(p, st, {10.0, 330.0, 120.0}, 10.0);
    CHECK(st.setpoint == 30.0);
    CHECK(st.step_elapsed == 10.0);
    st = protocol_next(p, st, {20.0, 350.0, 250.0}, 10.0);
    REQUIRE(st.last_event);
    CHECK(st.last_event->what == "repeat");
    CHECK(st.setpoint == 15.0);
    CHECK(st.step_elapsed == 0.0);
    CHECK(st.repeats == 1);
    st = protocol_next(p, st, {10.0, 350.0, 250.0}, 10.0);
    CHECK(st.setpoint == 7.5);
    st = protocol_next(p, st, {10.0, 350.0, 250.0}, 10.0);
    CHECK(st.last_event->what == "repeat-cap");
    CHECK(st.terminal);
  }

  TEST_CASE("set-power fires once and terminate stops") {
    const Protocol p = single_step(100.0, {{Signal::ProbeTemperature, Comparator::GreaterEqual, 373.0, GuardAction::SetPower, 10.0},
                                           {Signal::Impedance, Comparator::Greater, 500.0, GuardAction::TerminateProtocol, 1.0}});
    ProtocolState st = protocol_start(p);
    st = protocol_next(p, st, {1.0, 380.0, 100.0}, 1.0);
    CHECK(st.setpoint == 10.0);
    REQUIRE(st.last_event);
    CHECK(st.last_event->what == "set-power");
    st = protocol_next(p, st, {2.0, 381.0, 100.0}, 1.0);
    CHECK_FALSE(st.last_event);
    // First matching guard wins, so terminate needs the temperature to drop.
    st = protocol_next(p, st, {3.0, 360.0, 600.0}, 1.0);
    CHECK(st.terminal);
    CHECK(st.last_event->what == "terminate");
  }

  TEST_CASE("replayed signal logs reproduce identical state sequences") {
    Protocol p = single_step(120.0, {{Signal::Impedance, Comparator::GreaterEqual, 200.0, GuardAction::RepeatStep, 0.5},
                                     {Signal::ProbeTemperature, Comparator::GreaterEqual, 370.0, GuardAction::SetPower, 12.0}});
    p.steps.push_back(p.steps[0]);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> temp(310.0, 380.0), imp(50.0, 260.0);
    std::vector<ProtocolSignals> log;
    for (int i = 0; i < 500; ++i) log.push_back({0.0, temp(rng), imp(rng)});
    auto play = [&] {
      std::vector<ProtocolState> seq;
      ProtocolState st = protocol_start(p);
      for (auto s : log) {
        s.elapsed = st.step_elapsed + 0.5;
        st = protocol_next(p, st, s, 0.5);
        seq.push_back(st);
      }
      return seq;
    };
    CHECK(play() == play());
  }

  TEST_CASE("protocol validation") {
    Protocol p = single_step(10.0, {});
    CHECK(p.validate().empty());
    p.steps[0].max_duration = -1.0;
    CHECK_FALSE(p.validate().empty());
    Protocol ire = single_step(1.0, {});
    ire.steps[0].setpoint = SetpointKind::PotentialDifference;
    CHECK_FALSE(ire.validate().empty());
    ire.steps[0].anode = "a";
    ire.steps[0].cathode = "b";
    CHECK(ire.validate().empty());
    CHECK(protocol_start(Protocol{}).terminal);
  }
}
