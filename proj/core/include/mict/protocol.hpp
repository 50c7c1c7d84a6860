#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mict/diagnostics.hpp"

namespace mict {

enum class SetpointKind { Power, PotentialDifference, Coolant };
enum class Signal { ElapsedTime, ProbeTemperature, Impedance };
enum class Comparator { Less, LessEqual, Greater, GreaterEqual };
enum class GuardAction { AdvanceStep, RepeatStep, TerminateProtocol, SetPower };

const char* to_string(SetpointKind k);
const char* to_string(Signal s);
const char* to_string(Comparator c);
const char* to_string(GuardAction a);
std::optional<SetpointKind> setpoint_kind_from_string(std::string_view s);
std::optional<Signal> signal_from_string(std::string_view s);
std::optional<Comparator> comparator_from_string(std::string_view s);
std::optional<GuardAction> guard_action_from_string(std::string_view s);

// `value` is the absolute power (W) for SetPower and the setpoint scale factor
// for RepeatStep; unused otherwise.
struct Guard {
  Signal signal = Signal::ElapsedTime;
  Comparator comparator = Comparator::GreaterEqual;
  double threshold = 0.0;
  GuardAction action = GuardAction::AdvanceStep;
  double value = 1.0;

  bool holds(double signal_value) const;
  bool operator==(const Guard&) const = default;
};

struct ProtocolStep {
  int index = 0;
  SetpointKind setpoint = SetpointKind::Power;
  // W, V, or 1/0 for coolant on/off. Empty power setpoints take the
  // "applied_power" parameter when a scenario is resolved.
  std::optional<double> value;
  std::string anode;    // IRE only
  std::string cathode;  // IRE only
  std::vector<Guard> guards;
  double max_duration = 0.0;  // s; may be +inf when a guard ends the step

  bool operator==(const ProtocolStep&) const = default;
};

struct Protocol {
  std::string id;
  std::vector<ProtocolStep> steps;
  int repeat_cap = 10;

  std::vector<Issue> validate() const;
  double max_total_duration() const;  // sum of step max durations
  bool uses_signal(Signal s) const;
  bool operator==(const Protocol&) const = default;
};

struct ProtocolSignals {
  double elapsed = 0.0;            // s since the current step started
  double probe_temperature = 0.0;  // K
  double impedance = 0.0;          // ohm

  double get(Signal s) const;
  bool operator==(const ProtocolSignals&) const = default;
};

struct ProtocolEvent {
  double time = 0.0;
  int from_step = 0;
  int to_step = 0;
  std::string what;  // "advance", "repeat", "terminate", "set-power", "duration", "start"
  double setpoint = 0.0;

  bool operator==(const ProtocolEvent&) const = default;
};

struct ProtocolState {
  int step = 0;
  double step_elapsed = 0.0;
  double total_elapsed = 0.0;
  double setpoint = 0.0;
  int repeats = 0;
  bool terminal = false;
  std::optional<ProtocolEvent> last_event;

  bool operator==(const ProtocolState&) const = default;
};

ProtocolState protocol_start(const Protocol& protocol);

// Advances time by dt, then fires the first guard (declaration order) that
// holds for `signals`; otherwise ends the step once its max duration has
// elapsed. Repeats beyond the protocol's cap advance instead. Pure.
ProtocolState protocol_next(const Protocol& protocol, const ProtocolState& state,
                            const ProtocolSignals& signals, double dt);

// Time left before the current step reaches its max duration.
double step_remaining(const Protocol& protocol, const ProtocolState& state);

}  // namespace mict
