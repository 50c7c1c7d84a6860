#include "mict/protocol.hpp"

#include <cmath>
#include <limits>

namespace mict {

const char* to_string(SetpointKind k) {
  switch (k) {
    case SetpointKind::Power: return "power";
    case SetpointKind::PotentialDifference: return "potential";
    case SetpointKind::Coolant: return "coolant";
  }
  return "?";
}

const char* to_string(Signal s) {
  switch (s) {
    case Signal::ElapsedTime: return "elapsed";
    case Signal::ProbeTemperature: return "temperature";
    case Signal::Impedance: return "impedance";
  }
  return "?";
}

const char* to_string(Comparator c) {
  switch (c) {
    case Comparator::Less: return "lt";
    case Comparator::LessEqual: return "le";
    case Comparator::Greater: return "gt";
    case Comparator::GreaterEqual: return "ge";
  }
  return "?";
}

const char* to_string(GuardAction a) {
  switch (a) {
    case GuardAction::AdvanceStep: return "advance";
    case GuardAction::RepeatStep: return "repeat";
    case GuardAction::TerminateProtocol: return "terminate";
    case GuardAction::SetPower: return "set-power";
  }
  return "?";
}

std::optional<SetpointKind> setpoint_kind_from_string(std::string_view s) {
  if (s == "power") return SetpointKind::Power;
  if (s == "potential") return SetpointKind::PotentialDifference;
  if (s == "coolant") return SetpointKind::Coolant;
  return std::nullopt;
}

std::optional<Signal> signal_from_string(std::string_view s) {
  if (s == "elapsed") return Signal::ElapsedTime;
  if (s == "temperature") return Signal::ProbeTemperature;
  if (s == "impedance") return Signal::Impedance;
  return std::nullopt;
}

std::optional<Comparator> comparator_from_string(std::string_view s) {
  if (s == "lt") return Comparator::Less;
  if (s == "le") return Comparator::LessEqual;
  if (s == "gt") return Comparator::Greater;
  if (s == "ge") return Comparator::GreaterEqual;
  return std::nullopt;
}

std::optional<GuardAction> guard_action_from_string(std::string_view s) {
  if (s == "advance") return GuardAction::AdvanceStep;
  if (s == "repeat") return GuardAction::RepeatStep;
  if (s == "terminate") return GuardAction::TerminateProtocol;
  if (s == "set-power") return GuardAction::SetPower;
  return std::nullopt;
}

bool Guard::holds(double v) const {
  switch (comparator) {
    case Comparator::Less: return v < threshold;
    case Comparator::LessEqual: return v <= threshold;
    case Comparator::Greater: return v > threshold;
    case Comparator::GreaterEqual: return v >= threshold;
  }
  return false;
}

double ProtocolSignals::get(Signal s) const {
  switch (s) {
    case Signal::ElapsedTime: return elapsed;
    case Signal::ProbeTemperature: return probe_temperature;
    case Signal::Impedance: return impedance;
  }
  return 0.0;
}

std::vector<Issue> Protocol::validate() const {
  std::vector<Issue> issues;
  const std::string scope = "protocol:" + id;
  if (repeat_cap < 0) issues.push_back({"protocol", "repeat_cap", scope, "repeat cap must be non-negative"});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const std::string sscope = scope + "/step " + std::to_string(i);
    if (!(s.max_duration > 0.0))
      issues.push_back({"protocol", "max_duration", sscope, "max duration must be positive"});
    if (std::isinf(s.max_duration) && s.guards.empty())
      issues.push_back({"protocol", "max_duration", sscope, "step has neither a guard nor a finite max duration"});
    if (s.setpoint == SetpointKind::PotentialDifference) {
      if (s.anode.empty() || s.cathode.empty())
        issues.push_back({"protocol", "electrodes", sscope, "IRE steps must name one anode and one cathode"});
      else if (s.anode == s.cathode)
        issues.push_back({"protocol", "electrodes", sscope, "anode and cathode must differ"});
      if (s.value && !(*s.value > 0.0))
        issues.push_back({"protocol", "value", sscope, "potential difference must be positive"});
    } else if (!s.anode.empty() || !s.cathode.empty()) {
      issues.push_back({"protocol", "electrodes", sscope, "only potential steps take electrodes"});
    }
    if (s.setpoint != SetpointKind::Power && !s.value)
      issues.push_back({"protocol", "value", sscope, "setpoint value is required"});
    if (s.value && !std::isfinite(*s.value))
      issues.push_back({"protocol", "value", sscope, "setpoint value must be finite"});
    for (const auto& g : s.guards)
      if (!std::isfinite(g.threshold))
        issues.push_back({"protocol", "guard", sscope, "guard threshold must be finite"});
  }
  return issues;
}

double Protocol::max_total_duration() const {
  double t = 0.0;
  for (const auto& s : steps) t += s.max_duration;
  return t;
}

bool Protocol::uses_signal(Signal sig) const {
  for (const auto& s : steps)
    for (const auto& g : s.guards)
      if (g.signal == sig) return true;
  return false;
}

ProtocolState protocol_start(const Protocol& protocol) {
  ProtocolState st;
  if (protocol.steps.empty()) {
    st.terminal = true;
    return st;
  }
  st.setpoint = protocol.steps[0].value.value_or(0.0);
  return st;
}

namespace {

void enter_step(const Protocol& p, ProtocolState& st, int step) {
  st.step = step;
  st.step_elapsed = 0.0;
  st.repeats = 0;
  if (step >= static_cast<int>(p.steps.size())) {
    st.terminal = true;
    st.setpoint = 0.0;
  } else {
    st.setpoint = p.steps[step].value.value_or(0.0);
  }
}

bool duration_reached(double elapsed, double max_duration) {
  return elapsed >= max_duration - 1e-9 * std::max(1.0, max_duration);
}

}  // namespace

ProtocolState protocol_next(const Protocol& protocol, const ProtocolState& state,
                            const ProtocolSignals& signals, double dt) {
  ProtocolState next = state;
  next.last_event.reset();
  if (state.terminal) return next;
  next.step_elapsed += dt;
  next.total_elapsed += dt;
  const ProtocolStep& step = protocol.steps[state.step];
  const int from = state.step;

  auto record = [&](const char* what) {
    next.last_event = ProtocolEvent{next.total_elapsed, from, next.step, what, next.setpoint};
  };

  for (const auto& g : step.guards) {
    if (!g.holds(signals.get(g.signal))) continue;
    switch (g.action) {
      case GuardAction::AdvanceStep:
        enter_step(protocol, next, from + 1);
        record("advance");
        return next;
      case GuardAction::TerminateProtocol:
        next.terminal = true;
        next.setpoint = 0.0;
        record("terminate");
        return next;
      case GuardAction::RepeatStep:
        if (state.repeats < protocol.repeat_cap) {
          next.step_elapsed = 0.0;
          next.repeats = state.repeats + 1;
          next.setpoint = state.setpoint * g.value;
          record("repeat");
        } else {
          enter_step(protocol, next, from + 1);
          record("repeat-cap");
        }
        return next;
      case GuardAction::SetPower:
        if (next.setpoint != g.value) {
          next.setpoint = g.value;
          record("set-power");
        }
        break;
    }
    break;
  }

  if (duration_reached(next.step_elapsed, step.max_duration)) {
    enter_step(protocol, next, from + 1);
    record("duration");
  }
  return next;
}

double step_remaining(const Protocol& protocol, const ProtocolState& state) {
  if (state.terminal) return 0.0;
  return std::max(0.0, protocol.steps[state.step].max_duration - state.step_elapsed);
}

}  // namespace mict
