#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mict/cell_death.hpp"
#include "mict/error.hpp"
#include "mict/protocol.hpp"
#include "mict/scenario.hpp"

namespace mict {

// Scenario that failed validation; carries every issue found.
class ScenarioInvalid : public Error {
 public:
  explicit ScenarioInvalid(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

struct RunProgress {
  double time = 0.0;   // simulated s
  double total = 0.0;  // expected simulated s (protocol max, capped)
  int step = 0;        // protocol step index
  double max_temperature = 0.0;
};

struct RunRequest {
  std::optional<std::filesystem::path> scenario_path;
  std::optional<ScenarioDoc> scenario;  // used when no path is given
  std::filesystem::path output_dir;
  std::optional<double> snapshot_every;  // s; overrides the scenario outputs
  // Leaves wall-clock timing out of the written log so that identical
  // requests produce byte-identical output directories.
  bool deterministic = false;
  std::function<void(const RunProgress&)> progress;
};

// Per thermal step diagnostics.
struct StepRecord {
  double time = 0.0;
  int step = 0;
  double setpoint = 0.0;
  double max_temperature = 0.0;
  ProtocolSignals signals;
  int cg_iterations = 0;
  int picard_iterations = 0;
};

struct RunResult {
  Lesion lesion;
  std::map<std::string, ScalarField> fields;  // final fields, by output name
  std::vector<ProtocolEvent> events;          // time ordered
  std::vector<StepRecord> steps;
  double simulated_time = 0.0;
  double protocol_time = 0.0;  // protocol machine's accumulated time
  double wall_seconds = 0.0;
  int mwa_solves = 0;
  int potential_solves = 0;
  std::vector<std::string> snapshots;  // files relative to the output dir
  std::filesystem::path output_dir;
};

// Loads (if needed) and runs the scenario, then writes the run directory:
// lesion.mhd/.raw, lesion.obj, one volume per requested field, snapshots/,
// run_log.json and scenario.resolved.xml. Throws ScenarioInvalid or the
// solver's error; on a solver error the partial log is still written.
RunResult run(const RunRequest& req);

// Voxels within `signal_radius_mm` of the surface of any probe (the probe
// interior included). Falls back to the voxel nearest each tip.
std::vector<std::size_t> probe_signal_region(const GridSpec& grid, const std::vector<Probe>& probes,
                                             double probe_radius_mm, double active_length_mm,
                                             double signal_radius_mm);

// Protocol signals after a step of length dt from `state`: elapsed time in
// the step, max temperature over `region` and the supplied impedance.
ProtocolSignals signals_from_state(const ProtocolState& state, double dt, const ScalarField& temperature,
                                   const std::vector<std::size_t>& region, double impedance);

// Exit codes shared by the CLI and the service.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitIo = 4;

}  // namespace mict
