#include "mict/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <json.hpp>

#include "mict/bioheat.hpp"
#include "mict/electro.hpp"
#include "mict/io_util.hpp"
#include "mict/mesh.hpp"
#include "mict/sources.hpp"
#include "mict/stencil.hpp"
#include "mict/volume_io.hpp"

namespace mict {

namespace fs = std::filesystem;

ScenarioInvalid::ScenarioInvalid(std::vector<Issue> issues)
    : Error(ErrorCode::Validation, "scenario validation failed:\n" + to_string(issues)), issues_(std::move(issues)) {}

std::vector<std::size_t> probe_signal_region(const GridSpec& grid, const std::vector<Probe>& probes,
                                             double probe_radius_mm, double active_length_mm,
                                             double signal_radius_mm) {
  std::set<std::size_t> out;
  for (const auto& p : probes) {
    for (auto i : probe_voxels(grid, p, probe_radius_mm + signal_radius_mm, active_length_mm)) out.insert(i);
    const Vec3 c = grid.continuous_index(p.tip);
    Index3 n;
    for (int a = 0; a < 3; ++a) n[a] = std::clamp(static_cast<int>(std::lround(c[a])), 0, grid.dims[a] - 1);
    out.insert(grid.index(n[0], n[1], n[2]));
  }
  return {out.begin(), out.end()};
}

ProtocolSignals signals_from_state(const ProtocolState& state, double dt, const ScalarField& temperature,
                                   const std::vector<std::size_t>& region, double impedance) {
  ProtocolSignals s;
  s.elapsed = state.step_elapsed + dt;
  s.probe_temperature = -std::numeric_limits<double>::infinity();
  for (auto i : region) s.probe_temperature = std::max(s.probe_temperature, temperature[i]);
  if (region.empty()) s.probe_temperature = 0.0;
  s.impedance = impedance;
  return s;
}

namespace {

double param_or(const ScenarioDoc& d, const std::string& name, double fallback) {
  auto it = d.parameters.find(name);
  if (it == d.parameters.end() || !it->second.value) return fallback;
  return std::get<double>(*it->second.value);
}

struct Setup {
  const ScenarioDoc& doc;
  GridSpec grid;
  LabelMask regions;
  MaterialMap materials;
  std::vector<std::string> voxel_tissue;  // tissue name per material index
  std::vector<double> base_perfusion;     // region perfusion flags
  double probe_radius_mm, active_length_mm;
  CgOptions cg;
};

Setup make_setup(const ScenarioDoc& doc) {
  Setup s{doc, doc.grid, doc.region_mask(), {}, {}, {}, doc.real("probe_radius") * 1e3,
          doc.real("active_length") * 1e3, {}};
  s.cg.relative_tolerance = doc.real("cg_tolerance");
  s.cg.max_iterations = static_cast<int>(doc.integer("cg_max_iterations"));
  std::map<std::string, std::uint16_t> index;
  for (const auto& [name, t] : doc.tissues) {
    index[name] = static_cast<std::uint16_t>(s.materials.tissues.size());
    s.materials.tissues.push_back(t);
    s.voxel_tissue.push_back(name);
  }
  const std::size_t n = s.grid.voxel_count();
  s.materials.grid = s.grid;
  s.materials.index.assign(n, 0);
  s.base_perfusion.assign(n, 1.0);
  std::array<const RegionDef*, 256> by_id{};
  for (const auto& r : doc.regions) by_id[r.id] = &r;
  for (std::size_t i = 0; i < n; ++i) {
    const RegionDef* r = by_id[s.regions[i]];
    if (!r)
      throw ScenarioInvalid({{"invalid-value", "regions", "mask",
                              "label " + std::to_string(s.regions[i]) + " has no region binding"}});
    auto it = index.find(r->tissue);
    if (it == index.end())
      throw ScenarioInvalid({{"missing-parameter", "tissue", "region:" + r->name, "tissue '" + r->tissue + "' undefined"}});
    s.materials.index[i] = it->second;
    if (!r->perfusion) s.base_perfusion[i] = 0.0;
  }
  s.materials.perfusion_scale = s.base_perfusion;
  return s;
}

ThermalBoundary make_boundary(const ScenarioDoc& doc) {
  const double bt = doc.real("boundary_temperature");
  return doc.choice("boundary_condition") == "zero_flux" ? ThermalBoundary::zero_flux() : ThermalBoundary::dirichlet(bt);
}

BioheatOptions make_thermal_options(const ScenarioDoc& doc, const CgOptions& cg) {
  BioheatOptions o;
  o.cg = cg;
  o.body_temperature = doc.real("body_temperature");
  o.picard_tolerance = doc.real("picard_tolerance");
  o.picard_max_iterations = static_cast<int>(doc.integer("picard_max_iterations"));
  return o;
}

std::vector<std::size_t> shell_voxels(const GridSpec& g) {
  std::vector<std::size_t> out;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (i == 0 || j == 0 || k == 0 || i == g.dims[0] - 1 || j == g.dims[1] - 1 || k == g.dims[2] - 1)
          out.push_back(g.index(i, j, k));
  return out;
}

// MWA state for one probe: r-z EM parameters sampled from the 3D solution.
struct MwaProbe {
  const Probe* probe;
  MwaAntennaSpec spec;
  ScalarField q_unit;  // W/m^3 per W of setpoint
};

void mwa_solve(MwaProbe& mp, const Setup& s, const ScalarField& temperature, double body_t) {
  const RzGrid g = mp.spec.grid();
  std::vector<double> eps(g.size()), sigma(g.size());
  const EquipmentDef* equip = s.doc.equipment_for(*mp.probe);
  for (int j = 0; j <= g.nz; ++j)
    for (int i = 0; i <= g.nr; ++i) {
      const Vec3 p = rz_world(*mp.probe, g.r(i), g.z(j));
      double t = body_t;
      std::uint16_t tissue = s.materials.index[0];
      if (s.grid.contains(p)) {
        t = trilinear_sample(temperature, p);
        const Vec3 c = s.grid.continuous_index(p);
        Index3 v;
        for (int a = 0; a < 3; ++a) v[a] = std::clamp(static_cast<int>(std::lround(c[a])), 0, s.grid.dims[a] - 1);
        tissue = s.materials.index[s.grid.index(v[0], v[1], v[2])];
      }
      const std::string& name = s.voxel_tissue[tissue];
      const std::size_t idx = g.index(i, j);
      if (equip && equip->em_tables.count(name)) {
        const EmPoint e = em_params_at(t, equip->em_tables.at(name));
        eps[idx] = e.permittivity;
        sigma[idx] = e.conductivity;
      } else {
        eps[idx] = s.materials.tissues[tissue].relative_permittivity;
        sigma[idx] = s.materials.tissues[tissue].electrical_conductivity;
      }
    }
  MwaAntennaSpec unit = mp.spec;
  unit.power = 1.0;
  const MwaSolution sol = mwa_sar(unit, eps, sigma);
  mp.q_unit = revolve(g, sol.sar, s.grid, *mp.probe);
}

std::string snapshot_name(const std::string& field, double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_t%09.3f.mhd", field.c_str(), t);
  return buf;
}

nlohmann::ordered_json event_json(const ProtocolEvent& e) {
  return {{"time", e.time}, {"from_step", e.from_step}, {"to_step", e.to_step}, {"what", e.what},
          {"setpoint", e.setpoint}};
}

void write_log(const fs::path& dir, const RunResult& r, bool deterministic, const std::string& error) {
  nlohmann::ordered_json j;
  j["status"] = error.empty() ? "ok" : "failed";
  if (!error.empty()) j["error"] = error;
  j["simulated_time"] = r.simulated_time;
  j["protocol_time"] = r.protocol_time;
  if (!deterministic) j["wall_seconds"] = r.wall_seconds;
  j["lesion"] = {{"empty", r.lesion.empty},
                 {"mask_volume_ml", r.lesion.mask_volume_ml},
                 {"surface_volume_ml", r.lesion.surface_volume_ml}};
  j["mwa_solves"] = r.mwa_solves;
  j["potential_solves"] = r.potential_solves;
  auto& ev = j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : r.events) ev.push_back(event_json(e));
  auto& st = j["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : r.steps)
    st.push_back({{"time", s.time},
                  {"step", s.step},
                  {"setpoint", s.setpoint},
                  {"max_temperature", s.max_temperature},
                  {"signal_temperature", s.signals.probe_temperature},
                  {"signal_impedance", s.signals.impedance},
                  {"cg_iterations", s.cg_iterations},
                  {"picard_iterations", s.picard_iterations}});
  j["snapshots"] = r.snapshots;
  write_file_atomic(dir / "run_log.json", j.dump(1) + "\n");
}

ScenarioDoc load_doc(const RunRequest& req) {
  if (req.scenario_path) {
    ScenarioParse p = load_scenario(*req.scenario_path);
    if (!p.ok()) throw ScenarioInvalid(std::move(p.issues));
    return std::move(*p.doc);
  }
  if (!req.scenario) throw Error(ErrorCode::InvalidArgument, "run request names no scenario");
  return *req.scenario;
}

}  // namespace

RunResult run(const RunRequest& req) {
  const auto wall0 = std::chrono::steady_clock::now();
  const ScenarioDoc doc = load_doc(req);
  const double cadence = req.snapshot_every.value_or(doc.outputs.snapshot_every);
  if (cadence < 0.0 || !std::isfinite(cadence)) throw Error(ErrorCode::InvalidArgument, "snapshot cadence must be positive");
  const fs::path out = req.output_dir;
  fs::create_directories(out);

  Setup s = make_setup(doc);
  const GridSpec& grid = s.grid;
  const std::size_t n = grid.voxel_count();
  const Modality mod = doc.modality;
  const bool thermal = mod != Modality::Ire;
  const double dt_max = doc.real("thermal_dt");
  const double body_t = doc.real("body_temperature");
  const double theta = doc.real("lesion_threshold");
  const double t_cap = doc.real("max_simulated_time");
  const BioheatOptions topt = make_thermal_options(doc, s.cg);
  const Protocol& protocol = doc.protocol;

  std::vector<std::string> fields = doc.outputs.fields;
  if (fields.empty())
    fields = thermal ? std::vector<std::string>{"temperature", "damage"} : std::vector<std::string>{"field"};

  RunResult result;
  result.output_dir = out;

  ThermalState ts = initial_state(grid, param_or(doc, "initial_temperature", body_t));
  CellStateField cells = CellStateField::initial(grid, doc.real("initial_vulnerable_fraction"));
  const DeathModelParams death{doc.real("death_forward_rate"), doc.real("death_backward_rate"),
                               doc.real("death_temperature_scale"), theta};
  const bool perfusion_stops = doc.boolean("perfusion_stops_in_lesion");
  std::vector<double> perfusion_scale = s.base_perfusion;
  ScalarField q(grid, Unit::WattPerCubicMetre);

  std::optional<BioheatSolver> solver;
  ThermalBoundary boundary = make_boundary(doc);
  if (thermal && mod != Modality::Cryo) solver.emplace(s.materials, boundary, topt);

  const auto signal_region =
      probe_signal_region(grid, doc.probes, s.probe_radius_mm, s.active_length_mm, doc.real("probe_signal_radius") * 1e3);

  // RFA: unit-power Gaussian source over every tine of every probe.
  ScalarField rfa_unit;
  if (mod == Modality::Rfa) {
    RfaSourceSpec spec;
    spec.width = doc.real("rfa_gaussian_width") * 1e3;
    spec.power = 1.0;
    for (const auto& p : doc.probes)
      for (const auto& pt : tine_points(p, doc.equipment_for(p))) spec.points.push_back(pt);
    rfa_unit = rfa_source(spec, grid);
  }
  // RFA impedance proxy from a temperature dependent potential solve.
  const bool rfa_impedance = mod == Modality::Rfa && protocol.uses_signal(Signal::Impedance) && doc.impedance_trace.empty();
  std::vector<std::size_t> rfa_anode, rfa_cathode;
  if (rfa_impedance) {
    std::set<std::size_t> a;
    for (const auto& p : doc.probes)
      for (auto i : probe_voxels(grid, p, s.probe_radius_mm, s.active_length_mm)) a.insert(i);
    if (a.empty()) a.insert(signal_region.front());
    rfa_anode.assign(a.begin(), a.end());
    for (auto i : shell_voxels(grid))
      if (!a.count(i)) rfa_cathode.push_back(i);
  }
  const double rfa_slope = doc.real("rfa_conductivity_slope");
  const double z_interval = doc.real("impedance_update_interval");
  double next_impedance_solve = 0.0, impedance = 0.0;
  auto rfa_z = [&](const ScalarField& t) {
    ScalarField sigma(grid, Unit::SiemensPerMetre);
    for (std::size_t i = 0; i < n; ++i)
      sigma[i] = std::max(1e-6, s.materials.at(i).electrical_conductivity * (1.0 + rfa_slope * (t[i] - 310.0)));
    const ScalarField phi = solve_potential(sigma, rfa_anode, rfa_cathode, 1.0, s.cg);
    ++result.potential_solves;
    return impedance_proxy(phi, sigma, 1.0, rfa_anode);
  };

  // MWA: per probe r-z solves, re-run when T drifts by the re-solve threshold.
  std::vector<MwaProbe> mwa;
  ScalarField t_at_solve;
  const double resolve_dt = doc.real("mwa_resolve_threshold");
  if (mod == Modality::Mwa) {
    for (const auto& p : doc.probes) {
      MwaProbe mp{&p, {}, {}};
      mp.spec.frequency = doc.real("mwa_frequency");
      mp.spec.slot_offset = doc.real("mwa_slot_offset") * 1e3;
      mp.spec.slot_width = doc.real("mwa_slot_width") * 1e3;
      mp.spec.probe_radius = s.probe_radius_mm;
      mp.spec.resolution = doc.real("mwa_rz_resolution") * 1e3;
      mp.spec.radius = doc.real("mwa_rz_radius") * 1e3;
      mp.spec.behind = doc.real("mwa_rz_behind") * 1e3;
      mp.spec.ahead = doc.real("mwa_rz_ahead") * 1e3;
      mp.spec.reflected_fraction = doc.real("mwa_reflected_fraction");
      mwa.push_back(std::move(mp));
    }
  }
  auto mwa_refresh = [&]() {
    for (auto& mp : mwa) mwa_solve(mp, s, ts.temperature, body_t);
    t_at_solve = ts.temperature;
    ++result.mwa_solves;
  };

  // CRYO: probe voxels held at the coolant temperature while coolant is on.
  std::vector<std::size_t> cryo_voxels;
  ScalarField min_t = ts.temperature;
  std::vector<std::uint8_t> freezes(n, 0), frozen_this_cycle(n, 0);
  const double lethal = doc.real("lethal_temperature");
  const bool two_cycles = doc.boolean("two_freeze_cycles");
  bool coolant_was_on = false;
  if (mod == Modality::Cryo) {
    std::set<std::size_t> v;
    for (const auto& p : doc.probes)
      for (auto i : probe_voxels(grid, p, s.probe_radius_mm, s.active_length_mm)) v.insert(i);
    cryo_voxels.assign(v.begin(), v.end());
  }

  // IRE: one potential solve per protocol step (and per repeat).
  ScalarField sigma_e(grid, Unit::SiemensPerMetre);
  for (std::size_t i = 0; i < n; ++i) sigma_e[i] = s.materials.at(i).electrical_conductivity;
  const FieldFunctional functional =
      doc.choice("ire_functional") == "power_density" ? FieldFunctional::PowerDensity : FieldFunctional::Magnitude;
  FieldAccumulator acc = FieldAccumulator::empty(grid, functional);
  ScalarField last_phi(grid, Unit::Volt);
  std::optional<std::tuple<int, int, double>> ire_key;
  double ire_impedance = 0.0;

  ProtocolState ps = protocol_start(protocol);
  result.events.push_back({0.0, 0, ps.step, "start", ps.setpoint});
  const double total_expected = std::min(protocol.max_total_duration(), t_cap);
  double next_snapshot = cadence > 0.0 ? cadence : std::numeric_limits<double>::infinity();

  auto field_for = [&](const std::string& name) -> std::optional<ScalarField> {
    if (name == "temperature") return ts.temperature;
    if (name == "damage") return cells.dead;
    if (name == "sar") return q;
    if (name == "potential") return last_phi;
    if (name == "field") return acc.maximum;
    if (name == "min_temperature") return min_t;
    return std::nullopt;
  };
  auto write_snapshot = [&](double t) {
    fs::create_directories(out / "snapshots");
    for (const auto& f : fields)
      if (auto v = field_for(f)) {
        const std::string name = "snapshots/" + snapshot_name(f, t);
        write_volume(out / name, to_volume(*v));
        result.snapshots.push_back(name);
      }
  };

  std::string failure;
  try {
    while (!ps.terminal) {
      if (ts.time >= t_cap - 1e-9) {
        result.events.push_back({ps.total_elapsed, ps.step, ps.step, "time-cap", ps.setpoint});
        break;
      }
      const double remaining = step_remaining(protocol, ps);
      double dt = std::min(dt_max, remaining);
      if (!(dt > 0.0)) dt = dt_max;
      dt = std::min(dt, t_cap - ts.time);
      const double setpoint = ps.setpoint;
      StepRecord rec;
      rec.step = ps.step;
      rec.setpoint = setpoint;

      if (mod == Modality::Rfa || mod == Modality::Mwa) {
        if (mod == Modality::Rfa) {
          for (std::size_t i = 0; i < n; ++i) q[i] = setpoint * rfa_unit[i];
        } else {
          bool stale = result.mwa_solves == 0;
          if (!stale)
            for (std::size_t i = 0; i < n && !stale; ++i)
              stale = std::abs(ts.temperature[i] - t_at_solve[i]) > resolve_dt;
          if (stale) mwa_refresh();
          std::fill(q.values().begin(), q.values().end(), 0.0);
          for (const auto& mp : mwa)
            for (std::size_t i = 0; i < n; ++i) q[i] += setpoint * mp.q_unit[i];
        }
        StepStats st;
        ts = solver->step(ts, q, dt, &st);
        rec.cg_iterations = st.cg_iterations;
        advance_death(cells, ts.temperature, death, dt);
        if (perfusion_stops) {
          bool changed = false;
          for (std::size_t i = 0; i < n; ++i)
            if (cells.dead[i] >= theta && perfusion_scale[i] != 0.0) {
              perfusion_scale[i] = 0.0;
              changed = true;
            }
          if (changed) solver->set_perfusion_scale(perfusion_scale);
        }
        if (rfa_impedance) {
          if (ts.time >= next_impedance_solve - 1e-9) {
            impedance = rfa_z(ts.temperature);
            next_impedance_solve = ts.time + z_interval;
          }
        } else if (!doc.impedance_trace.empty()) {
          impedance = doc.trace_impedance(ts.time);
        }
      } else if (mod == Modality::Cryo) {
        const bool on = setpoint >= 0.5;
        ThermalBoundary b = boundary;
        if (on) {
          b.fixed_voxels = cryo_voxels;
          b.fixed_temperature = doc.real("coolant_temperature");
        }
        if (on && !coolant_was_on) std::fill(frozen_this_cycle.begin(), frozen_this_cycle.end(), 0);
        coolant_was_on = on;
        StepStats st;
        ts = step_cryo(ts, s.materials, q, dt, b, topt, &st);
        rec.cg_iterations = st.cg_iterations;
        rec.picard_iterations = st.picard_iterations;
        for (std::size_t i = 0; i < n; ++i) {
          min_t[i] = std::min(min_t[i], ts.temperature[i]);
          if (ts.temperature[i] <= lethal && !frozen_this_cycle[i]) {
            frozen_this_cycle[i] = 1;
            freezes[i] = static_cast<std::uint8_t>(std::min(255, freezes[i] + 1));
          }
        }
        if (!doc.impedance_trace.empty()) impedance = doc.trace_impedance(ts.time + dt);
      } else {
        const ProtocolStep& step = protocol.steps[ps.step];
        const std::tuple<int, int, double> key{ps.step, ps.repeats, setpoint};
        if (!ire_key || *ire_key != key) {
          ElectrodePair pair{step.anode, step.cathode, setpoint, s.active_length_mm, s.probe_radius_mm};
          const Probe* a = doc.probe(step.anode);
          const Probe* c = doc.probe(step.cathode);
          last_phi = solve_potential(sigma_e, pair, *a, *c, s.cg);
          ++result.potential_solves;
          acc = accumulate_field(acc, last_phi, sigma_e);
          ire_impedance = impedance_proxy(last_phi, sigma_e, setpoint,
                                          probe_voxels(grid, *a, s.probe_radius_mm, s.active_length_mm));
          ire_key = key;
        }
        impedance = ire_impedance;
        ts.time += dt;
      }

      const ProtocolSignals sig = signals_from_state(ps, dt, ts.temperature, signal_region, impedance);
      ps = protocol_next(protocol, ps, sig, dt);
      if (ps.last_event) result.events.push_back(*ps.last_event);
      rec.time = ts.time;
      rec.signals = sig;
      rec.max_temperature = ts.temperature.max();
      result.steps.push_back(rec);
      if (req.progress) req.progress({ts.time, total_expected, ps.step, rec.max_temperature});
      while (ts.time >= next_snapshot - 1e-9) {
        write_snapshot(next_snapshot);
        next_snapshot += cadence;
      }
    }
  } catch (const std::exception& e) {
    failure = e.what();
    result.simulated_time = ts.time;
    result.protocol_time = ps.total_elapsed;
    write_log(out, result, req.deterministic, failure);
    throw;
  }
  result.simulated_time = ts.time;
  result.protocol_time = ps.total_elapsed;

  if (mod == Modality::Cryo) {
    LabelMask mask = LabelMask::binary(grid);
    for (std::size_t i = 0; i < n; ++i)
      if (two_cycles ? freezes[i] >= 2 : min_t[i] <= lethal) mask.set(i, 1);
    result.lesion = lesion_from_mask(mask);
  } else if (mod == Modality::Ire) {
    const double e_th = doc.real("ire_field_threshold");
    double thr = e_th;
    if (functional == FieldFunctional::PowerDensity) {
      // Threshold read through the organ conductivity (region 1, else region 0).
      const RegionDef* r = doc.region(1) ? doc.region(1) : doc.region(0);
      const double sref = r && doc.tissues.count(r->tissue) ? doc.tissues.at(r->tissue).electrical_conductivity
                                                            : sigma_e[0];
      thr = 0.5 * sref * e_th * e_th;
    }
    result.lesion = ire_lesion(acc, thr);
  } else {
    result.lesion = extract_lesion(cells, theta);
  }

  for (const auto& f : fields)
    if (auto v = field_for(f)) result.fields.emplace(f, std::move(*v));
  for (const auto& [name, f] : result.fields) write_volume(out / (name + ".mhd"), to_volume(f));
  write_volume(out / "lesion.mhd", to_volume(result.lesion.mask));
  write_obj(out / "lesion.obj", result.lesion.surface);
  write_file_atomic(out / "scenario.resolved.xml", to_xml(doc));
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  write_log(out, result, req.deterministic, "");
  return result;
}

}  // namespace mict
