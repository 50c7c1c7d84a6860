// mictsim command-line front end: run, validate, cdm validate, serve.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "mict/cdm.hpp"
#include "mict/mesh.hpp"
#include "mict/runner.hpp"
#include "mict/service.hpp"
#include "mict/io_util.hpp"
#include "mict/validation.hpp"
#include "mict/volume_io.hpp"

namespace fs = std::filesystem;
using namespace mict;

namespace {

int cmd_run(const std::string& scenario, const std::string& out, double snapshot_every, bool deterministic) {
  RunRequest req;
  req.scenario_path = scenario;
  req.output_dir = out;
  if (snapshot_every > 0.0) req.snapshot_every = snapshot_every;
  req.deterministic = deterministic;
  double next_print = 0.0;
  req.progress = [&](const RunProgress& p) {
    if (p.time + 1e-9 < next_print && p.time < p.total - 1e-9) return;
    std::fprintf(stderr, "t=%.1f step=%d maxT=%.2f\n", p.time, p.step, p.max_temperature);
    next_print = p.time + 10.0;
  };
  try {
    const RunResult r = run(req);
    std::printf("lesion %s: %.3f ml (mask), %.3f ml (surface); simulated %.1f s in %.1f s\n",
                r.lesion.empty ? "empty" : "ok", r.lesion.mask_volume_ml, r.lesion.surface_volume_ml,
                r.simulated_time, r.wall_seconds);
    return kExitOk;
  } catch (const ScenarioInvalid& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitValidation;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s (residual %g)\n", e.what(), e.final_residual());
    return kExitSolver;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::Validation ? kExitValidation : kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
}

bool is_surface(const fs::path& p) { return p.extension() == ".obj"; }

// Grid at 0.5 mm around both surfaces, used when neither side is a mask.
GridSpec covering_grid(const TriangleMesh& a, const TriangleMesh& b) {
  const auto ba = a.bounds(), bb = b.bounds();
  GridSpec g;
  g.spacing = {0.5, 0.5, 0.5};
  for (int i = 0; i < 3; ++i) {
    const double lo = std::min(ba[0][i], bb[0][i]) - 1.0, hi = std::max(ba[1][i], bb[1][i]) + 1.0;
    g.origin[i] = lo;
    g.dims[i] = static_cast<int>(std::ceil((hi - lo) / 0.5)) + 1;
  }
  return g;
}

int cmd_validate(const std::string& simulated, const std::string& segmented, const std::string& report) {
  try {
    const TriangleMesh sigma = read_obj(simulated);
    TriangleMesh s_surface;
    LabelMask s_mask, sigma_mask;
    if (is_surface(segmented)) {
      s_surface = read_obj(segmented);
      const GridSpec g = covering_grid(s_surface, sigma);
      s_mask = voxelize(s_surface, g);
    } else {
      const Volume v = read_volume(segmented);
      s_mask = LabelMask::binary(v.grid);
      for (std::size_t i = 0; i < v.values.size(); ++i)
        if (v.values[i] != 0.0) s_mask.set(i, 1);
      s_surface = mask_surface(s_mask);
    }
    sigma_mask = voxelize(sigma, s_mask.grid());
    const ValidationReport r = minimize_alpha(s_surface, sigma, &s_mask, &sigma_mask);
    std::fputs(report_text(r).c_str(), stdout);
    if (!report.empty()) write_file_atomic(report, fs::path(report).extension() == ".json" ? report_json(r) : report_text(r));
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}

int cmd_cdm_validate(const std::string& path) {
  const LibraryLoad l = load_library(path);
  std::vector<Issue> issues = l.issues;
  if (l.ok()) {
    for (auto& i : l.library.validate()) issues.push_back(i);
    for (auto& i : check_compositions(l.library)) issues.push_back(i);
  }
  for (const auto& i : issues) std::printf("%s\n", to_string(i).c_str());
  if (issues.empty()) std::printf("%s: %zu components, no composition errors\n", path.c_str(), l.library.components().size());
  return issues.empty() ? kExitOk : kExitValidation;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mictsim: image-guided thermal ablation planning simulator"};
  app.require_subcommand(1);

  std::string scenario, out;
  double snapshot_every = 0.0;
  bool deterministic = false;
  auto* run_cmd = app.add_subcommand("run", "run a scenario");
  run_cmd->add_option("scenario", scenario, "scenario .xml")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output", out, "output directory")->required();
  run_cmd->add_option("--snapshot-every", snapshot_every, "snapshot cadence, simulated s")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--deterministic", deterministic, "leave wall-clock timing out of the run log");

  std::string simulated, segmented, report;
  auto* val_cmd = app.add_subcommand("validate", "compare a simulated lesion with a segmented one");
  val_cmd->add_option("--simulated", simulated, "simulated lesion surface (.obj)")->required()->check(CLI::ExistingFile);
  val_cmd->add_option("--segmented", segmented, "segmented lesion mask (.mhd) or surface (.obj)")
      ->required()
      ->check(CLI::ExistingFile);
  val_cmd->add_option("--report", report, "report file (.json for JSON, text otherwise)");

  std::string library;
  auto* cdm_cmd = app.add_subcommand("cdm", "component library tools");
  cdm_cmd->require_subcommand(1);
  auto* cdm_val = cdm_cmd->add_subcommand("validate", "check a library and all its compositions");
  cdm_val->add_option("library", library, "library .xml")->required()->check(CLI::ExistingFile);

  ServiceConfig svc;
  svc.data_root = env_or("MICT_DATA_ROOT", "mict-data");
  svc.host = env_or("MICT_HOST", "127.0.0.1");
  svc.port = std::atoi(env_or("MICT_PORT", "8080").c_str());
  svc.workers = std::atoi(env_or("MICT_WORKERS", "2").c_str());
  std::string data_root = svc.data_root.string(), lib_path = env_or("MICT_LIBRARY", "");
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP planning service");
  serve_cmd->add_option("--host", svc.host, "listen address");
  serve_cmd->add_option("--port", svc.port, "listen port");
  serve_cmd->add_option("--data", data_root, "case store root");
  serve_cmd->add_option("--library", lib_path, "component library .xml");
  serve_cmd->add_option("--workers", svc.workers, "concurrent runs")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) return cmd_run(scenario, out, snapshot_every, deterministic);
  if (*val_cmd) return cmd_validate(simulated, segmented, report);
  if (*cdm_cmd) return cmd_cdm_validate(library);
  if (*serve_cmd) {
    svc.data_root = data_root;
    svc.library = lib_path;
    try {
      Service service(svc);
      const int port = service.bind();
      std::fprintf(stderr, "listening on %s:%d\n", svc.host.c_str(), port);
      service.serve();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitIo;
    }
  }
  return kExitOk;
}
