#include "mict/service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mict/cdm.hpp"
#include "mict/io_util.hpp"
#include "mict/mesh.hpp"
#include "mict/render.hpp"
#include "mict/runner.hpp"
#include "mict/scenario.hpp"
#include "mict/validation.hpp"
#include "mict/volume_io.hpp"
#include "xml_util.hpp"

namespace mict {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kRoles = {"image", "organ", "tumor", "vessels", "tace", "segmented-lesion"};

struct RegionRole {
  const char* role;
  std::uint8_t id;
  const char* name;
  const char* tissue;
  bool perfusion;
};
// Later entries paint over earlier ones.
const RegionRole kRegionRoles[] = {{"organ", 1, "organ", "organ", true},
                                   {"vessels", 3, "vessels", "vessel", true},
                                   {"tumor", 2, "tumor", "tumor", true},
                                   {"tace", 4, "tace", "tace", false}};

// HTTP-level failure: status plus body.
struct HttpError {
  int status;
  std::string message;
  std::vector<Issue> issues;
};

json issues_json(const std::vector<Issue>& issues) {
  json a = json::array();
  for (const auto& i : issues)
    a.push_back({{"kind", i.kind}, {"parameter", i.parameter}, {"scope", i.scope}, {"message", i.message}});
  return a;
}

json grid_json(const GridSpec& g) {
  return {{"dims", g.dims}, {"spacing", g.spacing}, {"origin", g.origin}};
}

std::string format_param(const json& v, std::string& unit) {
  unit.clear();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto sp = s.find(' ');
    if (sp == std::string::npos) return s;
    unit = s.substr(sp + 1);
    return s.substr(0, sp);
  }
  if (v.is_object()) {
    unit = v.value("unit", "");
    std::string u2;
    return format_param(v.at("value"), u2);
  }
  throw HttpError{422, "parameter values must be numbers, booleans or strings", {}};
}

std::string triple(const Vec3& v) {
  return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]);
}

Vec3 vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw HttpError{422, std::string(what) + " must be three numbers", {{"invalid-value", what, "probes", "expected [x, y, z]"}}};
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw HttpError{422, std::string(what) + " must be numeric", {{"invalid-value", what, "probes", "non-numeric"}}};
    v[a] = j[a].get<double>();
  }
  return v;
}

struct Job {
  std::string id;
  std::string case_id;
  std::string run_id;
  std::string state = "queued";  // queued | running | done | failed
  double progress = 0.0;
  double simulated_time = 0.0;
  double total_time = 0.0;
  std::string error;
  ScenarioDoc doc;
};

struct CaseEntry {
  std::mutex m;
  fs::path dir;
  json meta;
};

}  // namespace

struct Service::Impl {
  ServiceConfig cfg;
  ComponentLibrary library;
  httplib::Server server;
  std::thread server_thread;
  bool bound = false;

  std::mutex store_m;
  std::map<std::string, std::shared_ptr<CaseEntry>> cases;
  int next_case = 1;

  std::mutex jobs_m;
  std::condition_variable jobs_cv, idle_cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::deque<std::string> queue;
  int next_job = 1;
  int busy = 0;
  bool stopping = false;
  std::vector<std::thread> workers;

  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
    if (!cfg.library.empty()) {
      LibraryLoad l = load_library(cfg.library);
      if (!l.ok()) throw Error(ErrorCode::Library, "component library is invalid:\n" + to_string(l.issues));
      library = std::move(l.library);
    }
    fs::create_directories(cfg.data_root / "cases");
    load_store();
    routes();
    const int n = std::max(1, cfg.workers);
    for (int i = 0; i < n; ++i) workers.emplace_back([this] { worker(); });
  }

  ~Impl() {
    {
      std::lock_guard lk(jobs_m);
      stopping = true;
    }
    jobs_cv.notify_all();
    for (auto& w : workers) w.join();
    server.stop();
    if (server_thread.joinable()) server_thread.join();
  }

  // ---- store ----

  void load_store() {
    for (const auto& e : fs::directory_iterator(cfg.data_root / "cases")) {
      const fs::path meta = e.path() / "case.json";
      if (!fs::exists(meta)) continue;
      auto c = std::make_shared<CaseEntry>();
      c->dir = e.path();
      c->meta = json::parse(read_file(meta));
      for (auto& r : c->meta["runs"])
        if (r["state"] == "queued" || r["state"] == "running") {
          r["state"] = "failed";
          r["error"] = "interrupted by a service restart";
        }
      const std::string id = c->meta["id"];
      if (id.size() > 1 && id[0] == 'c') next_case = std::max(next_case, std::stoi(id.substr(1)) + 1);
      cases[id] = c;
    }
  }

  void save(CaseEntry& c) { write_file_atomic(c.dir / "case.json", c.meta.dump(2) + "\n"); }

  std::shared_ptr<CaseEntry> find_case(const std::string& id) {
    std::lock_guard lk(store_m);
    auto it = cases.find(id);
    if (it == cases.end()) throw HttpError{404, "unknown case '" + id + "'", {}};
    return it->second;
  }

  static json& find_run(CaseEntry& c, const std::string& rid) {
    for (auto& r : c.meta["runs"])
      if (r["id"] == rid) return r;
    throw HttpError{404, "unknown run '" + rid + "'", {}};
  }

  static std::optional<Volume> case_volume(const CaseEntry& c, const std::string& role) {
    if (!c.meta["volumes"].contains(role)) return std::nullopt;
    return read_volume(c.dir / c.meta["volumes"][role].get<std::string>());
  }

  // ---- scenario assembly ----

  std::string build_scenario(CaseEntry& c, const json& o, const fs::path& run_dir) {
    std::optional<GridSpec> grid;
    std::map<std::string, Volume> vols;
    for (const auto& role : kRoles)
      if (auto v = case_volume(c, role)) {
        if (!grid) grid = v->grid;
        vols.emplace(role, std::move(*v));
      }
    std::string modality;
    if (o.contains("modality")) modality = o["modality"].get<std::string>();
    else if (!c.meta["probes"].empty()) {
      const std::string k = c.meta["probes"][0]["kind"];
      modality = k == "IRE-electrode" ? "IRE" : k;
    }
    std::string x = "<?xml version=\"1.0\"?>\n<scenario schema_version=\"1\" id=\"" + xml::escape(c.meta["id"].get<std::string>()) +
                    "\" modality=\"" + xml::escape(modality) + "\">\n";
    if (o.contains("composition")) {
      const json& k = o["composition"];
      x += "  <composition library=\"service\" model=\"" + xml::escape(k.value("model", "")) + "\" equipment=\"" +
           xml::escape(k.value("equipment", "")) + "\" organ=\"" + xml::escape(k.value("organ", "")) + "\" protocol=\"" +
           xml::escape(k.value("protocol", "")) + "\"/>\n";
    }
    const json tissues = o.value("tissues", json::object());
    auto tissue_for = [&](const std::string& region, const std::string& fallback) {
      return tissues.contains(region) ? tissues[region].get<std::string>() : fallback;
    };
    if (grid) {
      Legend legend{{0, "background"}};
      std::vector<std::uint8_t> labels(grid->voxel_count(), 0);
      for (const auto& rr : kRegionRoles) {
        auto it = vols.find(rr.role);
        if (it == vols.end()) continue;
        for (std::size_t i = 0; i < labels.size(); ++i)
          if (it->second.values[i] != 0.0) labels[i] = rr.id;
      }
      std::set<std::uint8_t> present(labels.begin(), labels.end());
      for (const auto& rr : kRegionRoles)
        if (present.count(rr.id)) legend[rr.id] = rr.name;
      write_volume(run_dir / "regions.mhd", to_volume(LabelMask(*grid, labels, legend)));
      x += "  <regions mask=\"regions.mhd\">\n";
      x += "    <region id=\"0\" name=\"background\" tissue=\"" + xml::escape(tissue_for("background", "background")) + "\"/>\n";
      for (const auto& rr : kRegionRoles)
        if (present.count(rr.id))
          x += "    <region id=\"" + std::to_string(rr.id) + "\" name=\"" + rr.name + "\" tissue=\"" +
               xml::escape(tissue_for(rr.name, rr.tissue)) + "\" perfusion=\"" + (rr.perfusion ? "true" : "false") +
               "\"/>\n";
      x += "  </regions>\n";
    } else {
      x += "  <regions>\n    <region id=\"0\" name=\"background\" tissue=\"background\"/>\n  </regions>\n";
    }
    for (const auto& p : c.meta["probes"]) {
      x += "  <probe id=\"" + xml::escape(p["id"].get<std::string>()) + "\" kind=\"" + xml::escape(p["kind"].get<std::string>()) + "\"";
      if (!p.value("equipment_id", "").empty()) x += " equipment=\"" + xml::escape(p["equipment_id"].get<std::string>()) + "\"";
      x += " tip=\"" + triple(p["tip"].get<Vec3>()) + "\" direction=\"" + triple(p["direction"].get<Vec3>()) +
           "\" unit=\"mm\"/>\n";
    }
    x += "  <parameters>\n";
    if (o.contains("parameters"))
      for (const auto& [name, v] : o["parameters"].items()) {
        std::string unit;
        const std::string value = format_param(v, unit);
        x += "    <parameter name=\"" + xml::escape(name) + "\" value=\"" + xml::escape(value) + "\"";
        if (!unit.empty()) x += " unit=\"" + xml::escape(unit) + "\"";
        x += "/>\n";
      }
    x += "  </parameters>\n";
    if (o.contains("protocol_xml")) x += o["protocol_xml"].get<std::string>() + "\n";
    if (o.contains("impedance_trace")) {
      x += "  <impedance_trace>\n";
      for (const auto& pt : o["impedance_trace"])
        x += "    <point time=\"" + format_double(pt.at(0).get<double>()) + " s\" value=\"" +
             format_double(pt.at(1).get<double>()) + " ohm\"/>\n";
      x += "  </impedance_trace>\n";
    }
    if (o.contains("outputs")) {
      const json& out = o["outputs"];
      std::string fields;
      for (const auto& f : out.value("fields", json::array())) fields += (fields.empty() ? "" : " ") + f.get<std::string>();
      x += "  <outputs snapshot_every=\"" + format_double(out.value("snapshot_every", 0.0)) + " s\" fields=\"" +
           xml::escape(fields) + "\"/>\n";
    }
    x += "</scenario>\n";
    return x;
  }

  // ---- handlers ----

  json case_json(const CaseEntry& c) { return c.meta; }

  json post_case(const std::string& body) {
    json in = body.empty() ? json::object() : json::parse(body, nullptr, false);
    if (in.is_discarded() || !in.is_object()) throw HttpError{422, "body must be a JSON object", {}};
    auto c = std::make_shared<CaseEntry>();
    std::string id;
    {
      std::lock_guard lk(store_m);
      id = "c" + std::to_string(next_case++);
      c->dir = cfg.data_root / "cases" / id;
      fs::create_directories(c->dir / "volumes");
      fs::create_directories(c->dir / "runs");
      c->meta = {{"id", id},
                 {"label", in.value("label", "")},
                 {"probes", json::array()},
                 {"volumes", json::object()},
                 {"runs", json::array()}};
      save(*c);
      cases[id] = c;
    }
    return c->meta;
  }

  json put_volume(const std::string& cid, const std::string& role, const std::string& body) {
    auto c = find_case(cid);
    if (std::find(kRoles.begin(), kRoles.end(), role) == kRoles.end())
      throw HttpError{404, "unknown volume role '" + role + "'", {}};
    Volume v;
    try {
      v = parse_volume_inline(body);
      v.grid.validate();
    } catch (const Error& e) {
      throw HttpError{422, "volume rejected", {{std::string(to_string(e.code())), "volume", "volume:" + role, e.what()}}};
    }
    if (role != "image" && v.type != ElementType::UInt8)
      throw HttpError{422, "mask volumes must be 8-bit", {{"invalid-value", "ElementType", "volume:" + role, "masks must be MET_UCHAR"}}};
    std::lock_guard lk(c->m);
    for (const auto& [other, file] : c->meta["volumes"].items()) {
      if (other == role) continue;
      const Volume o = read_volume(c->dir / file.get<std::string>());
      if (!(o.grid == v.grid))
        throw HttpError{422, "volume grid differs from the case grid",
                        {{"invalid-value", "grid", "volume:" + role, "grid differs from volume '" + other + "'"}}};
    }
    const std::string file = "volumes/" + role + ".mhd";
    write_volume(c->dir / file, v);
    c->meta["volumes"][role] = file;
    save(*c);
    return {{"role", role}, {"grid", grid_json(v.grid)}, {"element_type", to_string(v.type)}};
  }

  json put_probes(const std::string& cid, const std::string& body) {
    auto c = find_case(cid);
    const json in = json::parse(body, nullptr, false);
    if (in.is_discarded() || !in.is_array()) throw HttpError{422, "body must be a JSON array of probes", {}};
    json out = json::array();
    std::vector<Issue> issues;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const json& p = in[i];
      const std::string scope = "probe:" + std::to_string(i);
      try {
        Probe pr;
        pr.id = p.value("id", "p" + std::to_string(i + 1));
        pr.tip = vec_from(p.value("tip", json()), "tip");
        pr.direction = normalized(vec_from(p.value("direction", json()), "direction"));
        pr.kind = probe_kind_from_string(p.value("kind", ""));
        pr.equipment_id = p.value("equipment_id", "");
        pr.validate();
        out.push_back({{"id", pr.id}, {"tip", pr.tip}, {"direction", pr.direction}, {"kind", to_string(pr.kind)},
                       {"equipment_id", pr.equipment_id}});
      } catch (const HttpError& e) {
        for (auto is : e.issues) issues.push_back({is.kind, is.parameter, scope, is.message});
      } catch (const std::exception& e) {
        issues.push_back({"invalid-value", "probe", scope, e.what()});
      }
    }
    if (!issues.empty()) throw HttpError{422, "probe list rejected", issues};
    std::lock_guard lk(c->m);
    c->meta["probes"] = out;
    save(*c);
    return out;
  }

  json cdm_list(const std::string& what) {
    ComponentKind kind;
    if (what == "equipment") kind = ComponentKind::Equipment;
    else if (what == "protocols") kind = ComponentKind::Protocol;
    else if (what == "models") kind = ComponentKind::NumericalModel;
    else if (what == "organs") kind = ComponentKind::Organ;
    else throw HttpError{404, "unknown component list '" + what + "'", {}};
    json out = json::array();
    for (const ComponentDef* d : library.of_kind(kind)) {
      json params = json::array(), demands = json::array();
      for (const auto& p : d->parameters) {
        json jp = {{"name", p.name}, {"kind", to_string(p.kind)}, {"unit", canonical_unit(p.dimension)},
                   {"prompt", p.prompt}};
        if (p.value) jp["value"] = format_value(*p.value, p.dimension);
        if (!p.choices.empty()) jp["choices"] = p.choices;
        params.push_back(jp);
        if (p.prompt && (!p.value || p.overridable)) demands.push_back(p.name);
      }
      out.push_back({{"id", d->id}, {"kind", to_string(d->kind)}, {"tags", d->tags}, {"parameters", params},
                     {"demands", demands}});
    }
    return out;
  }

  json post_run(const std::string& cid, const std::string& body) {
    auto c = find_case(cid);
    json o = body.empty() ? json::object() : json::parse(body, nullptr, false);
    if (o.is_discarded() || !o.is_object()) throw HttpError{422, "body must be a JSON object", {}};
    std::lock_guard lk(c->m);
    const std::string rid = "r" + std::to_string(c->meta["runs"].size() + 1);
    const fs::path run_dir = c->dir / "runs" / rid;
    fs::create_directories(run_dir);
    std::string xml_text = o.contains("scenario_xml") ? o["scenario_xml"].get<std::string>() : build_scenario(*c, o, run_dir);
    ParseContext ctx;
    ctx.base_dir = o.contains("scenario_xml") ? c->dir : run_dir;
    ctx.library = &library;
    ScenarioParse parse = parse_scenario(xml_text, ctx);
    if (!parse.ok()) {
      std::error_code ec;
      fs::remove_all(run_dir, ec);
      throw HttpError{422, "scenario validation failed", parse.issues};
    }
    write_file_atomic(run_dir / "scenario.xml", xml_text);
    auto job = std::make_shared<Job>();
    job->case_id = cid;
    job->run_id = rid;
    job->doc = std::move(*parse.doc);
    job->total_time = std::min(job->doc.protocol.max_total_duration(), job->doc.real("max_simulated_time"));
    {
      std::lock_guard jl(jobs_m);
      job->id = "j" + std::to_string(next_job++);
      jobs[job->id] = job;
      queue.push_back(job->id);
    }
    c->meta["runs"].push_back({{"id", rid}, {"job", job->id}, {"state", "queued"}, {"overrides", o}});
    save(*c);
    jobs_cv.notify_one();
    return {{"run_id", rid}, {"job_id", job->id}, {"state", "queued"}};
  }

  json job_json(const Job& j) {
    json out = {{"id", j.id},       {"case_id", j.case_id},          {"run_id", j.run_id},
                {"state", j.state}, {"progress", j.progress},        {"simulated_time", j.simulated_time},
                {"total_time", j.total_time}};
    if (!j.error.empty()) out["error"] = j.error;
    return out;
  }

  json get_job(const std::string& id) {
    std::lock_guard lk(jobs_m);
    auto it = jobs.find(id);
    if (it == jobs.end()) throw HttpError{404, "unknown job '" + id + "'", {}};
    return job_json(*it->second);
  }

  json cancel_job(const std::string& id) {
    std::shared_ptr<Job> job;
    {
      std::lock_guard lk(jobs_m);
      auto it = jobs.find(id);
      if (it == jobs.end()) throw HttpError{404, "unknown job '" + id + "'", {}};
      job = it->second;
      if (job->state != "queued") throw HttpError{409, "job is " + job->state + "; only queued jobs can be cancelled", {}};
      job->state = "failed";
      job->error = "cancelled";
      queue.erase(std::remove(queue.begin(), queue.end(), id), queue.end());
    }
    set_run_state(*job, "failed", "cancelled");
    idle_cv.notify_all();
    return get_job(id);
  }

  void set_run_state(const Job& job, const std::string& state, const std::string& error) {
    auto c = find_case(job.case_id);
    std::lock_guard lk(c->m);
    json& r = find_run(*c, job.run_id);
    r["state"] = state;
    if (!error.empty()) r["error"] = error;
    save(*c);
  }

  void worker() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lk(jobs_m);
        jobs_cv.wait(lk, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = jobs[queue.front()];
        queue.pop_front();
        job->state = "running";
        ++busy;
      }
      set_run_state(*job, "running", "");
      std::string state = "done", error;
      try {
        RunRequest req;
        req.scenario = job->doc;
        req.output_dir = cfg.data_root / "cases" / job->case_id / "runs" / job->run_id;
        req.deterministic = true;
        req.progress = [&](const RunProgress& p) {
          std::lock_guard lk(jobs_m);
          job->simulated_time = p.time;
          const double f = p.total > 0.0 ? std::min(1.0, p.time / p.total) : 1.0;
          job->progress = std::max(job->progress, f);
        };
        run(req);
      } catch (const std::exception& e) {
        state = "failed";
        error = e.what();
      }
      {
        std::lock_guard lk(jobs_m);
        if (state == "done") job->progress = 1.0;
        job->state = state;
        job->error = error;
      }
      set_run_state(*job, state, error);
      {
        std::lock_guard lk(jobs_m);
        --busy;
      }
      idle_cv.notify_all();
    }
  }

  // Run directory of a finished run; 409 while it is still pending.
  fs::path done_run(const std::string& cid, const std::string& rid, std::shared_ptr<CaseEntry>& c) {
    c = find_case(cid);
    std::lock_guard lk(c->m);
    const json& r = find_run(*c, rid);
    const std::string st = r["state"];
    if (st != "done") throw HttpError{409, "run " + rid + " is " + st, {}};
    return c->dir / "runs" / rid;
  }

  static int int_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) throw HttpError{422, std::string("missing query parameter '") + name + "'", {}};
    double v;
    if (!parse_double(req.get_param_value(name), v) || v != std::floor(v))
      throw HttpError{422, std::string("query parameter '") + name + "' must be an integer", {}};
    return static_cast<int>(v);
  }

  static Plane plane_param(const httplib::Request& req) {
    const auto p = plane_from_string(req.has_param("plane") ? req.get_param_value("plane") : "axial");
    if (!p) throw HttpError{422, "plane must be axial, coronal or sagittal", {}};
    return *p;
  }

  std::string slice(const std::string& cid, const std::string& rid, const httplib::Request& req) {
    std::shared_ptr<CaseEntry> c;
    const fs::path dir = done_run(cid, rid, c);
    const Plane plane = plane_param(req);
    const int index = int_param(req, "index");
    const Volume lesion_v = read_volume(dir / "lesion.mhd");
    const GridSpec& grid = lesion_v.grid;
    std::optional<ScalarField> base;
    {
      std::lock_guard lk(c->m);
      if (auto img = case_volume(*c, "image"); img && img->grid == grid) base = to_field(*img, Unit::Dimensionless);
    }
    std::optional<ScalarField> temperature;
    if (fs::exists(dir / "temperature.mhd")) temperature = to_field(read_volume(dir / "temperature.mhd"), Unit::Kelvin);
    if (!base) base = temperature ? *temperature : to_field(lesion_v, Unit::Dimensionless);
    Window w{0.5 * (base->min() + base->max()), std::max(base->max() - base->min(), 1e-9)};
    if (req.has_param("window")) {
      const auto pw = parse_window(req.get_param_value("window"));
      if (!pw) throw HttpError{422, "window must be 'center,width' with width > 0", {}};
      w = *pw;
    }
    const std::string overlay = req.has_param("overlay") ? req.get_param_value("overlay") : "";
    const LabelMask lesion = to_mask(lesion_v);
    if (!overlay.empty() && overlay != "lesion" && overlay != "temp")
      throw HttpError{422, "overlay must be lesion or temp", {}};
    if (overlay == "temp" && !temperature) throw HttpError{422, "run has no temperature field", {}};
    const PlaneAxes ax = plane_axes(plane);
    if (index < 0 || index >= grid.dims[ax.normal]) throw HttpError{422, "slice index out of range", {}};
    return encode_png(render_slice(*base, plane, index, w, overlay == "lesion" ? &lesion : nullptr,
                                   overlay == "temp" ? &*temperature : nullptr));
  }

  json contours(const std::string& cid, const std::string& rid, const httplib::Request& req) {
    std::shared_ptr<CaseEntry> c;
    const fs::path dir = done_run(cid, rid, c);
    const Plane plane = plane_param(req);
    const int index = int_param(req, "index");
    const std::string source = req.has_param("source") ? req.get_param_value("source") : "lesion";
    LabelMask mask;
    if (source == "lesion") {
      mask = to_mask(read_volume(dir / "lesion.mhd"));
    } else if (source == "segmented") {
      std::lock_guard lk(c->m);
      auto v = case_volume(*c, "segmented-lesion");
      if (!v) throw HttpError{422, "case has no segmented-lesion volume", {}};
      mask = to_mask(*v);
    } else {
      throw HttpError{422, "source must be lesion or segmented", {}};
    }
    const PlaneAxes ax = plane_axes(plane);
    if (index < 0 || index >= mask.grid().dims[ax.normal]) throw HttpError{422, "slice index out of range", {}};
    const char* names = "xyz";
    json lines = json::array();
    for (const auto& pl : mask_contours(mask, plane, index))
      lines.push_back({{"closed", pl.closed}, {"points", pl.points}});
    return {{"plane", to_string(plane)},
            {"index", index},
            {"source", source},
            {"axes", {std::string(1, names[ax.u]), std::string(1, names[ax.v])}},
            {"unit", "mm"},
            {"polylines", lines}};
  }

  std::string validate_run(const std::string& cid, const std::string& rid) {
    std::shared_ptr<CaseEntry> c;
    const fs::path dir = done_run(cid, rid, c);
    std::optional<Volume> seg;
    {
      std::lock_guard lk(c->m);
      seg = case_volume(*c, "segmented-lesion");
    }
    if (!seg) throw HttpError{422, "case has no segmented-lesion volume", {{"missing-parameter", "segmented-lesion", "case", "upload the segmented lesion first"}}};
    const LabelMask sim = to_mask(read_volume(dir / "lesion.mhd"));
    LabelMask s = LabelMask::binary(seg->grid);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (seg->values[i] != 0.0) s.set(i, 1);
    if (!(s.grid() == sim.grid())) throw HttpError{422, "segmented lesion grid differs from the run grid", {}};
    if (s.empty()) throw HttpError{422, "segmented lesion is empty", {}};
    if (sim.empty()) throw HttpError{422, "simulated lesion is empty", {{"empty-lesion", "lesion", "run:" + rid, "no voxel reached the lesion criterion"}}};
    // Both sides as mask surfaces so that identical masks compare equal.
    const ValidationReport rep = minimize_alpha(mask_surface(s), mask_surface(sim), &s, &sim);
    const std::string out = report_json(rep);
    write_file_atomic(dir / "validation.json", out);
    return out;
  }

  // ---- routing ----

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const HttpError& e) {
      res.status = e.status;
      res.set_content(json{{"error", e.message}, {"issues", issues_json(e.issues)}}.dump(2), "application/json");
    } catch (const json::exception& e) {
      res.status = 422;
      res.set_content(json{{"error", std::string("bad JSON: ") + e.what()}, {"issues", json::array()}}.dump(2),
                      "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}, {"issues", json::array()}}.dump(2), "application/json");
    }
  }

  static void send(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(2), "application/json");
  }

  void routes() {
    server.set_payload_max_length(std::size_t{1} << 31);
    server.Post("/cases", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, post_case(q.body), 201); });
    });
    server.Get("/cases", [this](const httplib::Request&, httplib::Response& r) {
      guarded(r, [&] {
        json out = json::array();
        std::lock_guard lk(store_m);
        for (const auto& [id, c] : cases) out.push_back(id);
        send(r, out);
      });
    });
    server.Get(R"(/cases/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] {
        auto c = find_case(q.matches[1]);
        std::lock_guard lk(c->m);
        send(r, c->meta);
      });
    });
    server.Put(R"(/cases/([^/]+)/volumes/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, put_volume(q.matches[1], q.matches[2], q.body)); });
    });
    server.Get(R"(/cases/([^/]+)/volumes/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] {
        auto c = find_case(q.matches[1]);
        std::lock_guard lk(c->m);
        auto v = case_volume(*c, q.matches[2]);
        if (!v) throw HttpError{404, "no volume '" + std::string(q.matches[2]) + "'", {}};
        r.set_content(serialize_volume_inline(*v), "application/octet-stream");
      });
    });
    server.Put(R"(/cases/([^/]+)/probes)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, put_probes(q.matches[1], q.body)); });
    });
    server.Get(R"(/cases/([^/]+)/probes)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] {
        auto c = find_case(q.matches[1]);
        std::lock_guard lk(c->m);
        send(r, c->meta["probes"]);
      });
    });
    server.Get(R"(/cdm/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, cdm_list(q.matches[1])); });
    });
    server.Post(R"(/cases/([^/]+)/runs)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, post_run(q.matches[1], q.body), 202); });
    });
    server.Get(R"(/cases/([^/]+)/runs)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] {
        auto c = find_case(q.matches[1]);
        std::lock_guard lk(c->m);
        send(r, c->meta["runs"]);
      });
    });
    server.Get(R"(/cases/([^/]+)/runs/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] {
        auto c = find_case(q.matches[1]);
        std::lock_guard lk(c->m);
        send(r, find_run(*c, q.matches[2]));
      });
    });
    server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, get_job(q.matches[1])); });
    });
    server.Post(R"(/jobs/([^/]+)/cancel)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, cancel_job(q.matches[1])); });
    });
    server.Get(R"(/cases/([^/]+)/runs/([^/]+)/slice)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { r.set_content(slice(q.matches[1], q.matches[2], q), "image/png"); });
    });
    server.Get(R"(/cases/([^/]+)/runs/([^/]+)/contours)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { send(r, contours(q.matches[1], q.matches[2], q)); });
    });
    server.Get(R"(/cases/([^/]+)/runs/([^/]+)/files/([A-Za-z0-9_.\-]+))",
               [this](const httplib::Request& q, httplib::Response& r) {
                 guarded(r, [&] {
                   std::shared_ptr<CaseEntry> c;
                   const fs::path dir = done_run(q.matches[1], q.matches[2], c);
                   const fs::path file = dir / std::string(q.matches[3]);
                   if (!fs::is_regular_file(file)) throw HttpError{404, "no file '" + std::string(q.matches[3]) + "'", {}};
                   const std::string ext = file.extension().string();
                   r.set_content(read_file(file), ext == ".json" ? "application/json"
                                                 : ext == ".obj" || ext == ".mhd" || ext == ".xml" ? "text/plain"
                                                                                                 : "application/octet-stream");
                 });
               });
    server.Post(R"(/cases/([^/]+)/runs/([^/]+)/validate)", [this](const httplib::Request& q, httplib::Response& r) {
      guarded(r, [&] { r.set_content(validate_run(q.matches[1], q.matches[2]), "application/json"); });
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() = default;

int Service::bind() {
  int port = impl_->cfg.port;
  if (port == 0) port = impl_->server.bind_to_any_port(impl_->cfg.host);
  else if (!impl_->server.bind_to_port(impl_->cfg.host, port)) port = -1;
  if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
  impl_->cfg.port = port;
  impl_->bound = true;
  return port;
}

void Service::serve() {
  if (!impl_->bound) bind();
  impl_->server.listen_after_bind();
}

int Service::start() {
  const int port = bind();
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::wait_idle() {
  std::unique_lock lk(impl_->jobs_m);
  impl_->idle_cv.wait(lk, [&] { return impl_->queue.empty() && impl_->busy == 0; });
}

}  // namespace mict
