#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "mict/error.hpp"
#include "mict/render.hpp"
#include "mict/service.hpp"
#include "mict/volume_io.hpp"

using namespace mict;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Shoelace area of a closed polyline.
double area(const Polyline& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    const auto& u = p.points[i];
    const auto& v = p.points[(i + 1) % p.points.size()];
    a += u[0] * v[1] - v[0] * u[1];
  }
  return 0.5 * std::abs(a);
}

std::pair<int, int> png_size(const std::string& png) {
  REQUIRE(png.size() > 24);
  auto be32 = [&](std::size_t at) {
    return (static_cast<unsigned char>(png[at]) << 24) | (static_cast<unsigned char>(png[at + 1]) << 16) |
           (static_cast<unsigned char>(png[at + 2]) << 8) | static_cast<unsigned char>(png[at + 3]);
  };
  return {be32(16), be32(20)};
}

bool is_png(const std::string& s) { return s.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0; }

GridSpec case_grid() { return fixture::centred_grid(24, 2.0); }

std::string volume_body(const Volume& v) { return serialize_volume_inline(v); }

// Running service on a scratch store with an HTTP client bound to it.
struct Harness {
  fixture::TempDir dir{"mict-service"};
  std::unique_ptr<Service> service;
  std::unique_ptr<httplib::Client> cli;

  explicit Harness(int workers = 2) {
    ServiceConfig c;
    c.data_root = dir.path() / "store";
    c.library = fixture::data_dir() / "library" / "default.xml";
    c.workers = workers;
    c.port = 0;
    service = std::make_unique<Service>(c);
    const int port = service->start();
    cli = std::make_unique<httplib::Client>("127.0.0.1", port);
    cli->set_read_timeout(600, 0);
  }
  ~Harness() { service->stop(); }

  httplib::Result get(const std::string& path) { return cli->Get(path); }
  httplib::Result post(const std::string& path, const json& body = json::object()) {
    return cli->Post(path, body.dump(), "application/json");
  }
  httplib::Result put(const std::string& path, const std::string& body, const char* type) {
    return cli->Put(path, body, type);
  }

  std::string new_case(const std::string& label = "t") {
    auto r = post("/cases", {{"label", label}});
    REQUIRE(r);
    REQUIRE(r->status == 201);
    return json::parse(r->body)["id"];
  }

  // Image, organ and a tumour ball, plus one RFA probe at the centre.
  void populate(const std::string& id) {
    const GridSpec g = case_grid();
    ScalarField img(g, Unit::Dimensionless);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = 100.0 + g.world(i)[0];
    LabelMask organ = LabelMask::binary(g);
    for (std::size_t i = 0; i < organ.size(); ++i) organ.set(i, 1);
    const LabelMask tumour = fixture::ball_mask(g, {0, 0, 0}, 6.0);
    for (const auto& [role, body] : {std::pair<std::string, std::string>{"image", volume_body(to_volume(img))},
                                     {"organ", volume_body(to_volume(organ))},
                                     {"tumor", volume_body(to_volume(tumour))}}) {
      auto r = put("/cases/" + id + "/volumes/" + role, body, "application/octet-stream");
      REQUIRE(r);
      CHECK_MESSAGE(r->status == 200, r->body);
    }
    const json probes = json::array(
        {{{"id", "p1"}, {"kind", "RFA"}, {"tip", {0, 0, 0}}, {"direction", {0, 0, 1}}, {"equipment_id", "rfa-straight"}}});
    auto r = put("/cases/" + id + "/probes", probes.dump(), "application/json");
    REQUIRE(r);
    CHECK_MESSAGE(r->status == 200, r->body);
  }

  static json rfa_overrides(const std::string& power) {
    return {{"composition",
             {{"model", "rfa-pennes"}, {"equipment", "rfa-straight"}, {"organ", "liver"}, {"protocol", "rfa-constant"}}},
            {"parameters", {{"applied_power", power}, {"thermal_dt", "1 s"}}}};
  }

  json submit(const std::string& id, const json& overrides) {
    auto r = post("/cases/" + id + "/runs", overrides);
    REQUIRE(r);
    REQUIRE_MESSAGE(r->status == 202, r->body);
    return json::parse(r->body);
  }

  // Polls until the job leaves queued/running; returns the progress samples.
  std::vector<double> wait(const std::string& job, json* last = nullptr) {
    std::vector<double> seen;
    for (;;) {
      auto r = get("/jobs/" + job);
      REQUIRE(r);
      REQUIRE(r->status == 200);
      const json j = json::parse(r->body);
      seen.push_back(j["progress"]);
      if (j["state"] != "queued" && j["state"] != "running") {
        if (last) *last = j;
        return seen;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  std::string file(const std::string& id, const std::string& rid, const std::string& name) {
    auto r = get("/cases/" + id + "/runs/" + rid + "/files/" + name);
    REQUIRE(r);
    REQUIRE(r->status == 200);
    return r->body;
  }

  fs::path run_dir(const std::string& id, const std::string& rid) const {
    return dir.path() / "store" / "cases" / id / "runs" / rid;
  }
};

}  // namespace

TEST_SUITE("render") {
  TEST_CASE("plane names and windows") {
    for (Plane p : {Plane::Axial, Plane::Coronal, Plane::Sagittal}) CHECK(plane_from_string(to_string(p)) == p);
    CHECK_FALSE(plane_from_string("oblique"));
    CHECK(plane_axes(Plane::Coronal).normal == 1);
    const auto w = parse_window("40,400");
    REQUIRE(w);
    CHECK(w->center == 40.0);
    CHECK(w->width == 400.0);
    for (const char* bad : {"40", "1,0", "a,b", "1,-2", ""}) CHECK_FALSE(parse_window(bad));
  }

  TEST_CASE("slice geometry, windowing and overlays") {
    GridSpec g;
    g.dims = {4, 5, 6};
    ScalarField f(g, Unit::Dimensionless);
    for (int k = 0; k < 6; ++k)
      for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 4; ++i) f.at(i, j, k) = i;
    const RgbImage ax = render_slice(f, Plane::Axial, 2, {1.5, 3.0});
    CHECK(ax.width == 4);
    CHECK(ax.height == 5);
    CHECK(ax.pixels[0] == 0);
    CHECK(ax.pixels[3 * 3] == 255);
    CHECK(ax.pixels[3 * 1] == 85);
    const RgbImage sg = render_slice(f, Plane::Sagittal, 1, {1.5, 3.0});
    CHECK(sg.width == 5);
    CHECK(sg.height == 6);
    CHECK(sg.pixels[0] == 85);
    CHECK(render_slice(f, Plane::Coronal, 4, {0, 1}).height == 6);
    CHECK_THROWS_AS(render_slice(f, Plane::Coronal, 5, {0, 1}), Error);

    GridSpec h = fixture::centred_grid(7, 1.0);
    const ScalarField base(h, Unit::Dimensionless, 0.0);
    const LabelMask box = fixture::box_mask(h, {-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5});
    const RgbImage o = render_slice(base, Plane::Axial, 3, {0.5, 1.0}, &box);
    auto px = [&](const RgbImage& im, int c, int r) { return &im.pixels[(static_cast<std::size_t>(r) * im.width + c) * 3]; };
    CHECK(px(o, 2, 2)[0] == 255);  // outline
    CHECK(px(o, 2, 2)[1] == 0);
    CHECK(px(o, 3, 3)[0] == 0);  // interior keeps the base
    CHECK(px(o, 0, 0)[0] == 0);

    ScalarField hot(h, Unit::Kelvin, 310.0);
    hot.at(3, 3, 3) = 360.0;
    const RgbImage t = render_slice(base, Plane::Axial, 3, {0.5, 1.0}, nullptr, &hot);
    CHECK(px(t, 3, 3)[0] > px(t, 3, 3)[2]);
    CHECK(px(t, 0, 0)[0] == 0);
  }

  TEST_CASE("png is deterministic and well formed") {
    RgbImage im{3, 2, std::vector<std::uint8_t>(18, 7)};
    const std::string a = encode_png(im), b = encode_png(im);
    CHECK(a == b);
    CHECK(is_png(a));
    CHECK(png_size(a) == std::pair{3, 2});
    im.pixels.pop_back();
    CHECK_THROWS_AS(encode_png(im), Error);
  }

  TEST_CASE("contours of single voxels and rectangles") {
    GridSpec g = fixture::centred_grid(9, 2.0);
    LabelMask m = LabelMask::binary(g);
    CHECK(mask_contours(m, Plane::Axial, 4).empty());
    m.set(g.index(4, 4, 4), 1);
    auto one = mask_contours(m, Plane::Axial, 4);
    REQUIRE(one.size() == 1);
    CHECK(one[0].closed);
    CHECK(one[0].points.size() == 4);
    CHECK(area(one[0]) == doctest::Approx(0.5 * 4.0));
    for (const auto& p : one[0].points) CHECK(std::abs(p[0]) + std::abs(p[1]) == doctest::Approx(1.0));
    CHECK(mask_contours(m, Plane::Axial, 3).empty());

    // 3 x 4 rectangle in the coronal plane plus a separate voxel.
    LabelMask r = LabelMask::binary(g);
    for (int i = 1; i < 4; ++i)
      for (int k = 2; k < 6; ++k) r.set(g.index(i, 5, k), 1);
    r.set(g.index(7, 5, 7), 1);
    const auto lines = mask_contours(r, Plane::Coronal, 5);
    REQUIRE(lines.size() == 2);
    double total = 0.0;
    for (const auto& l : lines) {
      CHECK(l.closed);
      total += area(l);
    }
    CHECK(total == doctest::Approx((12.0 - 0.5 + 0.5) * 4.0));
    CHECK_THROWS_AS(mask_contours(r, Plane::Coronal, 9), Error);
  }
}

TEST_SUITE("service") {
  TEST_CASE("case round trip and error codes") {
    Harness h;
    const std::string id = h.new_case("first");
    auto g = h.get("/cases/" + id);
    REQUIRE(g);
    CHECK(g->status == 200);
    const json c = json::parse(g->body);
    CHECK(c["probes"].is_array());
    CHECK(c["probes"].empty());
    CHECK(c["label"] == "first");

    CHECK(h.get("/cases/missing")->status == 404);
    CHECK(h.get("/jobs/j999")->status == 404);
    CHECK(h.get("/cdm/widgets")->status == 404);
    CHECK(h.post("/jobs/j999/cancel")->status == 404);
    CHECK(h.put("/cases/" + id + "/volumes/spleen", "x", "application/octet-stream")->status == 404);
    CHECK(h.get("/cases/" + id + "/runs/r9/slice?index=0")->status == 404);

    auto bad = h.put("/cases/" + id + "/probes", R"([{"kind": "RFA", "tip": [0, 0], "direction": [0, 0, 1]}])",
                     "application/json");
    CHECK(bad->status == 422);
    CHECK(json::parse(bad->body)["issues"][0]["scope"] == "probe:0");
    CHECK(h.put("/cases/" + id + "/volumes/organ", "not a volume", "application/octet-stream")->status == 422);

    auto protos = h.get("/cdm/protocols");
    REQUIRE(protos->status == 200);
    bool demand = false;
    for (const auto& p : json::parse(protos->body))
      if (p["id"] == "rfa-constant") demand = p["demands"] == json::array({"applied_power"});
    CHECK(demand);

    h.populate(id);
    // Prompted power left out: 422 with the full list.
    json o = Harness::rfa_overrides("20 W");
    o["parameters"].erase("applied_power");
    auto r = h.post("/cases/" + id + "/runs", o);
    REQUIRE(r);
    CHECK(r->status == 422);
    bool missing = false;
    const json body = json::parse(r->body);
    for (const auto& i : body["issues"]) missing |= i["parameter"] == "applied_power";
    CHECK_MESSAGE(missing, r->body);
  }

  TEST_CASE("full cycle: upload, probes, run, slices, contours, self-validation") {
    Harness h;
    const std::string id = h.new_case();
    h.populate(id);
    const json job = h.submit(id, Harness::rfa_overrides("20 W"));
    const std::string rid = job["run_id"], jid = job["job_id"];
    // Not finished yet: results are a conflict, not a 404.
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/slice?index=12")->status == 409);
    json last;
    const auto progress = h.wait(jid, &last);
    CHECK_MESSAGE(last["state"] == "done", last.dump());
    CHECK(last["progress"] == 1.0);
    for (std::size_t i = 1; i < progress.size(); ++i) CHECK(progress[i] >= progress[i - 1]);
    CHECK(h.post("/jobs/" + jid + "/cancel")->status == 409);

    const std::string header = h.file(id, rid, "lesion.mhd"), raw = h.file(id, rid, "lesion.raw");
    CHECK(header.find("MET_UCHAR") != std::string::npos);
    CHECK(raw.size() == case_grid().voxel_count());
    CHECK(std::count_if(raw.begin(), raw.end(), [](char b) { return b != 0; }) > 0);
    CHECK(json::parse(h.file(id, rid, "run_log.json"))["status"] == "ok");
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/files/nothing.raw")->status == 404);

    const std::string q = "/cases/" + id + "/runs/" + rid + "/slice?plane=axial&index=12&window=100,40&overlay=lesion";
    auto s1 = h.get(q), s2 = h.get(q);
    REQUIRE(s1->status == 200);
    CHECK(s1->body == s2->body);
    CHECK(is_png(s1->body));
    CHECK(png_size(s1->body) == std::pair{24, 24});
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/slice?plane=sagittal&index=3&overlay=temp")->status == 200);
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/slice?index=24")->status == 422);
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/slice?index=3&window=1,0")->status == 422);
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/slice?index=3&plane=oblique")->status == 422);
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/slice")->status == 422);

    // Contour JSON equals the library call on the stored mask.
    const LabelMask lesion = to_mask(read_volume(h.run_dir(id, rid) / "lesion.mhd"));
    auto cr = h.get("/cases/" + id + "/runs/" + rid + "/contours?plane=coronal&index=12");
    REQUIRE(cr->status == 200);
    const json cj = json::parse(cr->body);
    CHECK(cj["plane"] == "coronal");
    CHECK(cj["axes"] == json::array({"x", "z"}));
    CHECK(cj["unit"] == "mm");
    const auto expect = mask_contours(lesion, Plane::Coronal, 12);
    REQUIRE(cj["polylines"].size() == expect.size());
    CHECK_FALSE(expect.empty());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(cj["polylines"][i]["closed"] == expect[i].closed);
      CHECK(cj["polylines"][i]["points"].get<std::vector<std::array<double, 2>>>() == expect[i].points);
    }
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/contours?index=12&source=segmented")->status == 422);
    CHECK(h.post("/cases/" + id + "/runs/" + rid + "/validate")->status == 422);

    // Self-validation: the simulated lesion uploaded as the segmentation.
    auto up = h.put("/cases/" + id + "/volumes/segmented-lesion", volume_body(to_volume(lesion)), "application/octet-stream");
    REQUIRE(up->status == 200);
    auto v = h.post("/cases/" + id + "/runs/" + rid + "/validate");
    REQUIRE(v);
    REQUIRE_MESSAGE(v->status == 200, v->body);
    const json rep = json::parse(v->body);
    CHECK(rep["alpha"] == 0.0);
    CHECK(rep["phi_s"] == 1.0);
    CHECK(rep["alpha_mm"] == "0.00");
    CHECK(rep["phi_S"] == "1.00");
    CHECK(rep["classification"] == "adequate");
    CHECK(h.get("/cases/" + id + "/runs/" + rid + "/contours?index=12&source=segmented")->status == 200);

    auto runs = json::parse(h.get("/cases/" + id + "/runs")->body);
    CHECK(runs.size() == 1);
    CHECK(runs[0]["state"] == "done");
  }

  TEST_CASE("concurrent runs are isolated and jobs can be cancelled while queued") {
    Harness h(2);
    const std::string a = h.new_case("a"), b = h.new_case("b");
    h.populate(a);
    h.populate(b);
    const json ja = h.submit(a, Harness::rfa_overrides("20 W"));
    const json jb = h.submit(b, Harness::rfa_overrides("5 W"));
    const json jc = h.submit(a, Harness::rfa_overrides("15 W"));  // both workers busy
    auto cancel = h.post("/jobs/" + jc["job_id"].get<std::string>() + "/cancel");
    REQUIRE(cancel);
    CHECK(cancel->status == 200);
    CHECK(json::parse(cancel->body)["error"] == "cancelled");
    json la, lb;
    h.wait(ja["job_id"], &la);
    h.wait(jb["job_id"], &lb);
    CHECK(la["state"] == "done");
    CHECK(lb["state"] == "done");
    CHECK(h.get("/cases/" + a + "/runs/" + jc["run_id"].get<std::string>() + "/slice?index=1")->status == 409);

    // The same request alone gives the same bytes.
    const json solo = h.submit(a, Harness::rfa_overrides("20 W"));
    h.wait(solo["job_id"]);
    h.service->wait_idle();
    const std::string ra = h.file(a, ja["run_id"], "lesion.raw");
    CHECK(h.file(b, jb["run_id"], "lesion.raw").size() == ra.size());
    CHECK(ra == h.file(a, solo["run_id"], "lesion.raw"));
    CHECK(h.file(a, ja["run_id"], "temperature.raw") == h.file(a, solo["run_id"], "temperature.raw"));
    CHECK(h.file(b, jb["run_id"], "temperature.raw") != h.file(a, ja["run_id"], "temperature.raw"));
  }

  TEST_CASE("store survives a restart") {
    fixture::TempDir dir("mict-store");
    ServiceConfig c;
    c.data_root = dir.path();
    c.port = 0;
    std::string id;
    {
      Service s(c);
      httplib::Client cli("127.0.0.1", s.start());
      auto r = cli.Post("/cases", R"({"label": "kept"})", "application/json");
      REQUIRE(r);
      id = json::parse(r->body)["id"];
      s.stop();
    }
    Service s(c);
    httplib::Client cli("127.0.0.1", s.start());
    auto r = cli.Get("/cases/" + id);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["label"] == "kept");
    auto n = cli.Post("/cases", "{}", "application/json");
    CHECK(json::parse(n->body)["id"] != id);
    s.stop();
  }
}
