#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include <unistd.h>

#include "mict/field.hpp"
#include "mict/mesh.hpp"
#include "mict/tissue.hpp"

#ifndef MICT_DATA_DIR
#define MICT_DATA_DIR "data"
#endif

namespace fixture {

using mict::operator+;
using mict::operator-;
using mict::operator*;

inline std::filesystem::path data_dir() { return MICT_DATA_DIR; }

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mict") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline mict::TissueProperties liver() {
  mict::TissueProperties t = mict::make_tissue(1060.0, 3600.0, 0.512, 6.4e4);
  t.electrical_conductivity = 0.333;
  t.relative_permittivity = 43.0;
  return t;
}

// Cubic grid of n voxels per axis with voxel centres symmetric about 0.
inline mict::GridSpec centred_grid(int n, double h) {
  mict::GridSpec g;
  g.dims = {n, n, n};
  g.spacing = {h, h, h};
  const double o = -0.5 * (n - 1) * h;
  g.origin = {o, o, o};
  return g;
}

inline mict::LabelMask ball_mask(const mict::GridSpec& g, const mict::Vec3& c, double r) {
  mict::LabelMask m = mict::LabelMask::binary(g);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (mict::distance(g.world(i), c) <= r) m.set(i, 1);
  return m;
}

inline mict::LabelMask box_mask(const mict::GridSpec& g, const mict::Vec3& lo, const mict::Vec3& hi) {
  mict::LabelMask m = mict::LabelMask::binary(g);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto p = g.world(i);
    if (p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] && p[2] >= lo[2] && p[2] <= hi[2])
      m.set(i, 1);
  }
  return m;
}

// Icosphere by repeated midpoint subdivision, outward oriented.
inline mict::TriangleMesh sphere(double radius, int subdivisions, const mict::Vec3& centre = {0, 0, 0}) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<mict::Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                               {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<std::uint32_t, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& p : v) p = mict::normalized(p);
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(mict::normalized(0.5 * (v[a] + v[b])));
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  mict::TriangleMesh m;
  for (const auto& p : v) m.vertices.push_back(centre + radius * p);
  m.faces = std::move(f);
  if (m.enclosed_volume() < 0)
    for (auto& tri : m.faces) std::swap(tri[1], tri[2]);
  return m;
}

// Minimal single-tissue scenario text. `body` goes inside <scenario>.
inline std::string scenario_xml(const std::string& modality, const std::string& body,
                                const std::string& grid = R"(<grid dims="16 16 16" spacing="2 2 2" origin="-15 -15 -15" unit="mm"/>)") {
  return R"(<?xml version="1.0"?>
<scenario schema_version="1" id="t" modality=")" +
         modality + R"(">
  )" + grid + R"(
  <regions><region id="0" name="background" tissue="liver"/></regions>
  <tissue name="liver">
    <parameter name="density" value="1060" unit="kg/m^3"/>
    <parameter name="specific_heat_capacity" value="3600" unit="J/kg/K"/>
    <parameter name="thermal_conductivity" value="0.512" unit="W/m/K"/>
    <parameter name="perfusion_coefficient" value="6.4e4" unit="W/m^3/K"/>
    <parameter name="electrical_conductivity" value="0.333" unit="S/m"/>
    <parameter name="relative_permittivity" value="43"/>
    <parameter name="latent_heat" value="250" unit="kJ/kg"/>
    <parameter name="solidus_temperature" value="265" unit="K"/>
    <parameter name="liquidus_temperature" value="272" unit="K"/>
  </tissue>
)" + body + "\n</scenario>\n";
}

inline std::string rfa_xml(const std::string& protocol, const std::string& params = "") {
  return scenario_xml("RFA", R"(  <probe id="p1" kind="RFA" tip="0 0 0" direction="0 0 1" unit="mm"/>
  <parameters>)" + params + R"(</parameters>
)" + protocol);
}

}  // namespace fixture
