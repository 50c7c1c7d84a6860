#include "mict/validation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

#include "mict/error.hpp"
#include "mict/stencil.hpp"

namespace mict {

SurfaceIndex::SurfaceIndex(const TriangleMesh& mesh, int leaf_size) : mesh_(mesh) {
  if (mesh_.empty()) throw Error(ErrorCode::EmptySurface, "surface has no triangles");
  const auto n = static_cast<std::uint32_t>(mesh_.faces.size());
  std::vector<Vec3> centroids(n);
  items_.resize(n);
  for (std::uint32_t t = 0; t < n; ++t) {
    const auto& f = mesh_.faces[t];
    centroids[t] = (1.0 / 3.0) * (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]);
    items_[t] = t;
  }
  nodes_.reserve(2 * n / std::max(1, leaf_size) + 1);
  build(0, n, centroids, std::max(1, leaf_size));
}

std::uint32_t SurfaceIndex::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids,
                                  int leaf_size) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.lower = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
  node.upper = -1.0 * node.lower;
  Vec3 clo = node.lower, chi = node.upper;
  for (std::uint32_t s = begin; s < end; ++s) {
    for (auto v : mesh_.faces[items_[s]])
      for (int a = 0; a < 3; ++a) {
        node.lower[a] = std::min(node.lower[a], mesh_.vertices[v][a]);
        node.upper[a] = std::max(node.upper[a], mesh_.vertices[v][a]);
      }
    for (int a = 0; a < 3; ++a) {
      clo[a] = std::min(clo[a], centroids[items_[s]][a]);
      chi[a] = std::max(chi[a], centroids[items_[s]][a]);
    }
  }
  if (end - begin <= static_cast<std::uint32_t>(leaf_size)) {
    node.first = begin;
    node.count = end - begin;
    nodes_[id] = node;
    return id;
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (chi[a] - clo[a] > chi[axis] - clo[axis]) axis = a;
  const std::uint32_t mid = begin + (end - begin) / 2;
  // Ties broken by id so the tree does not depend on the sort implementation.
  std::nth_element(items_.begin() + begin, items_.begin() + mid, items_.begin() + end,
                   [&](std::uint32_t x, std::uint32_t y) {
                     return centroids[x][axis] < centroids[y][axis] ||
                            (centroids[x][axis] == centroids[y][axis] && x < y);
                   });
  nodes_[id] = node;
  const std::uint32_t left = build(begin, mid, centroids, leaf_size);
  const std::uint32_t right = build(mid, end, centroids, leaf_size);
  nodes_[id].first = left;
  nodes_[id].right = right;
  return id;
}

namespace {

double box_distance_sq(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double e = p[a] < lo[a] ? lo[a] - p[a] : p[a] > hi[a] ? p[a] - hi[a] : 0.0;
    d += e * e;
  }
  return d;
}

}  // namespace

double SurfaceIndex::distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_sq = best;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_distance_sq(p, node.lower, node.upper) >= best_sq) continue;
    if (node.count > 0) {
      for (std::uint32_t s = node.first; s < node.first + node.count; ++s) {
        const auto& f = mesh_.faces[items_[s]];
        best = std::min(best, point_triangle_distance(p, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                                                      mesh_.vertices[f[2]]));
      }
      best_sq = best * best;
      continue;
    }
    const std::uint32_t left = node.first, right = node.right;
    const double dl = box_distance_sq(p, nodes_[left].lower, nodes_[left].upper);
    const double dr = box_distance_sq(p, nodes_[right].lower, nodes_[right].upper);
    // Push the farther child first so the nearer one is searched first.
    if (dl < dr) {
      stack[top++] = right;
      stack[top++] = left;
    } else {
      stack[top++] = left;
      stack[top++] = right;
    }
  }
  return best;
}

namespace {

struct Patch {
  std::vector<Vec3> centroids;
  std::vector<double> areas;
  double total = 0.0;
};

Patch patches(const TriangleMesh& m) {
  if (m.empty()) throw Error(ErrorCode::EmptySurface, "surface has no triangles");
  Patch p;
  for (const auto& f : m.faces) {
    const Vec3& a = m.vertices[f[0]];
    const Vec3& b = m.vertices[f[1]];
    const Vec3& c = m.vertices[f[2]];
    p.centroids.push_back((1.0 / 3.0) * (a + b + c));
    const double area = 0.5 * norm(cross(b - a, c - a));
    p.areas.push_back(area);
    p.total += area;
  }
  if (!(p.total > 0.0)) throw Error(ErrorCode::EmptySurface, "surface has zero area");
  return p;
}

double alpha_of(const Patch& p, const SurfaceIndex& index, const RigidTransform& t, std::vector<double>* dist = nullptr) {
  double acc = 0.0;
  if (dist) dist->resize(p.centroids.size());
  for (std::size_t i = 0; i < p.centroids.size(); ++i) {
    const double d = index.distance(t.apply(p.centroids[i]));
    if (dist) (*dist)[i] = d;
    acc += d * p.areas[i];
  }
  return acc / p.total;
}

}  // namespace

double surface_alpha(const TriangleMesh& s, const SurfaceIndex& sigma) {
  return alpha_of(patches(s), sigma, RigidTransform::identity());
}

double surface_alpha(const TriangleMesh& s, const TriangleMesh& sigma) {
  const Patch p = patches(s);
  return alpha_of(p, SurfaceIndex(sigma), RigidTransform::identity());
}

double target_overlap(const LabelMask& s, const LabelMask& sigma) {
  if (!(s.grid() == sigma.grid())) throw Error(ErrorCode::ShapeMismatch, "overlap masks do not share one grid");
  std::size_t ns = 0, both = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i]) continue;
    ++ns;
    if (sigma[i]) ++both;
  }
  if (ns == 0) throw Error(ErrorCode::EmptySurface, "segmented lesion is empty");
  return static_cast<double>(both) / static_cast<double>(ns);
}

std::string classify(double alpha, double phi, const ClassificationThresholds& t) {
  const bool large = alpha > t.alpha_over;
  if (phi < t.phi_under) return large ? "mixed" : "underestimation";
  if (large) return phi >= t.phi_over ? "overestimation" : "mixed";
  return "adequate";
}

namespace {

using Params = std::array<double, 6>;  // rotation deg xyz, translation mm xyz

RigidTransform transform_of(const Params& x, const Vec3& centre, double max_rot) {
  RigidTransform rot;
  for (int a = 0; a < 3; ++a) rot.rotation[a] = std::clamp(x[a], -max_rot, max_rot) * std::numbers::pi / 180.0;
  const Mat3 r = rot.matrix();
  const Vec3 rc = r * centre;
  rot.translation = centre + Vec3{x[3], x[4], x[5]} - rc;
  return rot;
}

struct SimplexResult {
  Params best;
  double value;
  int iterations;
};

template <typename Fn>
SimplexResult nelder_mead(Fn&& f, const Params& start, const Params& step, int max_iter) {
  constexpr int n = 6;
  std::array<Params, n + 1> pts;
  std::array<double, n + 1> val;
  pts[0] = start;
  for (int i = 0; i < n; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += step[i];
  }
  for (int i = 0; i <= n; ++i) val[i] = f(pts[i]);
  int it = 0;
  for (; it < max_iter; ++it) {
    std::array<int, n + 1> order;
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];
    double size = 0.0;
    for (int i = 0; i <= n; ++i)
      for (int d = 0; d < n; ++d) size = std::max(size, std::abs(pts[i][d] - pts[best][d]));
    if (val[worst] - val[best] < 1e-8 && size < 1e-4) break;
    Params centroid{};
    for (int i = 0; i <= n; ++i)
      if (i != worst)
        for (int d = 0; d < n; ++d) centroid[d] += pts[i][d] / n;
    auto along = [&](double t) {
      Params p;
      for (int d = 0; d < n; ++d) p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
      return p;
    };
    const Params xr = along(-1.0);
    const double fr = f(xr);
    if (fr < val[best]) {
      const Params xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) pts[worst] = xe, val[worst] = fe;
      else pts[worst] = xr, val[worst] = fr;
    } else if (fr < val[second]) {
      pts[worst] = xr, val[worst] = fr;
    } else {
      const bool outside = fr < val[worst];
      const Params xc = along(outside ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < (outside ? fr : val[worst])) {
        pts[worst] = xc, val[worst] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (int d = 0; d < n; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
          val[i] = f(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (val[i] < val[best]) best = i;
  return {pts[best], val[best], it};
}

}  // namespace

ValidationReport minimize_alpha(const TriangleMesh& s_surface, const TriangleMesh& sigma_surface,
                                const LabelMask* s_mask, const LabelMask* sigma_mask,
                                const ValidationOptions& options) {
  const Patch patch = patches(s_surface);
  const SurfaceIndex index(sigma_surface);
  const Vec3 centre = s_surface.area_centroid();
  const double max_rot = options.max_rotation_deg;

  ValidationReport report;
  report.alpha_before = alpha_of(patch, index, RigidTransform::identity());
  report.alpha = report.alpha_before;
  report.best_transform = RigidTransform::identity();

  Patch coarse;
  const std::size_t stride =
      (patch.areas.size() + options.search_triangles - 1) / std::max<std::size_t>(1, options.search_triangles);
  for (std::size_t i = 0; i < patch.areas.size(); i += std::max<std::size_t>(1, stride)) {
    coarse.centroids.push_back(patch.centroids[i]);
    coarse.areas.push_back(patch.areas[i]);
    coarse.total += patch.areas[i];
  }
  auto objective = [&](const Params& x) { return alpha_of(coarse, index, transform_of(x, centre, max_rot)); };
  try {
    const Vec3 shift = sigma_surface.area_centroid() - centre;
    const Params start{0, 0, 0, shift[0], shift[1], shift[2]};
    const double rs = options.initial_rotation_step_deg, ts = options.initial_translation_step;
    const Params step{rs, rs, rs, ts, ts, ts};
    SimplexResult best = nelder_mead(objective, start, step, options.max_iterations);
    report.iterations = best.iterations;
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int r = 0; r < options.restarts; ++r) {
      Params p = best.best;
      for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a] + 2.0 * rs * unit(rng), -max_rot, max_rot);
      for (int a = 3; a < 6; ++a) p[a] += ts * unit(rng);
      const SimplexResult cand = nelder_mead(objective, p, step, options.max_iterations);
      report.iterations += cand.iterations;
      if (cand.value < best.value) best = cand;
    }
    const RigidTransform t = transform_of(best.best, centre, max_rot);
    const double exact = alpha_of(patch, index, t);
    if (std::isfinite(exact) && exact < report.alpha) {
      report.alpha = exact;
      report.best_transform = t;
    }
  } catch (const std::exception&) {
    report.optimizer_ok = false;
  }

  std::vector<double> dist;
  alpha_of(patch, index, report.best_transform, &dist);
  const double max_d = dist.empty() ? 0.0 : *std::max_element(dist.begin(), dist.end());
  report.histogram.area_fraction.assign(static_cast<std::size_t>(max_d / report.histogram.bin_width) + 1, 0.0);
  for (std::size_t i = 0; i < dist.size(); ++i)
    report.histogram.area_fraction[static_cast<std::size_t>(dist[i] / report.histogram.bin_width)] +=
        patch.areas[i] / patch.total;

  if (s_mask && sigma_mask) {
    report.phi_s = target_overlap(*s_mask, *sigma_mask);
    report.phi_s_registered = target_overlap(transform_mask(*s_mask, report.best_transform), *sigma_mask);
  }
  // phi_S is unregistered, so it is paired with the unregistered alpha: both
  // then describe the lesion where the simulation put it.
  report.classification = classify(report.alpha_before, report.phi_s, options.thresholds);
  return report;
}

std::string three_sig(double v) {
  char buf[64];
  if (v == 0.0 || !std::isfinite(v)) {
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
  int mag = static_cast<int>(std::floor(std::log10(std::abs(v))));
  // Rounding can carry into the next decade (9.996 -> 10.0).
  const double step = std::pow(10.0, mag - 2);
  if (std::abs(std::round(v / step) * step) >= std::pow(10.0, mag + 1)) ++mag;
  const int decimals = 2 - mag;
  if (decimals >= 0) {
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  } else {
    const double scale = std::pow(10.0, -decimals);
    std::snprintf(buf, sizeof buf, "%.0f", std::round(v / scale) * scale);
  }
  return buf;
}

std::string report_json(const ValidationReport& r) {
  nlohmann::ordered_json j;
  j["alpha_mm"] = three_sig(r.alpha);
  j["alpha_before_mm"] = three_sig(r.alpha_before);
  j["phi_S"] = three_sig(r.phi_s);
  j["phi_S_registered"] = r.phi_s_registered ? nlohmann::ordered_json(three_sig(*r.phi_s_registered)) : nullptr;
  j["alpha"] = r.alpha;
  j["alpha_before"] = r.alpha_before;
  j["phi_s"] = r.phi_s;
  j["classification"] = r.classification;
  j["best_transform"] = {{"rotation_rad", r.best_transform.rotation}, {"translation_mm", r.best_transform.translation}};
  j["iterations"] = r.iterations;
  j["optimizer_ok"] = r.optimizer_ok;
  j["histogram"] = {{"bin_width_mm", r.histogram.bin_width}, {"area_fraction", r.histogram.area_fraction}};
  return j.dump(2) + "\n";
}

std::string report_text(const ValidationReport& r) {
  std::string out = "alpha " + three_sig(r.alpha) + " mm  phi_S " + three_sig(r.phi_s) + "\n";
  out += "alpha (unregistered) " + three_sig(r.alpha_before) + " mm";
  if (r.phi_s_registered) out += "  phi_S (registered) " + three_sig(*r.phi_s_registered);
  out += "\nclassification " + r.classification + "\n";
  return out;
}

}  // namespace mict
