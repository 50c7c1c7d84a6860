#include "mict/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "mict/error.hpp"
#include "mict/io_util.hpp"

namespace mict {

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& f : faces)
    a += 0.5 * norm(cross(vertices[f[1]] - vertices[f[0]], vertices[f[2]] - vertices[f[0]]));
  return a;
}

double TriangleMesh::enclosed_volume() const {
  double v = 0.0;
  for (const auto& f : faces) v += dot(vertices[f[0]], cross(vertices[f[1]], vertices[f[2]]));
  return v / 6.0;
}

Vec3 TriangleMesh::area_centroid() const {
  Vec3 acc{0.0, 0.0, 0.0};
  double total = 0.0;
  for (const auto& f : faces) {
    const Vec3& a = vertices[f[0]];
    const Vec3& b = vertices[f[1]];
    const Vec3& c = vertices[f[2]];
    const double w = 0.5 * norm(cross(b - a, c - a));
    acc = acc + (w / 3.0) * (a + b + c);
    total += w;
  }
  return total > 0.0 ? (1.0 / total) * acc : acc;
}

std::array<Vec3, 2> TriangleMesh::bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::array<Vec3, 2> b{Vec3{inf, inf, inf}, Vec3{-inf, -inf, -inf}};
  for (const auto& v : vertices)
    for (int a = 0; a < 3; ++a) {
      b[0][a] = std::min(b[0][a], v[a]);
      b[1][a] = std::max(b[1][a], v[a]);
    }
  return b;
}

TriangleMesh TriangleMesh::transformed(const RigidTransform& t) const {
  TriangleMesh out = *this;
  const Mat3 r = t.matrix();
  for (auto& v : out.vertices) v = r * v + t.translation;
  return out;
}

namespace {

// Kuhn split: every tetrahedron runs 0 -> e_a -> e_a + e_b -> 7 for one axis
// permutation (a, b, c). Shared faces match between neighbouring cells.
constexpr std::array<std::array<int, 4>, 6> kKuhnTets = {{
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
}};

}  // namespace

TriangleMesh iso_surface(const ScalarField& f, double iso, double outside_value) {
  if (!(outside_value < iso))
    throw Error(ErrorCode::InvalidArgument, "iso_surface: outside value must lie below the iso level");
  const GridSpec& g = f.grid();
  const auto [nx, ny, nz] = g.dims;
  const std::uint64_t px = nx + 2, py = ny + 2, pz = nz + 2;
  const std::uint64_t np = px * py * pz;

  auto value = [&](int i, int j, int k) {
    return g.in_bounds(i, j, k) ? f.at(i, j, k) : outside_value;
  };
  auto padded = [&](int i, int j, int k) -> std::uint64_t {
    return static_cast<std::uint64_t>(i + 1) + px * (static_cast<std::uint64_t>(j + 1) + py * (k + 1));
  };

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

  for (int k = -1; k < nz; ++k)
    for (int j = -1; j < ny; ++j)
      for (int i = -1; i < nx; ++i) {
        double v[8];
        std::uint64_t id[8];
        Vec3 p[8];
        int inside = 0;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
          v[c] = value(ci, cj, ck);
          id[c] = padded(ci, cj, ck);
          p[c] = g.world(ci, cj, ck);
          inside += v[c] >= iso ? 1 : 0;
        }
        if (inside == 0 || inside == 8) continue;

        auto edge = [&](int a, int b) -> std::uint32_t {
          const int lo = id[a] < id[b] ? a : b;
          const int hi = lo == a ? b : a;
          const std::uint64_t key = id[lo] * np + id[hi];
          auto it = edge_vertex.find(key);
          if (it != edge_vertex.end()) return it->second;
          const double t = (iso - v[lo]) / (v[hi] - v[lo]);
          mesh.vertices.push_back(p[lo] + t * (p[hi] - p[lo]));
          const auto vid = static_cast<std::uint32_t>(mesh.vertices.size() - 1);
          edge_vertex.emplace(key, vid);
          return vid;
        };

        for (const auto& tet : kKuhnTets) {
          int in[4], out[4], ni = 0, no = 0;
          for (int c : tet) (v[c] >= iso ? in[ni++] : out[no++]) = c;
          if (ni == 0 || ni == 4) continue;

          Vec3 cin{0, 0, 0}, cout{0, 0, 0};
          for (int a = 0; a < ni; ++a) cin = cin + p[in[a]];
          for (int a = 0; a < no; ++a) cout = cout + p[out[a]];
          const Vec3 outward = (1.0 / no) * cout - (1.0 / ni) * cin;

          auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
            const Vec3 n = cross(mesh.vertices[b] - mesh.vertices[a], mesh.vertices[c] - mesh.vertices[a]);
            if (dot(n, outward) < 0.0) std::swap(b, c);
            mesh.faces.push_back({a, b, c});
          };

          if (ni == 1) {
            emit(edge(in[0], out[0]), edge(in[0], out[1]), edge(in[0], out[2]));
          } else if (ni == 3) {
            emit(edge(out[0], in[0]), edge(out[0], in[1]), edge(out[0], in[2]));
          } else {
            const auto e00 = edge(in[0], out[0]);
            const auto e01 = edge(in[0], out[1]);
            const auto e11 = edge(in[1], out[1]);
            const auto e10 = edge(in[1], out[0]);
            emit(e00, e01, e11);
            emit(e00, e11, e10);
          }
        }
      }
  return mesh;
}

TriangleMesh mask_surface(const LabelMask& mask) {
  ScalarField indicator(mask.grid(), Unit::Dimensionless, 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) indicator[i] = mask[i] != 0 ? 1.0 : 0.0;
  return iso_surface(indicator, 0.5, 0.0);
}

LabelMask voxelize(const TriangleMesh& mesh, const GridSpec& grid, const std::string& name) {
  LabelMask out = LabelMask::binary(grid, name);
  const auto [nx, ny, nz] = grid.dims;
  std::vector<std::vector<double>> crossings(static_cast<std::size_t>(ny) * nz);
  // A fixed sub-voxel offset of the rays keeps them off mesh edges that sit
  // exactly on lattice lines.
  const double oy = 1.37e-6 * grid.spacing[1], oz = 2.71e-6 * grid.spacing[2];
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double ylo = std::min({a[1], b[1], c[1]}), yhi = std::max({a[1], b[1], c[1]});
    const double zlo = std::min({a[2], b[2], c[2]}), zhi = std::max({a[2], b[2], c[2]});
    const int j0 = std::max(0, static_cast<int>(std::ceil((ylo - oy - grid.origin[1]) / grid.spacing[1])));
    const int j1 = std::min(ny - 1, static_cast<int>(std::floor((yhi - oy - grid.origin[1]) / grid.spacing[1])));
    const int k0 = std::max(0, static_cast<int>(std::ceil((zlo - oz - grid.origin[2]) / grid.spacing[2])));
    const int k1 = std::min(nz - 1, static_cast<int>(std::floor((zhi - oz - grid.origin[2]) / grid.spacing[2])));
    const double det = (b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2]);
    if (det == 0.0) continue;
    for (int k = k0; k <= k1; ++k)
      for (int j = j0; j <= j1; ++j) {
        const double y = grid.origin[1] + j * grid.spacing[1] + oy;
        const double z = grid.origin[2] + k * grid.spacing[2] + oz;
        const double u = ((y - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (z - a[2])) / det;
        const double v = ((b[1] - a[1]) * (z - a[2]) - (y - a[1]) * (b[2] - a[2])) / det;
        if (u < 0.0 || v < 0.0 || u + v > 1.0) continue;
        crossings[static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k].push_back(
            a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]));
      }
  }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      auto& xs = crossings[static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k];
      std::sort(xs.begin(), xs.end());
      for (std::size_t q = 0; q + 1 < xs.size(); q += 2) {
        const int i0 = std::max(0, static_cast<int>(std::ceil((xs[q] - grid.origin[0]) / grid.spacing[0])));
        const int i1 =
            std::min(nx - 1, static_cast<int>(std::floor((xs[q + 1] - grid.origin[0]) / grid.spacing[0])));
        for (int i = i0; i <= i1; ++i) out.set(grid.index(i, j, k), 1);
      }
    }
  return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const double d = distance(p, closest_point_on_triangle(p, a, b, c));
  return d < kDistanceFloor ? 0.0 : d;
}

std::string to_obj(const TriangleMesh& mesh) {
  std::string out;
  out += "# mictsim surface, mm\n";
  for (const auto& v : mesh.vertices)
    out += "v " + format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]) + "\n";
  for (const auto& f : mesh.faces)
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  return out;
}

TriangleMesh from_obj(const std::string& text) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v[0] >> v[1] >> v[2]))
        throw Error(ErrorCode::MalformedHeader, "obj line " + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> face{};
      for (auto& idx : face) {
        std::string tok;
        if (!(ls >> tok)) throw Error(ErrorCode::MalformedHeader, "obj line " + std::to_string(lineno) + ": bad face");
        const auto slash = tok.find('/');
        long value = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + (slash == std::string::npos ? tok.size() : slash), value);
        if (res.ec != std::errc{} || value < 1)
          throw Error(ErrorCode::MalformedHeader, "obj line " + std::to_string(lineno) + ": bad face index");
        idx = static_cast<std::uint32_t>(value - 1);
      }
      mesh.faces.push_back(face);
    }
  }
  for (const auto& f : mesh.faces)
    for (auto idx : f)
      if (idx >= mesh.vertices.size()) throw Error(ErrorCode::MalformedHeader, "obj face index out of range");
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  write_file_atomic(path, to_obj(mesh));
}

TriangleMesh read_obj(const std::filesystem::path& path) { return from_obj(read_file(path)); }

}  // namespace mict
