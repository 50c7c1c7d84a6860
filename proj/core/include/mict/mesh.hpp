#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mict/field.hpp"

namespace mict {

// Indexed triangle list in world mm. Faces are oriented with normals pointing
// out of the enclosed region.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const { return faces.empty(); }
  double area() const;            // mm^2
  double enclosed_volume() const; // mm^3, divergence theorem
  Vec3 area_centroid() const;
  std::array<Vec3, 2> bounds() const;
  TriangleMesh transformed(const RigidTransform& t) const;

  bool operator==(const TriangleMesh&) const = default;
};

// Triangulated boundary of {f >= iso} by marching tetrahedra over a Kuhn
// six-tetrahedron split of every cell. The grid is padded with one layer whose
// value is `outside_value`, so regions touching the shell still yield closed
// surfaces. outside_value must be below iso.
TriangleMesh iso_surface(const ScalarField& f, double iso, double outside_value);

// Surface of a label mask's non-zero region (iso 0.5 on the 0/1 indicator).
TriangleMesh mask_surface(const LabelMask& mask);

// Voxels whose centres lie inside a closed mesh, by ray parity along +x.
LabelMask voxelize(const TriangleMesh& mesh, const GridSpec& grid, const std::string& name = "lesion");

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
// Distances below 1e-9 mm are rounding noise and come back as exactly 0.
inline constexpr double kDistanceFloor = 1e-9;
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// ".obj"-style text: "v x y z" lines then "f i j k" lines (1-based), mm.
std::string to_obj(const TriangleMesh& mesh);
TriangleMesh from_obj(const std::string& text);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);

}  // namespace mict
