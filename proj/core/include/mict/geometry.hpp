#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

namespace mict {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;  // row-major

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

Vec3 normalized(const Vec3& a);
Vec3 operator*(const Mat3& m, const Vec3& v);
Mat3 operator*(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& m);

// Rigid motion x' = R x + t, with R = Rz(rotation[2]) Ry(rotation[1]) Rx(rotation[0]).
// Angles in radians, translation in mm.
struct RigidTransform {
  Vec3 rotation{0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  static RigidTransform identity() { return {}; }
  static RigidTransform from_matrix(const Mat3& r, const Vec3& t);

  Mat3 matrix() const;
  Vec3 apply(const Vec3& p) const;
  RigidTransform inverse() const;
  // Transform equivalent to applying *this first, then `next`.
  RigidTransform then(const RigidTransform& next) const;

  bool operator==(const RigidTransform&) const = default;
};

enum class ProbeKind { Rfa, Mwa, Cryo, IreElectrode };

const char* to_string(ProbeKind kind);
ProbeKind probe_kind_from_string(std::string_view s);  // throws on unknown tag

// Direction points from the skin entry towards the tip; the shaft extends from
// the tip backwards along -direction.
struct Probe {
  std::string id;
  Vec3 tip{0.0, 0.0, 0.0};
  Vec3 direction{0.0, 0.0, 1.0};
  ProbeKind kind = ProbeKind::Rfa;
  std::string equipment_id;

  void validate() const;
  bool operator==(const Probe&) const = default;
};

// Orthonormal pair perpendicular to `axis` (unit).
std::array<Vec3, 2> perpendicular_basis(const Vec3& axis);

}  // namespace mict
