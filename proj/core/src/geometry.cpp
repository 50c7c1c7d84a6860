#include "mict/geometry.hpp"

#include <algorithm>

#include "mict/error.hpp"

namespace mict {

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero vector");
  return (1.0 / n) * a;
}

Vec3 operator*(const Mat3& m, const Vec3& v) { return {dot(m[0], v), dot(m[1], v), dot(m[2], v)}; }

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return r;
}

Mat3 transpose(const Mat3& m) {
  return {Vec3{m[0][0], m[1][0], m[2][0]}, Vec3{m[0][1], m[1][1], m[2][1]},
          Vec3{m[0][2], m[1][2], m[2][2]}};
}

Mat3 RigidTransform::matrix() const {
  const double ca = std::cos(rotation[0]), sa = std::sin(rotation[0]);
  const double cb = std::cos(rotation[1]), sb = std::sin(rotation[1]);
  const double cg = std::cos(rotation[2]), sg = std::sin(rotation[2]);
  return {Vec3{cg * cb, cg * sb * sa - sg * ca, cg * sb * ca + sg * sa},
          Vec3{sg * cb, sg * sb * sa + cg * ca, sg * sb * ca - cg * sa},
          Vec3{-sb, cb * sa, cb * ca}};
}

RigidTransform RigidTransform::from_matrix(const Mat3& r, const Vec3& t) {
  RigidTransform out;
  const double sb = std::clamp(-r[2][0], -1.0, 1.0);
  out.rotation[1] = std::asin(sb);
  if (std::abs(sb) < 1.0 - 1e-12) {
    out.rotation[0] = std::atan2(r[2][1], r[2][2]);
    out.rotation[2] = std::atan2(r[1][0], r[0][0]);
  } else {
    // gimbal lock: fold the roll into yaw
    out.rotation[0] = 0.0;
    out.rotation[2] = std::atan2(-r[0][1], r[1][1]);
  }
  out.translation = t;
  return out;
}

Vec3 RigidTransform::apply(const Vec3& p) const { return matrix() * p + translation; }

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = transpose(matrix());
  return from_matrix(rt, -1.0 * (rt * translation));
}

RigidTransform RigidTransform::then(const RigidTransform& next) const {
  const Mat3 r2 = next.matrix();
  return from_matrix(r2 * matrix(), r2 * translation + next.translation);
}

const char* to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::Rfa: return "RFA";
    case ProbeKind::Mwa: return "MWA";
    case ProbeKind::Cryo: return "CRYO";
    case ProbeKind::IreElectrode: return "IRE-electrode";
  }
  return "?";
}

ProbeKind probe_kind_from_string(std::string_view s) {
  if (s == "RFA") return ProbeKind::Rfa;
  if (s == "MWA") return ProbeKind::Mwa;
  if (s == "CRYO") return ProbeKind::Cryo;
  if (s == "IRE-electrode" || s == "IRE") return ProbeKind::IreElectrode;
  throw Error(ErrorCode::InvalidArgument, "unknown probe kind '" + std::string(s) + "'");
}

void Probe::validate() const {
  if (std::abs(norm(direction) - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "probe '" + id + "' direction is not a unit vector");
  for (double v : tip)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "probe '" + id + "' tip is not finite");
}

std::array<Vec3, 2> perpendicular_basis(const Vec3& axis) {
  const Vec3 helper = std::abs(axis[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const Vec3 u = normalized(cross(axis, helper));
  return {u, cross(axis, u)};
}

}  // namespace mict
