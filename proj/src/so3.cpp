#include "mbr/so3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mbr::so3 {

namespace {
constexpr double kPi = std::numbers::pi;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Vec3 vee(const Mat3& s) { return {s(2, 1), s(0, 2), s(1, 0)}; }

Rotation rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Rotation r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

Rotation rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Rotation r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Rotation rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Rotation r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

Rotation exp_map(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Rotation::Identity();
  const Vec3 axis = w / angle;
  const Mat3 k = skew(axis);
  return Rotation::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

Rotation rotation_from_axis_angle(const AxisAngle& aa) {
  return exp_map(aa.axis.normalized() * aa.angle);
}

AxisAngle log_map(const Rotation& re) {
  AxisAngle out;
  const double c = std::clamp((re.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 skew_part(re(2, 1) - re(1, 2), re(0, 2) - re(2, 0), re(1, 0) - re(0, 1));
  // Same angle as acos(c), without its loss of precision near 0 and pi.
  out.angle = std::atan2(0.5 * skew_part.norm(), c);
  const double s = std::sin(out.angle);

  if (s < kSingularSin && out.angle < kPi / 2) {
    out.axis = Vec3::UnitX();
    return out;
  }
  if (out.angle <= kPi / 2) {
    out.axis = (skew_part / (2.0 * s)).normalized();
    return out;
  }
  // Obtuse angles: (R + R^T)/2 - cos(a) I = (1 - cos a) v v^T is well
  // conditioned here, the skew part only fixes the sign.
  const Mat3 b = (0.5 * (re + re.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 0.0));
  axis.normalize();
  if (s >= kSingularSin) {
    if (axis.dot(skew_part) < 0.0) axis = -axis;
  } else {
    // Exactly pi: v and -v describe the same rotation; pick the one whose
    // largest-magnitude component is positive.
    Eigen::Index j = 0;
    axis.cwiseAbs().maxCoeff(&j);
    if (axis(j) < 0.0) axis = -axis;
  }
  out.axis = axis;
  return out;
}

AxisAngle rotation_error(const Rotation& r, const Rotation& r_desired) {
  return log_map(r.transpose() * r_desired);
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

EulerAngles euler_from_rotation(const Rotation& r) {
  EulerAngles e;
  const double s_pitch = std::clamp(-r(2, 0), -1.0, 1.0);
  e.pitch = std::asin(s_pitch);
  if (kPi / 2 - std::abs(e.pitch) < kGimbalTol) {
    // Gimbal lock: roll and yaw share one degree of freedom; fold it into roll.
    e.pitch = std::copysign(kPi / 2, s_pitch);
    e.yaw = 0.0;
    e.roll = wrap_angle(std::atan2(-r(1, 2), r(1, 1)));
    return e;
  }
  e.roll = wrap_angle(std::atan2(r(2, 1), r(2, 2)));
  e.yaw = wrap_angle(std::atan2(r(1, 0), r(0, 0)));
  return e;
}

Rotation rotation_from_euler(const EulerAngles& e) {
  return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll);
}

Rotation orthonormalize(const Rotation& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

Rotation integrate_rotation(const Rotation& r, const Vec3& omega, double dt) {
  const Vec3 w = omega * dt;
  if (w.squaredNorm() == 0.0) return r;
  return orthonormalize(r * exp_map(w));
}

double orthonormality_error(const Mat3& r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

}  // namespace mbr::so3
