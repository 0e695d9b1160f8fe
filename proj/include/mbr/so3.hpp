#pragma once

#include <Eigen/Dense>

namespace mbr::so3 {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Body-to-world rotation. Kept as a plain 3x3 matrix; the functions below
/// only ever return proper orthonormal matrices.
using Rotation = Eigen::Matrix3d;

struct AxisAngle {
  Vec3 axis{1.0, 0.0, 0.0};
  double angle = 0.0;  // [0, pi]
};

/// Z-Y-X intrinsic (yaw, then pitch, then roll): R = Rz(yaw) Ry(pitch) Rx(roll).
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

// sin(angle) below this switches to the singular-axis branches.
inline constexpr double kSingularSin = 1e-6;
// |pitch| within this of pi/2 counts as gimbal lock.
inline constexpr double kGimbalTol = 1e-6;

Mat3 skew(const Vec3& v);
Vec3 vee(const Mat3& s);

Rotation rot_x(double angle);
Rotation rot_y(double angle);
Rotation rot_z(double angle);

/// Rodrigues exponential of axis * angle. The axis need not be normalized
/// when passed as a rotation vector.
Rotation exp_map(const Vec3& rotation_vector);
Rotation rotation_from_axis_angle(const AxisAngle& aa);

/// Axis-angle of R_e = R^T R_d. Angle in [0, pi]. At angle 0 the axis is
/// [1,0,0]; near pi it is recovered from the symmetric part of R_e.
AxisAngle rotation_error(const Rotation& r, const Rotation& r_desired);

/// Axis-angle of a single rotation (same conventions as rotation_error).
AxisAngle log_map(const Rotation& r);

EulerAngles euler_from_rotation(const Rotation& r);
Rotation rotation_from_euler(const EulerAngles& e);

/// R' = R exp([omega dt]x), re-orthonormalized.
Rotation integrate_rotation(const Rotation& r, const Vec3& omega, double dt);

/// Nearest rotation via unit-quaternion projection.
Rotation orthonormalize(const Rotation& r);

/// Max abs entry of R^T R - I, and |det R - 1|, whichever is larger.
double orthonormality_error(const Mat3& r);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace mbr::so3
