#include "mbr/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbr {

namespace {

// F = g_m (a eta^2 + b eta + c)
constexpr double kPolyA = -0.0292;
constexpr double kPolyB = 0.1118;
constexpr double kPolyC = -0.0039;

double motor_poly(double x) { return (kPolyA * x + kPolyB) * x + kPolyC; }

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void BlimpParams::validate() const {
  require(gondola_mass > 0 && battery_mass > 0 && envelope_mass > 0, "masses must be positive");
  require(helium_density > 0 && air_density > 0 && volume > 0, "densities and volume must be positive");
  require(gondola_half_height > 0 && envelope_half_height > 0, "half-heights must be positive");
  require(extra_weight >= 0, "extra weight must be nonnegative");
  require(split >= 0 && split <= 1, "split must lie in [0, 1]");
  require(motor_gain > 0, "motor gain must be positive");
  require(gravity > 0, "gravity must be positive");
  require((inertia.array() > 0).all(), "inertia must be positive");
  require((added_mass.array() >= 0).all(), "added mass must be nonnegative");
  require((drag_linear.array() >= 0).all() && (drag_angular.array() >= 0).all(),
          "drag coefficients must be nonnegative");
  require(!thrusters.empty(), "at least one thruster is required");
  for (const auto& t : thrusters) {
    require(std::abs(t.direction.norm() - 1.0) < 1e-9, "thruster directions must be unit vectors");
  }
  require((torque_limit.array() > 0).all(), "torque limits must be positive");
}

BlimpParams default_params() {
  BlimpParams p;
  p.inertia = Vec3(0.10, 0.10, 0.03);
  const double translational = 0.5 * p.air_density * p.volume;
  p.added_mass << translational, translational, translational, 0.01, 0.01, 0.003;
  p.drag_linear = Vec3(2.0, 2.0, 2.0);
  p.drag_angular = Vec3(0.006, 0.006, 0.006);
  const double offset = 0.04;
  p.thrusters = {
      {Vec3(0.0, offset, 0.0), Vec3::UnitX()},
      {Vec3(0.0, -offset, 0.0), Vec3::UnitX()},
      {Vec3(offset, 0.0, 0.0), Vec3::UnitY()},
      {Vec3(-offset, 0.0, 0.0), Vec3::UnitY()},
  };
  p.torque_limit = Vec3(0.0803, 0.0803, 0.0214);
  return p;
}

MassGeometry derive_geometry(const BlimpParams& p) {
  p.validate();
  MassGeometry g;
  g.helium_mass = p.helium_mass();
  const double m_w1 = p.extra_weight_top();
  const double m_w2 = p.extra_weight_bottom();
  g.total_mass = p.gondola_mass + p.battery_mass + p.envelope_mass + g.helium_mass + m_w1 + m_w2;
  g.thrust_to_buoyancy = p.gondola_half_height + p.envelope_half_height;
  const double moment = (p.battery_mass + m_w2) * p.gondola_half_height +
                        (p.envelope_mass + g.helium_mass) * g.thrust_to_buoyancy +
                        m_w1 * (2.0 * p.envelope_half_height + p.gondola_half_height);
  g.cg_height = moment / g.total_mass;
  if (g.cg_height > g.thrust_to_buoyancy || g.cg_height < 0.0) {
    throw std::invalid_argument("center of gravity lies outside [c_t, c_b]");
  }
  g.cg_to_buoyancy = g.thrust_to_buoyancy - g.cg_height;
  g.c_t = Vec3::Zero();
  g.c_g = Vec3(0.0, 0.0, g.cg_height);
  g.c_b = Vec3(0.0, 0.0, g.thrust_to_buoyancy);
  g.buoyancy = p.air_density * p.volume * p.gravity;
  g.weight = g.total_mass * p.gravity;
  return g;
}

double neutral_extra_weight(const BlimpParams& p) {
  const double fixed = p.gondola_mass + p.battery_mass + p.envelope_mass + p.helium_mass();
  return std::max(0.0, p.air_density * p.volume - fixed);
}

bool BodyState::finite() const {
  return position.allFinite() && velocity.allFinite() && rotation.allFinite() && omega.allFinite();
}

double motor_force(double eta, double gain) {
  const double mag = std::min(std::abs(eta), 1.0);
  const double f = gain * std::max(0.0, motor_poly(mag));
  return eta < 0.0 ? -f : f;
}

double dead_band_command() {
  // Rising root of the polynomial.
  const double disc = kPolyB * kPolyB - 4.0 * kPolyA * kPolyC;
  return (-kPolyB + std::sqrt(disc)) / (2.0 * kPolyA);
}

double max_motor_force(double gain) { return gain * motor_poly(1.0); }

double command_from_force(double force, double gain) {
  const double mag = std::abs(force);
  if (mag == 0.0) return 0.0;
  if (mag >= max_motor_force(gain)) return force < 0.0 ? -1.0 : 1.0;
  // a x^2 + b x + (c - F/g) = 0 with a < 0; the rising branch is the root
  // closer to zero.
  const double c = kPolyC - mag / gain;
  const double disc = kPolyB * kPolyB - 4.0 * kPolyA * c;
  const double eta = std::clamp((-kPolyB + std::sqrt(std::max(disc, 0.0))) / (2.0 * kPolyA),
                                dead_band_command(), 1.0);
  return force < 0.0 ? -eta : eta;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> thruster_torque_map(const BlimpParams& p,
                                                             const MassGeometry& g) {
  Eigen::Matrix<double, 3, Eigen::Dynamic> a(3, static_cast<Eigen::Index>(p.thrusters.size()));
  for (std::size_t i = 0; i < p.thrusters.size(); ++i) {
    const auto& t = p.thrusters[i];
    a.col(static_cast<Eigen::Index>(i)) = (t.position - g.c_b).cross(t.direction);
  }
  return a;
}

Allocator::Allocator(const BlimpParams& model, const MassGeometry& geom)
    : map_(thruster_torque_map(model, geom)),
      gain_(model.motor_gain),
      force_limit_(max_motor_force(model.motor_gain)) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(map_);
  if (lu.rank() < 3) {
    throw std::invalid_argument("thruster layout cannot produce torque about all three axes");
  }
  const Eigen::Matrix3d gram = map_ * map_.transpose();
  pinv_ = map_.transpose() * gram.inverse();
}

Eigen::VectorXd Allocator::forces(const Vec3& torque) const {
  Eigen::VectorXd f = pinv_ * torque;
  const double peak = f.cwiseAbs().maxCoeff();
  if (peak > force_limit_) f *= force_limit_ / peak;
  return f;
}

MotorCommand Allocator::allocate(const Vec3& torque, double /*roll*/, double /*pitch*/) const {
  const Eigen::VectorXd f = forces(torque);
  MotorCommand cmd(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) cmd(i) = command_from_force(f(i), gain_);
  return cmd;
}

Vec3 Allocator::max_axis_torque() const {
  Vec3 out;
  for (int axis = 0; axis < 3; ++axis) {
    const Eigen::VectorXd unit = pinv_.col(axis);
    out(axis) = force_limit_ / unit.cwiseAbs().maxCoeff();
  }
  return out;
}

Wrench thrust_wrench(const MotorCommand& cmd, const BlimpParams& p, const MassGeometry& g) {
  Wrench w;
  for (std::size_t i = 0; i < p.thrusters.size(); ++i) {
    const auto& t = p.thrusters[i];
    const Vec3 f = motor_force(cmd(static_cast<Eigen::Index>(i)), p.motor_gain) * t.direction;
    w.force += f;
    w.torque += (t.position - g.c_b).cross(f);
  }
  return w;
}

Wrench net_wrench(const BodyState& s, const MotorCommand& cmd, const BlimpParams& p,
                  const MassGeometry& g, const Wrench& external) {
  Wrench w = thrust_wrench(cmd, p, g);

  // Buoyancy acts at c_b (the reference point), gravity at c_g.
  const Vec3 up_body = s.rotation.transpose() * Vec3::UnitZ();
  const Vec3 weight = -g.weight * up_body;
  w.force += g.buoyancy * up_body + weight;
  w.torque += (g.c_g - g.c_b).cross(weight);

  w.force -= p.drag_linear.cwiseProduct(s.velocity.cwiseAbs()).cwiseProduct(s.velocity);
  w.torque -= p.drag_angular.cwiseProduct(s.omega.cwiseAbs()).cwiseProduct(s.omega);

  w.force += external.force;
  w.torque += external.torque;

  const Vec3 mass = Vec3::Constant(g.total_mass) + p.added_mass.head<3>();
  const Vec3 inertia = p.inertia + p.added_mass.tail<3>();
  const Vec3 momentum = mass.cwiseProduct(s.velocity);
  w.force -= s.omega.cross(momentum);
  w.torque -= s.omega.cross(inertia.cwiseProduct(s.omega)) + s.velocity.cross(momentum);
  return w;
}

StepOutcome step(const BodyState& s, const MotorCommand& cmd, const BlimpParams& p,
                 const MassGeometry& g, double dt, const Wrench& external) {
  if (!(dt > 0.0 && dt <= kMaxStep)) throw std::invalid_argument("step size out of range");
  const Wrench w = net_wrench(s, cmd, p, g, external);
  const Vec3 mass = Vec3::Constant(g.total_mass) + p.added_mass.head<3>();
  const Vec3 inertia = p.inertia + p.added_mass.tail<3>();

  StepOutcome out;
  BodyState& n = out.state;
  n.velocity = s.velocity + dt * w.force.cwiseQuotient(mass);
  n.omega = s.omega + dt * w.torque.cwiseQuotient(inertia);
  n.position = s.position + dt * (s.rotation * n.velocity);
  n.rotation = so3::integrate_rotation(s.rotation, n.omega, dt);

  const double biggest = std::max({n.position.cwiseAbs().maxCoeff(), n.velocity.cwiseAbs().maxCoeff(),
                                   n.omega.cwiseAbs().maxCoeff()});
  out.diverged = !n.finite() || biggest > kDivergence;
  return out;
}

double mechanical_energy(const BodyState& s, const BlimpParams& p, const MassGeometry& g) {
  const Vec3 mass = Vec3::Constant(g.total_mass) + p.added_mass.head<3>();
  const Vec3 inertia = p.inertia + p.added_mass.tail<3>();
  const double kinetic = 0.5 * s.velocity.dot(mass.cwiseProduct(s.velocity)) +
                         0.5 * s.omega.dot(inertia.cwiseProduct(s.omega));
  const double potential = (g.weight - g.buoyancy) * s.position.z() +
                           g.weight * g.cg_to_buoyancy * (1.0 - s.rotation(2, 2));
  return kinetic + potential;
}

}  // namespace mbr
