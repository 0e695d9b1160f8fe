#include "mbr/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mbr {

namespace {

double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

RolloutRow make_row(const InvertEnv& env, const StepResult& r) {
  RolloutRow row;
  row.t = env.time();
  row.euler = so3::euler_from_rotation(env.state().rotation);
  row.omega = env.state().omega;
  row.action = r.action;
  row.command = r.command;
  row.reward = r.reward;
  row.terminated = r.terminated;
  row.truncated = r.truncated;
  return row;
}

}  // namespace

Vec3 inversion_error(const Rotation& r) {
  const so3::AxisAngle e = so3::rotation_error(r, inverted_attitude());
  return e.angle * e.axis;
}

double roll_deviation(const Rotation& r) {
  return std::numbers::pi - std::abs(so3::euler_from_rotation(r).roll);
}

void EnergyShapingGains::validate() const {
  if (!(pump_gain > 0)) throw std::invalid_argument("pump gain must be positive");
  if (!(switch_angle > 0 && switch_angle < std::numbers::pi))
    throw std::invalid_argument("switch angle must lie in (0, pi)");
  if (!(kick_time >= 0)) throw std::invalid_argument("kick time must be nonnegative");
}

double roll_energy(const BodyState& s, const BlimpParams& model, const MassGeometry& geom) {
  const double inertia = model.inertia.x() + model.added_mass(3);
  const double phi = so3::euler_from_rotation(s.rotation).roll;
  return 0.5 * inertia * s.omega.x() * s.omega.x() +
         geom.weight * geom.cg_to_buoyancy * (1.0 - std::cos(phi));
}

Vec3 energy_shaping_action(const BodyState& s, double t, const EnergyShapingGains& gains,
                           const BlimpParams& model, const MassGeometry& geom) {
  const so3::EulerAngles e = so3::euler_from_rotation(s.rotation);
  const Vec3& w = s.omega;
  const double c = std::cos(e.roll);
  const double limit = model.torque_limit.x();
  Vec3 tau;

  if (t < gains.kick_time) {
    tau.x() = gains.kick_torque * limit;
  } else if (roll_deviation(s.rotation) > gains.switch_angle) {
    const double target = 2.0 * geom.weight * geom.cg_to_buoyancy;
    const double pump = gains.pump_gain * (target - roll_energy(s, model, geom)) * sgn(w.x());
    tau.x() = std::clamp(pump, -limit, limit);
  } else {
    const Vec3 err = inversion_error(s.rotation);
    const Eigen::Vector4d x(err.x(), -w.x(), err.y(), -w.y());
    tau.x() = gains.compensation * geom.weight * geom.cg_to_buoyancy * std::sin(err.x()) + gains.feedback.dot(x);
  }
  tau.y() = -c * gains.pitch_pd(0) * e.pitch - gains.pitch_pd(1) * w.y();
  tau.z() = -c * gains.yaw_pd(0) * e.yaw - gains.yaw_pd(1) * w.z();
  return tau;
}

void MappingLayer::validate() const {
  if (!(scale.array() > 0).all()) throw std::invalid_argument("mapping scales must be positive");
  if (!(threshold > 0 && threshold < std::numbers::pi))
    throw std::invalid_argument("mapping threshold must lie in (0, pi)");
}

Vec3 apply_mapping(const Action& a, double roll_dev, const MappingLayer& layer, const Vec3& torque_limit) {
  const Vec3 tau = a.cwiseMax(-1.0).cwiseMin(1.0).cwiseProduct(torque_limit);
  return roll_dev >= layer.threshold ? Vec3(layer.scale.cwiseProduct(tau)) : tau;
}

void PdGains::validate() const {
  if ((kp.array() < 0).any() || (kd.array() < 0).any()) throw std::invalid_argument("PD gains must be nonnegative");
  if (!(activation_rate > 0)) throw std::invalid_argument("activation rate must be positive");
}

Vec3 pd_action(const BodyState& s, const PdGains& pd) {
  return pd.kp.cwiseProduct(inversion_error(s.rotation)) - pd.kd.cwiseProduct(s.omega);
}

Rollout policy_rollout(InvertEnv& env, const Policy& policy, const BlimpParams& plant, double yaw) {
  Rollout log;
  Observation obs = env.reset(plant, yaw, 0);
  for (;;) {
    const StepResult r = env.step(policy(obs));
    log.push_back(make_row(env, r));
    obs = r.obs;
    if (r.terminated || r.truncated) break;
  }
  return log;
}

Rollout baseline_rollout(InvertEnv& env, const EnergyShapingGains& gains, const BlimpParams& plant,
                         double yaw) {
  gains.validate();
  const BlimpParams& model = env.config().model;
  const MassGeometry& geom = env.model_geometry();
  const Vec3 limit = env.torque_limit();
  Rollout log;
  env.reset(plant, yaw, 0);
  for (;;) {
    const Vec3 tau = energy_shaping_action(env.state(), env.time(), gains, model, geom);
    const StepResult r = env.step_torque(tau, tau.cwiseQuotient(limit));
    log.push_back(make_row(env, r));
    if (r.terminated || r.truncated) break;
  }
  return log;
}

DeployResult deploy_rollout(InvertEnv& env, const Policy& policy, const MappingLayer& layer,
                            const PdGains& pd, const BlimpParams& real) {
  layer.validate();
  pd.validate();
  const Vec3 limit = env.torque_limit();
  DeployResult out;
  Observation obs = env.reset(real, 0.0, 0);
  bool stabilizing = false;
  for (;;) {
    const double dev = roll_deviation(env.state().rotation);
    if (!stabilizing && dev < layer.threshold && env.state().omega.norm() < pd.activation_rate) {
      stabilizing = true;
      out.handover_time = env.time();
    }
    StepResult r;
    if (stabilizing) {
      const Vec3 tau = pd_action(env.state(), pd);
      r = env.step_torque(tau, tau.cwiseQuotient(limit));
    } else {
      const Action a = policy(obs);
      r = env.step_torque(apply_mapping(a, dev, layer, limit), a.cwiseMax(-1.0).cwiseMin(1.0));
    }
    out.log.push_back(make_row(env, r));
    obs = r.obs;
    if (r.terminated || r.truncated) break;
  }
  return out;
}

}  // namespace mbr
