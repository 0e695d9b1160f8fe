#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "mbr/env.hpp"

namespace mbr {

/// Attitude error of `r` towards the inverted pose as a body-frame rotation
/// vector (angle times axis).
Vec3 inversion_error(const Rotation& r);

/// Roll deviation from inversion, pi - |phi|, in [0, pi].
double roll_deviation(const Rotation& r);

struct EnergyShapingGains {
  double pump_gain = 4.0;       // k_e, N m per J
  double switch_angle = 0.6;    // delta phi_sw
  // Capture law: cancels the model restoring moment, then adds roll
  // feedback over (e_x, -omega_x, e_y, -omega_y), e from inversion_error.
  double compensation = 1.0;
  Eigen::Vector4d feedback = Eigen::Vector4d(0.005, 0.1, 0.0, 0.0);
  Eigen::Vector2d pitch_pd = Eigen::Vector2d(0.3, 0.15);
  Eigen::Vector2d yaw_pd = Eigen::Vector2d(0.05, 0.05);
  double kick_torque = 1.0;     // fraction of the roll torque limit
  double kick_time = 0.5;       // s

  void validate() const;
};

/// Swing-up and capture torque from the nominal model (params, geometry).
/// `t` is the time since the episode start, used only by the kick pulse.
Vec3 energy_shaping_action(const BodyState& s, double t, const EnergyShapingGains& gains,
                           const BlimpParams& model, const MassGeometry& geom);

/// Roll energy relative to the upright rest pose.
double roll_energy(const BodyState& s, const BlimpParams& model, const MassGeometry& geom);

struct MappingLayer {
  Vec3 scale = Vec3(0.7, 0.1, 0.1);  // diag M_0
  double threshold = 0.8;            // rho

  void validate() const;
};

/// Scaled torque a * tau_max, passed through M_0 while roll_dev >= threshold.
Vec3 apply_mapping(const Action& a, double roll_dev, const MappingLayer& layer, const Vec3& torque_limit);

struct PdGains {
  Vec3 kp = Vec3(0.4, 0.3, 0.05);
  Vec3 kd = Vec3(0.3, 0.2, 0.05);
  double activation_rate = 0.3;  // omega_act

  void validate() const;
};

/// Attitude PD towards the inverted pose.
Vec3 pd_action(const BodyState& s, const PdGains& pd);

/// One logged control step.
struct RolloutRow {
  double t = 0.0;
  so3::EulerAngles euler;
  Vec3 omega = Vec3::Zero();
  Action action = Action::Zero();
  Eigen::VectorXd command;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

using Rollout = std::vector<RolloutRow>;
using Policy = std::function<Action(const Observation&)>;

/// Runs `policy` from the reset pose until termination or the env time limit.
Rollout policy_rollout(InvertEnv& env, const Policy& policy, const BlimpParams& plant, double yaw = 0.0);

/// Runs the energy-shaping baseline; the gains use the env's model params.
Rollout baseline_rollout(InvertEnv& env, const EnergyShapingGains& gains, const BlimpParams& plant,
                         double yaw = 0.0);

struct DeployResult {
  Rollout log;
  double handover_time = -1.0;  // first PD step, -1 if never
};

/// Policy plus mapping layer on the env's plant, latched handover to PD once
/// roll_dev < threshold and |omega| < activation rate.
DeployResult deploy_rollout(InvertEnv& env, const Policy& policy, const MappingLayer& layer,
                            const PdGains& pd, const BlimpParams& real);

}  // namespace mbr
