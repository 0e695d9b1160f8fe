#include "mbr/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbr {

Observation encode_observation(const BodyState& s) {
  Observation o;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) o(3 * r + c) = s.rotation(r, c);
  o.tail<3>() = s.omega;
  return o;
}

void decode_observation(const Observation& o, Rotation& r, Vec3& omega) {
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) r(i, c) = o(3 * i + c);
  r = so3::orthonormalize(r);
  omega = o.tail<3>();
}

void RewardParams::validate() const {
  if ((omega_weight.array() < 0).any() || (action_weight.array() < 0).any() || roll_weight < 0 ||
      pitch_weight < 0 || yaw_weight < 0) {
    throw std::invalid_argument("reward weights must be nonnegative");
  }
  if (!(bonus_threshold > 0 && bonus_threshold < std::numbers::pi))
    throw std::invalid_argument("bonus threshold must lie in (0, pi)");
  if (!(error_clip > 0)) throw std::invalid_argument("error clip must be positive");
  if (!(omega_max > 0)) throw std::invalid_argument("omega_max must be positive");
}

double precision_bonus(double angle, const RewardParams& rp) {
  return angle < rp.bonus_threshold ? 1.0 - angle / rp.bonus_threshold : 0.0;
}

double orientation_reward(const Rotation& r, const RewardParams& rp) {
  const so3::AxisAngle err = so3::rotation_error(r, inverted_attitude());
  const Vec3 e = err.angle * err.axis / std::numbers::pi;
  const double weighted = rp.roll_weight * std::abs(e.x()) + rp.pitch_weight * std::abs(e.y()) +
                          rp.yaw_weight * std::abs(e.z());
  return std::exp(-std::clamp(weighted, 0.0, rp.error_clip)) + precision_bonus(err.angle, rp);
}

RewardTerms reward_terms(const BodyState& next, const Vec3& torque, const RewardParams& rp) {
  RewardTerms t;
  t.rotation = orientation_reward(next.rotation, rp);
  t.rate = -rp.omega_weight.dot(next.omega.cwiseAbs()) / rp.omega_max;
  t.action = -rp.action_weight.dot(torque.cwiseAbs());
  return t;
}

double reward(const BodyState& /*prev*/, const BodyState& next, const Action& a,
              const Vec3& torque_limit, const RewardParams& rp) {
  const Vec3 torque = a.cwiseMax(-1.0).cwiseMin(1.0).cwiseProduct(torque_limit);
  return reward_terms(next, torque, rp).total();
}

int EnvConfig::substeps() const {
  return static_cast<int>(std::lround(control_period / physics_dt));
}

void EnvConfig::validate() const {
  plant.validate();
  model.validate();
  reward.validate();
  if (!(physics_dt > 0 && physics_dt <= kMaxStep)) throw std::invalid_argument("physics_dt out of range");
  if (!(control_period >= physics_dt) ||
      std::abs(substeps() * physics_dt - control_period) > 1e-9) {
    throw std::invalid_argument("control period must be a whole multiple of physics_dt");
  }
  if (!(episode_time > 0)) throw std::invalid_argument("episode time must be positive");
  if (!(position_limit > 0)) throw std::invalid_argument("position limit must be positive");
}

bool over_range(const BodyState& s, double omega_max, double position_limit) {
  return s.position.norm() > position_limit || (s.omega.cwiseAbs().array() > omega_max).any();
}

InvertEnv::InvertEnv(EnvConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      plant_(cfg_.plant),
      plant_geom_(derive_geometry(plant_)),
      model_geom_(derive_geometry(cfg_.model)),
      allocator_(cfg_.model, model_geom_) {}

Observation InvertEnv::reset(double split, double yaw, std::uint64_t seed) {
  BlimpParams p = cfg_.plant;
  p.split = split;
  return reset(p, yaw, seed);
}

Observation InvertEnv::reset(const BlimpParams& plant, double yaw, std::uint64_t seed) {
  MassGeometry geom = derive_geometry(plant);
  plant_ = plant;
  plant_geom_ = geom;
  state_ = BodyState{};
  state_.rotation = so3::rot_z(yaw);
  steps_ = 0;
  time_ = 0.0;
  rng_.seed(seed);
  return encode_observation(state_);
}

StepResult InvertEnv::step(const Action& a) {
  const Action clipped = a.cwiseMax(-1.0).cwiseMin(1.0);
  return step_torque(clipped.cwiseProduct(torque_limit()), clipped);
}

StepResult InvertEnv::step_torque(const Vec3& torque, const Action& logged_action) {
  StepResult out;
  const so3::EulerAngles e = so3::euler_from_rotation(state_.rotation);
  out.command = allocator_.allocate(torque, e.roll, e.pitch);
  out.torque = torque;

  out.action = logged_action;
  bool diverged = false;
  const int n = cfg_.substeps();
  for (int i = 0; i < n && !diverged; ++i) {
    Wrench ext;
    if (cfg_.disturbance) ext = cfg_.disturbance(time_ + i * cfg_.physics_dt, rng_);
    const StepOutcome o = mbr::step(state_, out.command, plant_, plant_geom_, cfg_.physics_dt, ext);
    state_ = o.state;
    diverged = o.diverged;
  }
  ++steps_;
  time_ = static_cast<double>(steps_) * cfg_.control_period;

  out.obs = encode_observation(state_);
  out.reward = reward_terms(state_, torque, cfg_.reward).total();
  if (diverged) {
    out.reward = 0.0;
    out.terminated = true;
  } else {
    out.terminated = over_range(state_, cfg_.reward.omega_max, cfg_.position_limit);
  }
  out.truncated = !out.terminated && time_ >= cfg_.episode_time - 1e-9;
  return out;
}

}  // namespace mbr
