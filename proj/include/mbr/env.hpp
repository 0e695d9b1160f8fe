#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include "mbr/dynamics.hpp"

namespace mbr {

inline constexpr int kObsDim = 12;
inline constexpr int kActDim = 3;

using Observation = Eigen::Matrix<double, kObsDim, 1>;
using Action = Eigen::Vector3d;

/// Row-major R followed by omega.
Observation encode_observation(const BodyState& s);
/// Recovers (R, omega); R is projected back onto SO(3).
void decode_observation(const Observation& o, Rotation& r, Vec3& omega);

/// Target attitude: the envelope below the gondola.
inline const Rotation& inverted_attitude() {
  static const Rotation r = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  return r;
}

struct RewardParams {
  Vec3 omega_weight = Vec3::Constant(0.01);    // g_w
  Vec3 action_weight = Vec3::Constant(0.001);  // g_a
  double roll_weight = 5.0;                    // g_phi
  double pitch_weight = 5.0;                   // g_theta
  double yaw_weight = 0.5;                     // g_psi
  double bonus_threshold = 0.1;                // zeta
  double error_clip = 10.0;                    // g_n
  double omega_max = std::numbers::pi;

  void validate() const;
};

struct RewardTerms {
  double rotation = 0.0;
  double rate = 0.0;
  double action = 0.0;
  double total() const { return rotation + rate + action; }
};

/// Orientation reward for attitude r (exp term plus precision bonus).
double orientation_reward(const Rotation& r, const RewardParams& rp);

/// Precision bonus alone: 1 - angle/zeta below zeta, zero above.
double precision_bonus(double error_angle, const RewardParams& rp);

/// Reward of the transition into `next`; `torque` is the scaled action a * tau_max.
RewardTerms reward_terms(const BodyState& next, const Vec3& torque, const RewardParams& rp);
double reward(const BodyState& prev, const BodyState& next, const Action& a, const Vec3& torque_limit,
              const RewardParams& rp);

/// Time-indexed external wrench (body frame) applied during integration.
using DisturbanceHook = std::function<Wrench(double t, std::mt19937_64& rng)>;

struct EnvConfig {
  BlimpParams plant = default_params();  // simulated vehicle
  BlimpParams model = default_params();  // what the allocator believes
  RewardParams reward;
  double physics_dt = 0.02;
  double control_period = 0.1;
  double episode_time = 30.0;  // t_e
  double position_limit = 3.0;
  DisturbanceHook disturbance;

  int substeps() const;
  void validate() const;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool terminated = false;  // failure: over range or divergence (d = 1)
  bool truncated = false;   // time limit only
  MotorCommand command;
  Action action = Action::Zero();
  Vec3 torque = Vec3::Zero();  // demanded body torque
};

bool over_range(const BodyState& s, double omega_max, double position_limit);

class InvertEnv {
 public:
  explicit InvertEnv(EnvConfig cfg);

  /// New episode with weight split `split` applied to the plant, yaw psi.
  Observation reset(double split, double yaw, std::uint64_t seed);
  /// New episode with an arbitrary plant parameter set.
  Observation reset(const BlimpParams& plant, double yaw, std::uint64_t seed);

  StepResult step(const Action& a);

  const BodyState& state() const { return state_; }
  void set_state(const BodyState& s) { state_ = s; }
  double time() const { return time_; }
  const EnvConfig& config() const { return cfg_; }
  const BlimpParams& plant() const { return plant_; }
  const MassGeometry& plant_geometry() const { return plant_geom_; }
  const MassGeometry& model_geometry() const { return model_geom_; }
  const Allocator& allocator() const { return allocator_; }
  Vec3 torque_limit() const { return cfg_.model.torque_limit; }

  /// Applies an explicit body torque demand (bypasses action scaling).
  StepResult step_torque(const Vec3& torque, const Action& logged_action);

 private:
  EnvConfig cfg_;
  BlimpParams plant_;
  MassGeometry plant_geom_;
  MassGeometry model_geom_;
  Allocator allocator_;
  BodyState state_;
  long steps_ = 0;
  double time_ = 0.0;
  std::mt19937_64 rng_;
};

}  // namespace mbr
