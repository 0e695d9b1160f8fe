#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mbr/env.hpp"

using namespace mbr;
using std::numbers::pi;

namespace {

EnvConfig neutral_config() {
  EnvConfig c;
  c.plant.extra_weight = neutral_extra_weight(c.plant);
  c.model = c.plant;
  return c;
}

BodyState at(const Rotation& r, const Vec3& w = Vec3::Zero()) {
  BodyState s;
  s.rotation = r;
  s.omega = w;
  return s;
}

const Rotation kInverted = Vec3(1, -1, -1).asDiagonal();

}  // namespace

TEST_CASE("reward at the target is two") {
  const RewardParams rp;
  CHECK(reward(BodyState{}, at(kInverted), Action::Zero(), Vec3::Ones(), rp) == 2.0);
}

TEST_CASE("upright orientation reward") {
  const RewardParams rp;
  CHECK(orientation_reward(Rotation::Identity(), rp) == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));
  CHECK(std::abs(orientation_reward(Rotation::Identity(), rp) - 0.006737946999085467) < 1e-12);
}

TEST_CASE("rate penalty at the speed ceiling") {
  const RewardParams rp;
  const double r = reward(BodyState{}, at(kInverted, Vec3(rp.omega_max, 0, 0)), Action::Zero(), Vec3::Ones(), rp);
  CHECK(r == doctest::Approx(2.0 - 0.01).epsilon(1e-15));
}

TEST_CASE("action penalty uses scaled torque") {
  const RewardParams rp;
  const Vec3 limit(0.05, 0.05, 0.02);
  const Action a(1.0, -0.5, 2.0);  // clipped to 1
  const double r = reward(BodyState{}, at(kInverted), a, limit, rp);
  CHECK(r == doctest::Approx(2.0 - 0.001 * (0.05 + 0.025 + 0.02)).epsilon(1e-15));
}

TEST_CASE("precision bonus is continuous at the threshold") {
  const RewardParams rp;
  CHECK(precision_bonus(rp.bonus_threshold, rp) == 0.0);
  CHECK(precision_bonus(rp.bonus_threshold - 1e-10, rp) < 1e-9);
  CHECK(precision_bonus(rp.bonus_threshold + 1e-10, rp) == 0.0);
  CHECK(precision_bonus(0.0, rp) == 1.0);
  // Full orientation reward on both sides of the boundary for a roll error.
  const double lo = orientation_reward(kInverted * so3::rot_x(rp.bonus_threshold - 1e-12), rp);
  const double hi = orientation_reward(kInverted * so3::rot_x(rp.bonus_threshold + 1e-12), rp);
  CHECK(std::abs(lo - hi) < 1e-9);
}

TEST_CASE("orientation reward bounds and yaw penalty") {
  const RewardParams rp;
  for (double a = -pi; a <= pi; a += 0.05) {
    for (const Rotation& r : {Rotation(so3::rot_x(a)), Rotation(so3::rot_y(a) * kInverted),
                              Rotation(so3::rot_z(a) * so3::rot_x(1.0))}) {
      const double v = orientation_reward(r, rp);
      CHECK(v > 0.0);
      CHECK(v <= 2.0);
    }
    if (std::abs(a) > 1e-9) CHECK(orientation_reward(kInverted * so3::rot_z(a), rp) < 2.0);
  }
}

TEST_CASE("rate and action terms are never positive") {
  const RewardParams rp;
  const RewardTerms t = reward_terms(at(kInverted, Vec3(-1, 2, -3)), Vec3(-0.1, 0.2, 0.0), rp);
  CHECK(t.rate < 0.0);
  CHECK(t.action < 0.0);
  CHECK(t.total() <= 2.0);
}

TEST_CASE("observation round trip") {
  BodyState s;
  s.rotation = so3::rot_z(0.3) * so3::rot_y(-0.2) * so3::rot_x(2.0);
  s.omega = Vec3(0.1, -0.2, 0.3);
  const Observation o = encode_observation(s);
  CHECK(o(1) == s.rotation(0, 1));
  CHECK(o(3) == s.rotation(1, 0));
  Rotation r;
  Vec3 w;
  decode_observation(o, r, w);
  CHECK((r - s.rotation).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(w == s.omega);
}

TEST_CASE("reset poses") {
  InvertEnv env(neutral_config());
  Observation o = env.reset(1.0, 0.0, 1);
  CHECK(o.head<9>() == Eigen::Map<const Eigen::Matrix<double, 9, 1>>(
                           Rotation(Rotation::Identity()).transpose().data()));
  CHECK(o.tail<3>().isZero());
  o = env.reset(1.0, 0.5, 1);
  const so3::EulerAngles e = so3::euler_from_rotation(env.state().rotation);
  CHECK(std::abs(e.roll) < 1e-15);
  CHECK(std::abs(e.pitch) < 1e-15);
  CHECK(e.yaw == doctest::Approx(0.5).epsilon(1e-15));
  const Observation a = env.reset(0.7, 0.2, 42);
  const Observation b = env.reset(0.7, 0.2, 42);
  CHECK(a == b);
  CHECK(env.plant().split == 0.7);
}

TEST_CASE("idle step at upright rest") {
  InvertEnv env(neutral_config());
  env.reset(1.0, 0.0, 1);
  const StepResult r = env.step(Action::Zero());
  CHECK((env.state().rotation - Rotation::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(env.state().omega.norm() < 1e-12);
  CHECK(r.reward == doctest::Approx(std::exp(-5.0)).epsilon(1e-9));
  CHECK(!r.terminated);
  CHECK(!r.truncated);
}

TEST_CASE("saturating action is scaled in direction") {
  InvertEnv env(neutral_config());
  env.reset(1.0, 0.0, 1);
  const StepResult r = env.step(Action(1, 1, 1));
  CHECK(r.command.cwiseAbs().maxCoeff() <= 1.0);
  const Vec3 real = thrust_wrench(r.command, env.plant(), env.plant_geometry()).torque;
  CHECK(real.normalized().dot(r.torque.normalized()) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("time limit truncates without terminating") {
  EnvConfig c = neutral_config();
  InvertEnv env(c);
  env.reset(1.0, 0.0, 1);
  StepResult r;
  int steps = 0;
  do {
    r = env.step(Action::Zero());
    ++steps;
  } while (!r.truncated && !r.terminated);
  CHECK(r.truncated);
  CHECK(!r.terminated);
  CHECK(env.time() == doctest::Approx(30.0));
  CHECK(steps == static_cast<int>(std::lround(30.0 / c.control_period)));
}

TEST_CASE("over-range rule") {
  const double wmax = pi;
  CHECK(!over_range(BodyState{}, wmax, 3.0));
  BodyState s;
  s.position = Vec3(4, 0, 0);
  CHECK(over_range(s, wmax, 3.0));
  BodyState t;
  t.omega = Vec3(0, wmax * 1.01, 0);
  CHECK(over_range(t, wmax, 3.0));
}

TEST_CASE("over-range terminates the episode") {
  InvertEnv env(neutral_config());
  env.reset(1.0, 0.0, 1);
  BodyState s = env.state();
  s.omega = Vec3(4.0, 0, 0);
  env.set_state(s);
  const StepResult r = env.step(Action::Zero());
  CHECK(r.terminated);
  CHECK(!r.truncated);
}

TEST_CASE("identical seeds and actions give identical trajectories") {
  EnvConfig c = neutral_config();
  c.disturbance = [](double, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1e-3);
    Wrench w;
    w.torque = Vec3(n(rng), n(rng), n(rng));
    return w;
  };
  InvertEnv a(c), b(c);
  a.reset(0.8, 0.1, 77);
  b.reset(0.8, 0.1, 77);
  for (int i = 0; i < 50; ++i) {
    const Action act(std::sin(i * 0.3), std::cos(i * 0.2), 0.1);
    const StepResult ra = a.step(act), rb = b.step(act);
    CHECK(ra.obs == rb.obs);
    CHECK(ra.reward == rb.reward);
  }
}

TEST_CASE("config validation") {
  EnvConfig c;
  c.physics_dt = 0.03;
  c.control_period = 0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.reward.bonus_threshold = 4.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.reward.roll_weight = -1.0;
  CHECK_THROWS_AS(InvertEnv{c}, std::invalid_argument);
}
