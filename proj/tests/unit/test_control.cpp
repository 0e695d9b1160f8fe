#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mbr/control.hpp"
#include "mbr/harness.hpp"

using namespace mbr;
using std::numbers::pi;

namespace {

BodyState at(const Rotation& r, const Vec3& w = Vec3::Zero()) {
  BodyState s;
  s.rotation = r;
  s.omega = w;
  return s;
}

Rotation roll(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }

EnvConfig neutral_config() {
  EnvConfig c;
  c.plant.extra_weight = neutral_extra_weight(c.plant);
  c.model = c.plant;
  c.position_limit = std::numeric_limits<double>::infinity();
  return c;
}

}  // namespace

TEST_CASE("inversion error vanishes at the inverted pose") {
  CHECK(inversion_error(inverted_attitude()).norm() < 1e-12);
  CHECK(roll_deviation(inverted_attitude()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(roll_deviation(Rotation::Identity()) == doctest::Approx(pi));
  CHECK(roll_deviation(roll(pi - 0.3)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("mapping layer scales above the threshold only") {
  const MappingLayer layer;
  const Vec3 limit(0.08, 0.08, 0.02);
  const Action a(1.0, -0.5, 0.25);
  const Vec3 raw = a.cwiseProduct(limit);

  const Vec3 far = apply_mapping(a, 0.8, layer, limit);
  CHECK(far.x() == doctest::Approx(0.7 * raw.x()));
  CHECK(far.y() == doctest::Approx(0.1 * raw.y()));
  CHECK(far.z() == doctest::Approx(0.1 * raw.z()));

  const Vec3 near = apply_mapping(a, 0.8 - 1e-9, layer, limit);
  CHECK((near - raw).norm() < 1e-15);

  const Action b(-0.2, 0.9, -1.0);
  const Vec3 sum = apply_mapping(Action(a + b), 2.0, layer, limit);
  CHECK((sum - apply_mapping(a, 2.0, layer, limit) - apply_mapping(b, 2.0, layer, limit)).norm() < 1e-15);
}

TEST_CASE("mapping layer clips actions to the unit box") {
  const Vec3 limit(0.08, 0.08, 0.02);
  const Vec3 t = apply_mapping(Action(3.0, -2.0, 0.0), 0.0, MappingLayer{}, limit);
  CHECK(t.x() == doctest::Approx(0.08));
  CHECK(t.y() == doctest::Approx(-0.08));
}

TEST_CASE("mapping and PD validation") {
  MappingLayer m;
  m.scale.x() = 0.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  PdGains pd;
  pd.activation_rate = 0.0;
  CHECK_THROWS_AS(pd.validate(), std::invalid_argument);
}

TEST_CASE("baseline is idle at inverted rest") {
  const BlimpParams p = default_params();
  const MassGeometry g = derive_geometry(p);
  const Vec3 tau = energy_shaping_action(at(inverted_attitude()), 5.0, EnergyShapingGains{}, p, g);
  CHECK(tau.norm() < 1e-12);
}

TEST_CASE("baseline kicks, then pumps with the roll rate") {
  const BlimpParams p = default_params();
  const MassGeometry g = derive_geometry(p);
  const EnergyShapingGains k;
  CHECK(energy_shaping_action(at(Rotation::Identity()), 0.1, k, p, g).x() == doctest::Approx(p.torque_limit.x()));
  const double up = energy_shaping_action(at(roll(0.3), Vec3(0.5, 0, 0)), 2.0, k, p, g).x();
  const double down = energy_shaping_action(at(roll(0.3), Vec3(-0.5, 0, 0)), 2.0, k, p, g).x();
  CHECK(up > 0);
  CHECK(down < 0);
  CHECK(std::abs(up) <= p.torque_limit.x() + 1e-15);
}

TEST_CASE("roll energy is zero upright and peaks inverted") {
  const BlimpParams p = default_params();
  const MassGeometry g = derive_geometry(p);
  CHECK(roll_energy(at(Rotation::Identity()), p, g) == doctest::Approx(0.0));
  CHECK(roll_energy(at(roll(pi)), p, g) == doctest::Approx(2 * g.weight * g.cg_to_buoyancy));
}

TEST_CASE("energy pump raises roll energy without drag") {
  EnvConfig c = neutral_config();
  c.plant.drag_linear.setZero();
  c.plant.drag_angular.setZero();
  c.model = c.plant;
  c.episode_time = 12.0;
  InvertEnv env(c);
  EnergyShapingGains k;
  k.switch_angle = 0.05;
  env.reset(c.plant, 0.0, 0);
  const double target = 2 * env.model_geometry().weight * env.model_geometry().cg_to_buoyancy;
  double after_kick = -1, peak = 0;
  while (env.time() < 10.0) {
    const Vec3 tau = energy_shaping_action(env.state(), env.time(), k, c.model, env.model_geometry());
    env.step_torque(tau, tau.cwiseQuotient(env.torque_limit()));
    const double e = roll_energy(env.state(), c.model, env.model_geometry());
    if (after_kick < 0 && env.time() >= k.kick_time) after_kick = e;
    peak = std::max(peak, e);
  }
  CHECK(peak > after_kick);
  CHECK(peak > 0.8 * target);
}

TEST_CASE("PD recovers small offsets around the inverted pose") {
  const EnvConfig c = neutral_config();
  const PdGains pd;
  for (const Vec3 axis : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0).normalized()}) {
    for (double off : {0.05, 0.15}) {
      InvertEnv env(c);
      env.reset(c.plant, 0.0, 0);
      BodyState s = env.state();
      s.rotation = inverted_attitude() * Eigen::AngleAxisd(off, axis).toRotationMatrix();
      env.set_state(s);
      while (env.time() < 20.0) {
        const Vec3 tau = pd_action(env.state(), pd);
        if (env.step_torque(tau, tau.cwiseQuotient(env.torque_limit())).terminated) break;
      }
      CHECK(roll_deviation(env.state().rotation) < 0.05);
      CHECK(env.state().omega.norm() < 0.05);
    }
  }
}

TEST_CASE("deployment with identity mapping and no handover matches the plain rollout") {
  EnvConfig c = neutral_config();
  c.episode_time = 5.0;
  const Policy policy = [](const Observation& o) {
    return Action(std::sin(3 * o(0)), 0.5 * std::cos(o(4)), -0.3 * o(8));
  };
  MappingLayer identity;
  identity.scale = Vec3::Ones();
  PdGains never;
  never.activation_rate = 1e-300;

  InvertEnv a(c), b(c);
  const Rollout plain = policy_rollout(a, policy, c.plant);
  const DeployResult dep = deploy_rollout(b, policy, identity, never, c.plant);
  REQUIRE(plain.size() == dep.log.size());
  CHECK(dep.handover_time < 0);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(plain[i].t == dep.log[i].t);
    CHECK(plain[i].euler.roll == dep.log[i].euler.roll);
    CHECK((plain[i].omega - dep.log[i].omega).norm() == 0.0);
  }
}

TEST_CASE("baseline rollout logs every control step") {
  EnvConfig c = neutral_config();
  c.episode_time = 3.0;
  InvertEnv env(c);
  const Rollout log = baseline_rollout(env, EnergyShapingGains{}, c.plant);
  REQUIRE(log.size() == 30);
  CHECK(log.front().t == doctest::Approx(0.1));
  CHECK(log.back().truncated);
  CHECK(log.back().command.size() == 4);
}
