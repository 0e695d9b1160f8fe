#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "mbr/td3.hpp"

using namespace mbr;

namespace {

Td3Hyper small_hyper() {
  Td3Hyper h;
  h.hidden = 16;
  h.batch_size = 4;
  h.capacity = 200;
  h.episode_time = 0.5;
  return h;
}

Batch synthetic(std::mt19937_64& rng, Eigen::Index n, float done = 0.0f) {
  Batch b;
  b.resize(n);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int i = 0; i < kObsDim; ++i) {
      b.obs(i, j) = u(rng);
      b.next_obs(i, j) = u(rng);
    }
    for (int i = 0; i < kActDim; ++i) b.action(i, j) = u(rng);
    b.reward(0, j) = u(rng);
    b.done(0, j) = done;
  }
  return b;
}

void fill(MultiBuffer& mb, int per_buffer, std::mt19937_64& rng) {
  for (std::size_t k = 0; k < mb.domains(); ++k) {
    for (int i = 0; i < per_buffer; ++i) {
      Transition t;
      t.obs = Observation::Random();
      t.next_obs = Observation::Random();
      t.action = Action::Random();
      t.reward = std::uniform_real_distribution<double>(-1, 1)(rng);
      t.split = mb.split(k);
      mb.buffer_for_domain(k).add(t);
    }
  }
}

}  // namespace

TEST_CASE("even split values") {
  const auto v = even_splits(5, 0.6, 1.0);
  REQUIRE(v.size() == 5);
  CHECK(v[0] == 0.6);
  CHECK(v[2] == doctest::Approx(0.8));
  CHECK(v[4] == 1.0);
}

TEST_CASE("exploration schedule") {
  const Td3Hyper h;
  CHECK(sigma_at_episode(h, 99) == 0.15);
  CHECK(sigma_at_episode(h, 100) == doctest::Approx(0.15 * 0.95).epsilon(1e-15));
  CHECK(sigma_at_episode(h, 100) == doctest::Approx(0.1425));
  CHECK(sigma_at_episode(h, 300) == doctest::Approx(0.15 * 0.95 * 0.95 * 0.95).epsilon(1e-15));
  CHECK(sigma_at_episode(h, 300) == doctest::Approx(0.12860625).epsilon(1e-12));
}

TEST_CASE("collector decays sigma on the episode schedule") {
  Td3Hyper h = small_hyper();
  h.episode_time = 0.1;
  EnvConfig ec;
  ec.episode_time = h.episode_time;
  InvertEnv env(ec);
  MultiBuffer mb(even_splits(10, 0.6, 1.0), 400);
  Collector col(h);
  std::mt19937_64 rng(1);
  auto zero = [](const Observation&) { return Action::Zero(); };
  double after100 = 0, after300 = 0;
  for (int i = 1; i <= 300; ++i) {
    col.run_episode(env, zero, mb, rng);
    if (i == 99) CHECK(col.sigma() == 0.15);
    if (i == 100) after100 = col.sigma();
    if (i == 300) after300 = col.sigma();
  }
  CHECK(after100 == doctest::Approx(0.1425).epsilon(1e-15));
  CHECK(after300 == doctest::Approx(0.15 * 0.95 * 0.95 * 0.95).epsilon(1e-15));
}

TEST_CASE("round-robin buffers stay pure") {
  const Td3Hyper h = small_hyper();
  EnvConfig ec;
  ec.episode_time = h.episode_time;
  InvertEnv env(ec);
  MultiBuffer mb(even_splits(10, 0.6, 1.0), 1000);
  Collector col(h);
  std::mt19937_64 rng(2);
  std::vector<int> episodes(10, 0);
  std::vector<std::size_t> steps(10, 0);
  auto pol = [](const Observation& o) { return Action(o(0), o(4), o(8)); };
  for (int i = 0; i < 20; ++i) {
    const EpisodeStats st = col.run_episode(env, pol, mb, rng);
    CHECK(st.split == mb.split(st.domain));
    CHECK(std::abs(st.yaw) <= h.yaw_range);
    ++episodes[st.domain];
    steps[st.domain] += static_cast<std::size_t>(st.steps);
  }
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(episodes[k] == 2);
    CHECK(mb.buffers()[k]->size() == steps[k]);
    for (double s : mb.buffers()[k]->stored_splits()) CHECK(s == mb.split(k));
  }
}

TEST_CASE("zero noise reproduces the deterministic policy") {
  const Td3Hyper h = small_hyper();
  EnvConfig ec;
  ec.episode_time = h.episode_time;
  InvertEnv env(ec);
  MultiBuffer mb({1.0}, 100);
  Collector col(h);
  col.force_sigma(0.0);
  std::mt19937_64 rng(3);
  auto pol = [](const Observation& o) { return Action(2.0 * o(0), -0.3, 0.1 + o(9)); };
  col.run_episode(env, pol, mb, rng);
  Batch b;
  b.resize(1);
  for (std::size_t i = 0; i < mb.buffers()[0]->size(); ++i) {
    std::mt19937_64 pick(i);
    mb.buffers()[0]->sample(1, pick, b);
    Observation o = b.obs.col(0).cast<double>();
    const Action expect = pol(o).cwiseMax(-1.0).cwiseMin(1.0);
    CHECK((b.action.col(0).cast<double>() - expect).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("targets without discount or after termination equal reward") {
  Td3Hyper h = small_hyper();
  std::mt19937_64 rng(5);
  Td3Agent ag(h, rng);
  Batch b = synthetic(rng, 1);
  b.reward(0, 0) = 1.0f;
  Td3Hyper nodisc = h;
  nodisc.gamma = 0.0;
  Td3Agent z = ag;
  z.set_hyper(nodisc);
  CHECK(z.targets(b)(0, 0) == 1.0f);
  CHECK(ag.targets(b)(0, 0) != 1.0f);

  const Batch d = synthetic(rng, 8, 1.0f);
  CHECK(ag.targets(d) == d.reward);
}

TEST_CASE("twin-min target never exceeds either critic") {
  const Td3Hyper h = small_hyper();
  std::mt19937_64 rng(6);
  Td3Agent ag(h, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Batch b = synthetic(rng, 32);
    RMatrix y1, y2;
    const RMatrix y = ag.targets(b, nullptr, &y1, &y2);
    CHECK((y.array() <= y1.array()).all());
    CHECK((y.array() <= y2.array()).all());
    CHECK((y.array() == y1.array() || y.array() == y2.array()).all());
    ag.train_on_batch(b, rng);
  }
}

TEST_CASE("delayed actor updates and target contraction") {
  Td3Hyper h = small_hyper();
  h.policy_delay = 3;
  std::mt19937_64 rng(7);
  Td3Agent ag(h, rng);
  const Net::Vector a0 = ag.actor.params();
  const Net::Vector t0 = ag.critic1_target.params();
  TrainStats s1 = ag.train_on_batch(synthetic(rng, 16), rng);
  CHECK(!s1.actor_updated);
  CHECK(ag.actor.params() == a0);
  CHECK(ag.critic1_target.params() == t0);
  TrainStats s2 = ag.train_on_batch(synthetic(rng, 16), rng);
  CHECK(!s2.actor_updated);
  CHECK(ag.actor.params() == a0);
  const Net::Vector c1_before = ag.critic1.params();
  TrainStats s3 = ag.train_on_batch(synthetic(rng, 16), rng);
  CHECK(s3.actor_updated);
  CHECK(ag.actor.params() != a0);
  // target' - online = (1 - rate)(target - online) with the post-step online params.
  const Net::Vector gap = ag.critic1_target.params() - ag.critic1.params();
  const Net::Vector expect = (1.0f - static_cast<float>(h.tau)) * (t0 - ag.critic1.params());
  CHECK((gap - expect).cwiseAbs().maxCoeff() < 1e-6f);
  CHECK(c1_before != ag.critic1.params());
}

TEST_CASE("full-rate soft update copies the online networks") {
  Td3Hyper h = small_hyper();
  h.tau = 1.0;
  h.policy_delay = 1;
  std::mt19937_64 rng(8);
  Td3Agent ag(h, rng);
  ag.train_on_batch(synthetic(rng, 8), rng);
  CHECK(ag.actor_target.params() == ag.actor.params());
  CHECK(ag.critic1_target.params() == ag.critic1.params());
  CHECK(ag.critic2_target.params() == ag.critic2.params());
}

TEST_CASE("clipped updates move each parameter by at most the step size") {
  Td3Hyper h = small_hyper();
  h.critic_clip = 1e-6;
  std::mt19937_64 rng(9);
  Td3Agent ag(h, rng);
  const Net::Vector before = ag.critic1.params();
  ag.train_on_batch(synthetic(rng, 8), rng);
  // First Adam step is lr * g / |g| per entry regardless of scale.
  CHECK((ag.critic1.params() - before).cwiseAbs().maxCoeff() <= 1.0001f * static_cast<float>(h.critic_lr));
}

TEST_CASE("training needs a full batch in every buffer") {
  const Td3Hyper h = small_hyper();
  std::mt19937_64 rng(10);
  Td3Agent ag(h, rng);
  MultiBuffer mb(even_splits(3, 0.6, 1.0), 50);
  fill(mb, 2, rng);
  CHECK_THROWS_AS(ag.train_step(mb, rng), InsufficientData);
  fill(mb, 2, rng);
  CHECK_NOTHROW(ag.train_step(mb, rng));

  MultiBuffer pooled(even_splits(3, 0.6, 1.0), 50, false);
  CHECK(pooled.buffers().size() == 1);
  CHECK(pooled.buffers()[0]->capacity() == 150);
  fill(pooled, 3, rng);
  CHECK(!pooled.ready(4));
  fill(pooled, 1, rng);
  CHECK(pooled.ready(4));
  CHECK(pooled.sample(4, rng).size() == 12);
}

TEST_CASE("ring buffer overwrites the oldest entries") {
  ReplayBuffer b(3, 0.5);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.obs.setZero();
    t.next_obs.setZero();
    t.action.setZero();
    t.reward = i;
    t.split = 0.5;
    b.add(t);
  }
  CHECK(b.size() == 3);
  Batch out;
  out.resize(200);
  std::mt19937_64 rng(1);
  b.sample(200, rng, out);
  CHECK(out.reward.minCoeff() == 2.0f);
  CHECK(out.reward.maxCoeff() == 4.0f);
}

TEST_CASE("hyperparameter validation and json") {
  Td3Hyper h;
  CHECK_NOTHROW(h.validate());
  Td3Hyper bad = h;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.policy_delay = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.actor_clip = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const auto j = hyper_to_json(h);
  CHECK(j.at("N") == 10);
  CHECK(j.at("t_e") == 30.0);
  CHECK(j.at("N_e") == 500);
  CHECK(j.at("sigma") == 0.15);
  CHECK(j.at("xi") == 0.95);
  CHECK(j.at("n_sigma") == 100);
  CHECK(j.at("d_p") == 2);
  CHECK(j.at("gamma") == 0.98);
  CHECK(j.at("soft_rate") == 0.01);
  CHECK(j.at("c_alpha") == 0.1);
  CHECK(j.at("c_beta") == 0.1);
  CHECK(j.at("psi_0") == 0.5);
  CHECK(j.at("lambda_range")[0] == 0.6);
  CHECK(j.at("lambda_range")[1] == 1.0);
  const Td3Hyper back = hyper_from_json(j);
  CHECK(hyper_to_json(back) == j);
}

TEST_CASE("seeded training is reproducible and checkpoints round trip") {
  Td3Hyper h = small_hyper();
  h.domains = 2;
  h.episodes = 4;
  Trainer a(EnvConfig{}, h, 99), b(EnvConfig{}, h, 99);
  std::vector<double> ra, rb;
  a.train([&](const EpisodeStats& s) { ra.push_back(s.cumulative_reward); return false; });
  b.train([&](const EpisodeStats& s) { rb.push_back(s.cumulative_reward); return false; });
  CHECK(ra == rb);
  CHECK(a.gradient_steps() > 0);
  CHECK(a.agent().actor.params() == b.agent().actor.params());
  CHECK(a.agent().critic2_target.params() == b.agent().critic2_target.params());

  Trainer c(EnvConfig{}, h, 5);
  CHECK(c.agent().actor.params() != a.agent().actor.params());

  const auto path = std::filesystem::temp_directory_path() / "mbr_td3_roundtrip.ckpt";
  a.save_checkpoint(path.string());
  c.load_checkpoint(path.string());
  CHECK(c.agent().actor.params() == a.agent().actor.params());
  CHECK(c.agent().critic1_opt.v == a.agent().critic1_opt.v);
  CHECK(c.agent().iterations() == a.agent().iterations());
  CHECK(c.collector().episodes() == 4);
  CHECK(c.collector().sigma() == a.collector().sigma());
  Td3Hyper loaded;
  const Td3Agent ag = load_agent(path.string(), &loaded);
  CHECK(ag.actor_target.params() == a.agent().actor_target.params());
  CHECK(loaded.hidden == 16);
  std::filesystem::remove(path);
  CHECK_THROWS(load_agent(path.string()));
}
