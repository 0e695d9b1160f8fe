#include "mbr/td3.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace mbr {

void Td3Hyper::validate() const {
  if (domains < 1) throw std::invalid_argument("N must be at least 1");
  if (!(episode_time > 0)) throw std::invalid_argument("t_e must be positive");
  if (episodes < 1) throw std::invalid_argument("N_e must be at least 1");
  if (!(sigma > 0) || !(sigma_decay > 0)) throw std::invalid_argument("sigma and xi must be positive");
  if (sigma_period < 1) throw std::invalid_argument("n_sigma must be at least 1");
  if (policy_delay < 1) throw std::invalid_argument("d_p must be at least 1");
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(tau > 0 && tau <= 1)) throw std::invalid_argument("soft update rate must lie in (0, 1]");
  if (!(actor_clip > 0) || !(critic_clip > 0)) throw std::invalid_argument("clip bounds must be positive");
  if (!(split_min >= 0 && split_min <= split_max && split_max <= 1))
    throw std::invalid_argument("split range must satisfy 0 <= min <= max <= 1");
  if (!(yaw_range >= 0)) throw std::invalid_argument("psi_0 must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (!(critic_lr > 0) || !(actor_lr > 0)) throw std::invalid_argument("learning rates must be positive");
  if (capacity < static_cast<std::size_t>(batch_size)) throw std::invalid_argument("capacity below batch size");
  if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
  if (!(updates_per_step >= 0)) throw std::invalid_argument("updates per step must be nonnegative");
}

nlohmann::json hyper_to_json(const Td3Hyper& h) {
  return {
      {"N", h.domains},
      {"t_e", h.episode_time},
      {"N_e", h.episodes},
      {"sigma", h.sigma},
      {"xi", h.sigma_decay},
      {"n_sigma", h.sigma_period},
      {"d_p", h.policy_delay},
      {"gamma", h.gamma},
      {"soft_rate", h.tau},
      {"c_alpha", h.actor_clip},
      {"c_beta", h.critic_clip},
      {"lambda_range", {h.split_min, h.split_max}},
      {"psi_0", h.yaw_range},
      {"batch_size", h.batch_size},
      {"critic_lr", h.critic_lr},
      {"actor_lr", h.actor_lr},
      {"capacity", h.capacity},
      {"hidden", h.hidden},
      {"actor_init_scale", h.actor_init_scale},
      {"updates_per_step", h.updates_per_step},
      {"clip", h.clip},
      {"multi_buffer", h.multi_buffer},
      {"target_noise", h.target_noise},
      {"target_noise_std", h.target_noise_std},
      {"target_noise_clip", h.target_noise_clip},
  };
}

Td3Hyper hyper_from_json(const nlohmann::json& j, Td3Hyper h) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("N", h.domains);
  get("t_e", h.episode_time);
  get("N_e", h.episodes);
  get("sigma", h.sigma);
  get("xi", h.sigma_decay);
  get("n_sigma", h.sigma_period);
  get("d_p", h.policy_delay);
  get("gamma", h.gamma);
  get("soft_rate", h.tau);
  get("c_alpha", h.actor_clip);
  get("c_beta", h.critic_clip);
  if (j.contains("lambda_range")) {
    const auto& r = j.at("lambda_range");
    if (!r.is_array() || r.size() != 2) throw std::invalid_argument("lambda_range needs two values");
    h.split_min = r[0].get<double>();
    h.split_max = r[1].get<double>();
  }
  get("psi_0", h.yaw_range);
  get("batch_size", h.batch_size);
  get("critic_lr", h.critic_lr);
  get("actor_lr", h.actor_lr);
  get("capacity", h.capacity);
  get("hidden", h.hidden);
  get("actor_init_scale", h.actor_init_scale);
  get("updates_per_step", h.updates_per_step);
  get("clip", h.clip);
  get("multi_buffer", h.multi_buffer);
  get("target_noise", h.target_noise);
  get("target_noise_std", h.target_noise_std);
  get("target_noise_clip", h.target_noise_clip);
  return h;
}

double sigma_at_episode(const Td3Hyper& h, long episode) {
  return h.sigma * std::pow(h.sigma_decay, static_cast<double>(episode / h.sigma_period));
}

namespace {

std::vector<int> actor_sizes(const Td3Hyper& h) { return {kObsDim, h.hidden, h.hidden, kActDim}; }
std::vector<int> critic_sizes(const Td3Hyper& h) { return {kObsDim + kActDim, h.hidden, h.hidden, 1}; }

RMatrix stack(const RMatrix& top, const RMatrix& bottom) {
  RMatrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

Td3Agent::Td3Agent(const Td3Hyper& h, std::mt19937_64& rng) : hyper_(h) {
  h.validate();
  actor = Net(actor_sizes(h), OutputActivation::Tanh);
  critic1 = Net(critic_sizes(h), OutputActivation::Linear);
  critic2 = Net(critic_sizes(h), OutputActivation::Linear);
  actor.initialize(rng, static_cast<Real>(h.actor_init_scale));
  critic1.initialize(rng);
  critic2.initialize(rng);
  actor_target = actor;
  critic1_target = critic1;
  critic2_target = critic2;
  actor_opt = Adam<Real>(actor.parameter_count(), static_cast<Real>(h.actor_lr));
  critic1_opt = Adam<Real>(critic1.parameter_count(), static_cast<Real>(h.critic_lr));
  critic2_opt = Adam<Real>(critic2.parameter_count(), static_cast<Real>(h.critic_lr));
}

Action Td3Agent::act(const Observation& obs) const {
  const RMatrix out = actor.forward(obs.cast<Real>());
  return out.col(0).cast<double>();
}

RMatrix Td3Agent::act_batch(const RMatrix& obs) const { return actor.forward(obs); }

RMatrix Td3Agent::targets(const Batch& b, std::mt19937_64* noise_rng, RMatrix* y1, RMatrix* y2) const {
  RMatrix next_a = actor_target.forward(b.next_obs);
  if (hyper_.target_noise && noise_rng) {
    std::normal_distribution<double> n(0.0, hyper_.target_noise_std);
    const auto c = hyper_.target_noise_clip;
    for (Eigen::Index i = 0; i < next_a.size(); ++i) {
      const double e = std::clamp(n(*noise_rng), -c, c);
      next_a(i) = static_cast<Real>(std::clamp(static_cast<double>(next_a(i)) + e, -1.0, 1.0));
    }
  }
  const RMatrix input = stack(b.next_obs, next_a);
  const RMatrix q1 = critic1_target.forward(input);
  const RMatrix q2 = critic2_target.forward(input);
  const Real g = static_cast<Real>(hyper_.gamma);
  const RMatrix mask = (RMatrix::Ones(1, b.size()) - b.done);
  if (y1) *y1 = b.reward + g * mask.cwiseProduct(q1);
  if (y2) *y2 = b.reward + g * mask.cwiseProduct(q2);
  return b.reward + g * mask.cwiseProduct(q1.cwiseMin(q2));
}

TrainStats Td3Agent::train_on_batch(const Batch& b, std::mt19937_64& rng) {
  ++iterations_;
  TrainStats st;
  const RMatrix y = targets(b, &rng);
  const RMatrix input = stack(b.obs, b.action);
  Net::Vector g;
  const Real c_beta = static_cast<Real>(hyper_.critic_clip);
  const Real l1 = critic_mse_gradient(critic1, input, y, g, cache_c_);
  if (hyper_.clip) clip_gradients(g, c_beta);
  critic1_opt.step(critic1.params(), g);
  const Real l2 = critic_mse_gradient(critic2, input, y, g, cache_c_);
  if (hyper_.clip) clip_gradients(g, c_beta);
  critic2_opt.step(critic2.params(), g);
  st.critic_loss = 0.5 * (static_cast<double>(l1) + static_cast<double>(l2));

  if (iterations_ % hyper_.policy_delay == 0) {
    const Real j = actor_objective_gradient(actor, critic1, b.obs, g, cache_a_, cache_c_);
    g = -g;
    if (hyper_.clip) clip_gradients(g, static_cast<Real>(hyper_.actor_clip));
    actor_opt.step(actor.params(), g);
    const Real rate = static_cast<Real>(hyper_.tau);
    soft_update(actor_target, actor, rate);
    soft_update(critic1_target, critic1, rate);
    soft_update(critic2_target, critic2, rate);
    st.actor_objective = j;
    st.actor_updated = true;
  }
  return st;
}

TrainStats Td3Agent::train_step(const MultiBuffer& buffers, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(hyper_.batch_size);
  if (!buffers.ready(n)) throw InsufficientData("a replay buffer holds fewer transitions than the batch size");
  return train_on_batch(buffers.sample(n, rng), rng);
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}
void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
double read_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}
void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_string(std::istream& is) {
  const auto n = read_u64(is);
  if (n > (1u << 26)) throw std::runtime_error("corrupt checkpoint string");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return s;
}
void write_vec(std::ostream& os, const Net::Vector& v) {
  write_u64(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(Real)));
}
void read_vec(std::istream& is, Net::Vector& v) {
  const auto n = read_u64(is);
  if (static_cast<Eigen::Index>(n) != v.size()) throw std::runtime_error("checkpoint network size mismatch");
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(Real)));
  if (!is) throw std::runtime_error("truncated checkpoint");
}
void write_adam(std::ostream& os, const Adam<Real>& a) {
  write_vec(os, a.m);
  write_vec(os, a.v);
  write_u64(os, static_cast<std::uint64_t>(a.t));
}
void read_adam(std::istream& is, Adam<Real>& a) {
  read_vec(is, a.m);
  read_vec(is, a.v);
  a.t = static_cast<long long>(read_u64(is));
}
template <typename Rng>
std::string rng_state(const Rng& r) {
  std::ostringstream ss;
  ss << r;
  return ss.str();
}
template <typename Rng>
void set_rng_state(Rng& r, const std::string& s) {
  std::istringstream ss(s);
  ss >> r;
  if (!ss) throw std::runtime_error("corrupt rng state in checkpoint");
}

constexpr char kMagic[8] = {'M', 'B', 'R', 'C', 'K', 'P', 'T', '\0'};

std::uint32_t read_header(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a checkpoint file");
  const auto version = static_cast<std::uint32_t>(read_u64(is));
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  return version;
}

}  // namespace

void Td3Agent::write(std::ostream& os) const {
  write_u64(os, static_cast<std::uint64_t>(iterations_));
  for (const Net* n : {&actor, &critic1, &critic2, &actor_target, &critic1_target, &critic2_target})
    write_vec(os, n->params());
  for (const Adam<Real>* a : {&actor_opt, &critic1_opt, &critic2_opt}) write_adam(os, *a);
}

void Td3Agent::read(std::istream& is) {
  iterations_ = static_cast<long long>(read_u64(is));
  for (Net* n : {&actor, &critic1, &critic2, &actor_target, &critic1_target, &critic2_target})
    read_vec(is, n->params());
  for (Adam<Real>* a : {&actor_opt, &critic1_opt, &critic2_opt}) read_adam(is, *a);
}

Collector::Collector(const Td3Hyper& h) : hyper_(h), sigma_(h.sigma) {}

void Collector::restore(double sigma, long episode, std::size_t k) {
  sigma_ = sigma;
  episode_ = episode;
  k_ = k;
}

EpisodeStats Collector::run_episode(InvertEnv& env, const std::function<Action(const Observation&)>& policy,
                                    MultiBuffer& buffers, std::mt19937_64& rng) {
  ++episode_;
  if (!sigma_forced_ && episode_ % hyper_.sigma_period == 0) sigma_ *= hyper_.sigma_decay;

  EpisodeStats st;
  st.episode = episode_;
  st.sigma = sigma_;
  st.domain = k_;
  std::uniform_real_distribution<double> yaw_dist(-hyper_.yaw_range, hyper_.yaw_range);
  st.yaw = hyper_.yaw_range > 0 ? yaw_dist(rng) : 0.0;
  st.split = buffers.split(k_);
  const std::uint64_t env_seed = rng();
  Observation obs = env.reset(st.split, st.yaw, env_seed);

  ReplayBuffer& buf = buffers.buffer_for_domain(k_);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (;;) {
    Action a = policy(obs);
    if (sigma_ > 0)
      for (int i = 0; i < kActDim; ++i) a(i) += sigma_ * noise(rng);
    a = a.cwiseMax(-1.0).cwiseMin(1.0);
    const StepResult r = env.step(a);
    buf.add(Transition{obs, a, r.reward, r.obs, r.terminated, st.split});
    st.cumulative_reward += r.reward;
    ++st.steps;
    obs = r.obs;
    if (r.terminated || r.truncated) {
      st.terminated = r.terminated;
      break;
    }
  }
  k_ = (k_ + 1) % buffers.domains();
  return st;
}

std::function<Action(const Observation&)> policy_of(const Net& actor) {
  return [&actor](const Observation& o) -> Action {
    const RMatrix out = actor.forward(o.cast<Real>());
    return out.col(0).cast<double>();
  };
}

namespace {

EnvConfig with_episode_time(EnvConfig env, const Td3Hyper& h) {
  h.validate();
  env.episode_time = h.episode_time;
  return env;
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

Trainer::Trainer(EnvConfig env, Td3Hyper hyper, std::uint64_t seed)
    : env_cfg_(with_episode_time(std::move(env), hyper)),
      hyper_(hyper),
      seed_(seed),
      env_(env_cfg_),
      buffers_(even_splits(static_cast<std::size_t>(hyper.domains), hyper.split_min, hyper.split_max),
               hyper.capacity, hyper.multi_buffer),
      init_rng_(derive_rng(seed, 1)),
      collect_rng_(derive_rng(seed, 2)),
      train_rng_(derive_rng(seed, 3)),
      agent_(hyper, init_rng_),
      collector_(hyper) {}

EpisodeStats Trainer::run_episode() {
  const EpisodeStats st = collector_.run_episode(env_, policy_of(agent_.actor), buffers_, collect_rng_);
  const auto n = static_cast<std::size_t>(hyper_.batch_size);
  if (buffers_.ready(n)) {
    const long updates = std::lround(st.steps * hyper_.updates_per_step);
    for (long i = 0; i < updates; ++i) agent_.train_step(buffers_, train_rng_);
  }
  return st;
}

void Trainer::train(const std::function<bool(const EpisodeStats&)>& on_episode) {
  while (collector_.episodes() < hyper_.episodes) {
    const EpisodeStats st = run_episode();
    if (on_episode && on_episode(st)) break;
  }
}

void Trainer::train_concurrent(const std::function<bool(const EpisodeStats&)>& on_episode) {
  std::mutex actor_mutex;
  auto published = std::make_shared<const Net>(agent_.actor);
  std::atomic<bool> done{false};
  std::atomic<long long> budget{0};
  const auto n = static_cast<std::size_t>(hyper_.batch_size);

  std::thread learner([&] {
    long long performed = 0;
    while (!done.load()) {
      if (performed >= budget.load() || !buffers_.ready(n)) {
        std::this_thread::yield();
        continue;
      }
      const TrainStats st = agent_.train_step(buffers_, train_rng_);
      ++performed;
      if (st.actor_updated) {
        auto snap = std::make_shared<const Net>(agent_.actor);
        std::lock_guard lock(actor_mutex);
        published = std::move(snap);
      }
    }
  });

  try {
    while (collector_.episodes() < hyper_.episodes) {
      std::shared_ptr<const Net> actor;
      {
        std::lock_guard lock(actor_mutex);
        actor = published;
      }
      const EpisodeStats st = collector_.run_episode(env_, policy_of(*actor), buffers_, collect_rng_);
      if (buffers_.ready(n)) budget += std::lround(st.steps * hyper_.updates_per_step);
      if (on_episode && on_episode(st)) break;
    }
  } catch (...) {
    done = true;
    learner.join();
    throw;
  }
  done = true;
  learner.join();
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os.write(kMagic, 8);
  write_u64(os, kCheckpointVersion);
  write_string(os, hyper_to_json(hyper_).dump());
  write_u64(os, seed_);
  agent_.write(os);
  write_f64(os, collector_.sigma());
  write_u64(os, static_cast<std::uint64_t>(collector_.episodes()));
  write_u64(os, collector_.cursor());
  write_string(os, rng_state(init_rng_));
  write_string(os, rng_state(collect_rng_));
  write_string(os, rng_state(train_rng_));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

void Trainer::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  read_header(is);
  const Td3Hyper h = hyper_from_json(nlohmann::json::parse(read_string(is)));
  if (h.hidden != hyper_.hidden) throw std::runtime_error("checkpoint architecture differs from config");
  seed_ = read_u64(is);
  agent_.read(is);
  const double sigma = read_f64(is);
  const auto episode = static_cast<long>(read_u64(is));
  const auto k = static_cast<std::size_t>(read_u64(is));
  collector_.restore(sigma, episode, k);
  set_rng_state(init_rng_, read_string(is));
  set_rng_state(collect_rng_, read_string(is));
  set_rng_state(train_rng_, read_string(is));
}

Td3Agent load_agent(const std::string& path, Td3Hyper* hyper) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  read_header(is);
  const Td3Hyper h = hyper_from_json(nlohmann::json::parse(read_string(is)));
  read_u64(is);
  std::mt19937_64 rng(0);
  Td3Agent agent(h, rng);
  agent.read(is);
  if (hyper) *hyper = h;
  return agent;
}

}  // namespace mbr
