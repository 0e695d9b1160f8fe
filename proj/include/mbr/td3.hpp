#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbr/env.hpp"
#include "mbr/mlp.hpp"
#include "mbr/replay.hpp"

namespace mbr {

using Net = Mlp<Real>;

struct Td3Hyper {
  int domains = 10;              // N
  double episode_time = 30.0;    // t_e
  int episodes = 500;            // N_e
  double sigma = 0.15;           // initial exploration std
  double sigma_decay = 0.95;     // xi
  int sigma_period = 100;        // n_sigma
  int policy_delay = 2;          // d_p
  double gamma = 0.98;
  double tau = 0.01;             // soft update rate
  double actor_clip = 0.1;       // c_alpha
  double critic_clip = 0.1;      // c_beta
  double split_min = 0.6;
  double split_max = 1.0;
  double yaw_range = 0.5;        // psi_0
  int batch_size = 128;          // per buffer
  double critic_lr = 1e-3;
  double actor_lr = 1e-4;
  std::size_t capacity = 20000;  // per buffer
  int hidden = 256;
  double actor_init_scale = 1e-3;
  double updates_per_step = 1.0;
  bool clip = true;
  bool multi_buffer = true;
  bool target_noise = false;
  double target_noise_std = 0.2;
  double target_noise_clip = 0.5;

  void validate() const;
};

nlohmann::json hyper_to_json(const Td3Hyper& h);
Td3Hyper hyper_from_json(const nlohmann::json& j, Td3Hyper base = {});

/// Exploration std in force during 1-based episode i.
double sigma_at_episode(const Td3Hyper& h, long episode);

struct TrainStats {
  double critic_loss = 0.0;  // mean of the two critics' losses
  double actor_objective = 0.0;
  bool actor_updated = false;
};

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Td3Agent {
 public:
  Td3Agent() = default;
  Td3Agent(const Td3Hyper& h, std::mt19937_64& rng);

  Action act(const Observation& obs) const;
  RMatrix act_batch(const RMatrix& obs) const;

  /// Bootstrapped targets for a batch. Optional outputs receive the
  /// single-critic targets r + gamma (1 - d) Q'_j.
  RMatrix targets(const Batch& b, std::mt19937_64* noise_rng = nullptr, RMatrix* y1 = nullptr,
                  RMatrix* y2 = nullptr) const;

  TrainStats train_on_batch(const Batch& b, std::mt19937_64& rng);
  /// Samples one batch per buffer and trains; throws InsufficientData when
  /// any buffer is short.
  TrainStats train_step(const MultiBuffer& buffers, std::mt19937_64& rng);

  long long iterations() const { return iterations_; }
  const Td3Hyper& hyper() const { return hyper_; }
  void set_hyper(const Td3Hyper& h) { hyper_ = h; }

  Net actor, critic1, critic2;
  Net actor_target, critic1_target, critic2_target;
  Adam<Real> actor_opt, critic1_opt, critic2_opt;

  void write(std::ostream& os) const;
  void read(std::istream& is);

 private:
  Td3Hyper hyper_;
  long long iterations_ = 0;
  mutable Net::Cache cache_a_, cache_c_;
};

struct EpisodeStats {
  long episode = 0;  // 1-based
  double cumulative_reward = 0.0;
  double sigma = 0.0;
  double split = 0.0;
  double yaw = 0.0;
  int steps = 0;
  bool terminated = false;
  std::size_t domain = 0;
};

/// Domain-randomized episode collection with per-episode buffer rotation.
class Collector {
 public:
  explicit Collector(const Td3Hyper& h);

  /// Runs one full episode with `policy` and stores it in the buffer of the
  /// current domain; `policy` maps an observation to a deterministic action.
  EpisodeStats run_episode(InvertEnv& env, const std::function<Action(const Observation&)>& policy,
                           MultiBuffer& buffers, std::mt19937_64& rng);

  double sigma() const { return sigma_; }
  void force_sigma(double s) { sigma_ = s; sigma_forced_ = true; }
  long episodes() const { return episode_; }
  std::size_t cursor() const { return k_; }
  void restore(double sigma, long episode, std::size_t k);

 private:
  Td3Hyper hyper_;
  double sigma_;
  bool sigma_forced_ = false;
  long episode_ = 0;
  std::size_t k_ = 0;
};

/// Full training session: env, buffers, agent, collector and rng streams.
class Trainer {
 public:
  Trainer(EnvConfig env, Td3Hyper hyper, std::uint64_t seed);

  /// Collect one episode, then run E gradient steps when buffers allow.
  EpisodeStats run_episode();

  /// Runs until N_e episodes or until `on_episode` returns true.
  void train(const std::function<bool(const EpisodeStats&)>& on_episode);

  /// Collector and trainer on separate threads. Not bitwise reproducible.
  void train_concurrent(const std::function<bool(const EpisodeStats&)>& on_episode);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  Td3Agent& agent() { return agent_; }
  const Td3Agent& agent() const { return agent_; }
  MultiBuffer& buffers() { return buffers_; }
  Collector& collector() { return collector_; }
  const Td3Hyper& hyper() const { return hyper_; }
  const EnvConfig& env_config() const { return env_cfg_; }
  long long gradient_steps() const { return agent_.iterations(); }

 private:
  EnvConfig env_cfg_;
  Td3Hyper hyper_;
  std::uint64_t seed_;
  InvertEnv env_;
  MultiBuffer buffers_;
  std::mt19937_64 init_rng_, collect_rng_, train_rng_;
  Td3Agent agent_;
  Collector collector_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Loads only the networks from a checkpoint (for evaluation).
Td3Agent load_agent(const std::string& path, Td3Hyper* hyper = nullptr);

/// Deterministic policy wrapper around an actor network.
std::function<Action(const Observation&)> policy_of(const Net& actor);

}  // namespace mbr
