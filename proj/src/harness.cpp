#include "mbr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "mbr/params_io.hpp"

namespace mbr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTimeEps = 1e-9;

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void read_vec3(const json& j, const char* key, Vec3& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw std::invalid_argument(std::string("'") + key + "' needs 3 values");
  out = Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

template <int N>
void read_fixed(const json& j, const char* key, Eigen::Matrix<double, N, 1>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N) throw std::invalid_argument(std::string("'") + key + "' has wrong length");
  for (int i = 0; i < N; ++i) out(i) = a[static_cast<std::size_t>(i)].get<double>();
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_json(const json& j, const fs::path& p) { open_out(p) << j.dump(2) << '\n'; }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <class F>
void parallel_for(std::size_t n, int workers, F fn) {
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string fmt9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x == 0.0 ? 0.0 : x);
  return buf;
}

// --- success -----------------------------------------------------------------

void SuccessCriterion::validate() const {
  if (!(roll_tol > 0 && pitch_tol > 0)) throw std::invalid_argument("success tolerances must be positive");
  if (!(window >= 0 && horizon > 0 && window <= horizon))
    throw std::invalid_argument("hold window must lie in [0, horizon]");
}

SuccessResult evaluate_success(const Rollout& log, const SuccessCriterion& crit) {
  crit.validate();
  SuccessResult out;
  if (log.empty()) return out;
  std::size_t end = 0;
  while (end < log.size() && log[end].t <= crit.horizon + kTimeEps) ++end;
  if (end == 0) return out;
  const RolloutRow& last = log[end - 1];
  out.final_roll_dev = std::numbers::pi - std::abs(last.euler.roll);

  auto holds = [&](const RolloutRow& r) {
    return std::numbers::pi - std::abs(r.euler.roll) < crit.roll_tol && std::abs(r.euler.pitch) < crit.pitch_tol;
  };
  std::size_t first = end;
  while (first > 0 && holds(log[first - 1])) --first;
  const bool covers = last.t >= crit.horizon - kTimeEps && !last.terminated;
  if (!covers || first == end) return out;
  const double start = log[first].t;
  if (start <= crit.horizon - crit.window + kTimeEps) {
    out.success = true;
    out.time_to_inversion = start;
  }
  return out;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= window) sum -= x[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

long episodes_to_convergence(const std::vector<double>& returns, std::size_t window, double threshold) {
  const std::vector<double> ma = moving_average(returns, window);
  for (std::size_t i = window - 1; i < ma.size(); ++i) {
    if (ma[i] >= threshold) return static_cast<long>(i + 1);
  }
  return -1;
}

// --- grid ------------------------------------------------------------------

bool GridCell::operator<(const GridCell& o) const {
  return std::tie(extra_weight, split, motor_gain) < std::tie(o.extra_weight, o.split, o.motor_gain);
}

void EvalGrid::validate() const {
  if (cells.empty()) throw std::invalid_argument("evaluation grid is empty");
  if (seeds < 1 || episodes < 1) throw std::invalid_argument("grid needs at least one seed and episode");
  for (const auto& c : cells) {
    if (!(c.extra_weight >= 0 && c.split >= 0 && c.split <= 1 && c.motor_gain > 0))
      throw std::invalid_argument("grid cell outside the valid parameter range");
  }
}

BlimpParams cell_params(const BlimpParams& nominal, const GridCell& c) {
  BlimpParams p = nominal;
  p.extra_weight = c.extra_weight;
  p.split = c.split;
  p.motor_gain = c.motor_gain;
  p.validate();
  return p;
}

EnvConfig eval_env_config(const EnvConfig& train_cfg, const SuccessCriterion& crit) {
  EnvConfig e = train_cfg;
  e.episode_time = crit.horizon;
  e.position_limit = std::numeric_limits<double>::infinity();
  return e;
}

double trial_yaw(int seed, int episode, double yaw_range) {
  if (seed == 0 && episode == 0) return 0.0;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(episode), 0x9a3u};
  std::mt19937_64 rng(seq);
  return std::uniform_real_distribution<double>(-yaw_range, yaw_range)(rng);
}

GridReport run_grid(const EvalGrid& grid, const EnvConfig& train_cfg, const SuccessCriterion& crit,
                    const Net* actor, const EnergyShapingGains* baseline, int workers) {
  grid.validate();
  crit.validate();
  if (!actor && !baseline) throw std::invalid_argument("nothing to evaluate");
  std::vector<GridCell> cells = grid.cells;
  std::sort(cells.begin(), cells.end());

  std::vector<std::string> methods;
  if (actor) methods.emplace_back("policy");
  if (baseline) methods.emplace_back("baseline");

  GridReport report;
  for (const auto& m : methods)
    for (const auto& c : cells)
      for (int s = 0; s < grid.seeds; ++s)
        for (int e = 0; e < grid.episodes; ++e) {
          CellTrial t;
          t.cell = c;
          t.method = m;
          t.seed = s;
          t.episode = e;
          report.trials.push_back(t);
        }

  const EnvConfig ecfg = eval_env_config(train_cfg, crit);
  parallel_for(report.trials.size(), workers, [&](std::size_t i) {
    CellTrial& t = report.trials[i];
    InvertEnv env(ecfg);
    const BlimpParams plant = cell_params(ecfg.plant, t.cell);
    t.yaw = trial_yaw(t.seed, t.episode, grid.yaw_range);
    const Rollout log = t.method == "policy" ? policy_rollout(env, policy_of(*actor), plant, t.yaw)
                                             : baseline_rollout(env, *baseline, plant, t.yaw);
    t.result = evaluate_success(log, crit);
  });

  for (const auto& m : methods) {
    for (const auto& c : cells) {
      CellSummary s;
      s.cell = c;
      s.method = m;
      std::vector<double> tti;
      for (const auto& t : report.trials) {
        if (t.method != m || t.cell < c || c < t.cell) continue;
        ++s.trials;
        if (t.result.success) {
          ++s.successes;
          tti.push_back(t.result.time_to_inversion);
        }
      }
      s.success = 2 * s.successes > s.trials;
      s.median_time_to_inversion = tti.empty() ? -1.0 : median(tti);
      report.cells.push_back(s);
    }
  }
  return report;
}

// --- config ----------------------------------------------------------------

json reward_to_json(const RewardParams& r) {
  return {{"g_omega", vec3(r.omega_weight)}, {"g_a", vec3(r.action_weight)}, {"g_phi", r.roll_weight},
          {"g_theta", r.pitch_weight},     {"g_psi", r.yaw_weight},       {"zeta", r.bonus_threshold},
          {"g_n", r.error_clip},           {"omega_max", r.omega_max}};
}

RewardParams reward_from_json(const json& j, RewardParams r) {
  read_vec3(j, "g_omega", r.omega_weight);
  read_vec3(j, "g_a", r.action_weight);
  get(j, "g_phi", r.roll_weight);
  get(j, "g_theta", r.pitch_weight);
  get(j, "g_psi", r.yaw_weight);
  get(j, "zeta", r.bonus_threshold);
  get(j, "g_n", r.error_clip);
  get(j, "omega_max", r.omega_max);
  r.validate();
  return r;
}

json grid_to_json(const EvalGrid& g) {
  json cells = json::array();
  for (const auto& c : g.cells) cells.push_back({{"m_w", c.extra_weight}, {"lambda", c.split}, {"g_m", c.motor_gain}});
  return {{"cells", cells}, {"seeds", g.seeds}, {"episodes", g.episodes}, {"baseline", g.baseline}, {"yaw_range", g.yaw_range}};
}

EvalGrid grid_from_json(const json& j) {
  EvalGrid g;
  get(j, "seeds", g.seeds);
  get(j, "episodes", g.episodes);
  get(j, "baseline", g.baseline);
  get(j, "yaw_range", g.yaw_range);
  const GridCell base;
  for (const auto& c : j.value("cells", json::array())) {
    GridCell cell = base;
    get(c, "m_w", cell.extra_weight);
    get(c, "lambda", cell.split);
    get(c, "g_m", cell.motor_gain);
    g.cells.push_back(cell);
  }
  return g;
}

json baseline_to_json(const EnergyShapingGains& g) {
  return {{"k_e", g.pump_gain},
          {"compensation", g.compensation},
          {"switch_angle", g.switch_angle},
          {"feedback", {g.feedback(0), g.feedback(1), g.feedback(2), g.feedback(3)}},
          {"pitch_pd", {g.pitch_pd(0), g.pitch_pd(1)}},
          {"yaw_pd", {g.yaw_pd(0), g.yaw_pd(1)}},
          {"kick_torque", g.kick_torque},
          {"kick_time", g.kick_time}};
}

EnergyShapingGains baseline_from_json(const json& j, EnergyShapingGains g) {
  get(j, "k_e", g.pump_gain);
  get(j, "switch_angle", g.switch_angle);
  get(j, "compensation", g.compensation);
  read_fixed<4>(j, "feedback", g.feedback);
  read_fixed<2>(j, "pitch_pd", g.pitch_pd);
  read_fixed<2>(j, "yaw_pd", g.yaw_pd);
  get(j, "kick_torque", g.kick_torque);
  get(j, "kick_time", g.kick_time);
  g.validate();
  return g;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  RunConfig c;
  c.config_path = path;
  c.raw = json::parse(is);
  const json& j = c.raw;
  const fs::path dir = path.parent_path();

  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (p.is_string()) {
      fs::path pp = p.get<std::string>();
      if (pp.is_relative()) pp = dir / pp;
      if (!fs::exists(pp)) throw std::runtime_error("parameter file not found: " + pp.string());
      c.params = load_params(pp);
    } else {
      c.params = params_from_json(p);
    }
  } else {
    c.params = default_params();
  }
  c.params.validate();

  c.hyper = hyper_from_json(j.value("td3", json::object()));
  c.hyper.validate();

  c.env.plant = c.params;
  c.env.model = c.params;
  c.env.reward = reward_from_json(j.value("reward", json::object()));
  const json env = j.value("env", json::object());
  get(env, "physics_dt", c.env.physics_dt);
  get(env, "control_period", c.env.control_period);
  get(env, "position_limit", c.env.position_limit);
  c.env.episode_time = c.hyper.episode_time;
  c.env.validate();

  get(j, "seed", c.seed);
  if (j.contains("output")) c.output = j.at("output").get<std::string>();
  get(j, "checkpoint_every", c.checkpoint_every);
  get(j, "concurrent", c.concurrent);

  const json s = j.value("success", json::object());
  get(s, "roll_tol", c.success.roll_tol);
  get(s, "pitch_tol", c.success.pitch_tol);
  get(s, "window", c.success.window);
  get(s, "horizon", c.success.horizon);
  c.success.validate();

  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  c.baseline = baseline_from_json(j.value("baseline", json::object()));

  const json a = j.value("ablation", json::object());
  get(a, "seeds", c.ablation_seeds);
  get(a, "threshold", c.convergence_threshold);
  get(a, "window", c.smoothing_window);

  c.deploy = j.value("deploy", json::object());
  if (c.deploy.is_string()) {
    fs::path dp = c.deploy.get<std::string>();
    if (dp.is_relative()) dp = dir / dp;
    std::ifstream ds(dp);
    if (!ds) throw std::runtime_error("cannot open deployment scenario " + dp.string());
    c.deploy = json::parse(ds);
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"params", params_to_json(c.params)},
          {"reward", reward_to_json(c.env.reward)},
          {"env",
           {{"physics_dt", c.env.physics_dt},
            {"control_period", c.env.control_period},
            {"position_limit", c.env.position_limit}}},
          {"td3", hyper_to_json(c.hyper)},
          {"seed", c.seed},
          {"output", c.output.string()},
          {"checkpoint_every", c.checkpoint_every},
          {"concurrent", c.concurrent},
          {"success",
           {{"roll_tol", c.success.roll_tol},
            {"pitch_tol", c.success.pitch_tol},
            {"window", c.success.window},
            {"horizon", c.success.horizon}}},
          {"grid", grid_to_json(c.grid)},
          {"baseline", baseline_to_json(c.baseline)},
          {"ablation",
           {{"seeds", c.ablation_seeds}, {"threshold", c.convergence_threshold}, {"window", c.smoothing_window}}},
          {"deploy", c.deploy}};
}

// --- csv -------------------------------------------------------------------

void write_rollout_csv(const Rollout& log, const fs::path& path) {
  std::ofstream os = open_out(path);
  const Eigen::Index motors = log.empty() ? 4 : log.front().command.size();
  os << "t,phi,theta,psi,omega_x,omega_y,omega_z,a_1,a_2,a_3";
  for (Eigen::Index i = 0; i < motors; ++i) os << ",eta_" << i + 1;
  os << ",reward,terminated,truncated\n";
  for (const auto& r : log) {
    os << fmt9(r.t) << ',' << fmt9(r.euler.roll) << ',' << fmt9(r.euler.pitch) << ',' << fmt9(r.euler.yaw);
    for (int i = 0; i < 3; ++i) os << ',' << fmt9(r.omega(i));
    for (int i = 0; i < 3; ++i) os << ',' << fmt9(r.action(i));
    for (Eigen::Index i = 0; i < motors; ++i) os << ',' << fmt9(i < r.command.size() ? r.command(i) : 0.0);
    os << ',' << fmt9(r.reward) << ',' << int(r.terminated) << ',' << int(r.truncated) << '\n';
  }
}

void write_grid_csv(const GridReport& r, const fs::path& trials_path, const fs::path& matrix_path) {
  std::ofstream t = open_out(trials_path);
  t << "method,m_w,lambda,g_m,seed,episode,yaw,success,time_to_inversion,final_roll_dev\n";
  for (const auto& x : r.trials) {
    t << x.method << ',' << fmt9(x.cell.extra_weight) << ',' << fmt9(x.cell.split) << ','
      << fmt9(x.cell.motor_gain) << ',' << x.seed << ',' << x.episode << ',' << fmt9(x.yaw) << ','
      << int(x.result.success) << ',' << fmt9(x.result.time_to_inversion) << ','
      << fmt9(x.result.final_roll_dev) << '\n';
  }
  std::ofstream m = open_out(matrix_path);
  m << "method,m_w,lambda,g_m,successes,trials,success,median_time_to_inversion\n";
  for (const auto& x : r.cells) {
    m << x.method << ',' << fmt9(x.cell.extra_weight) << ',' << fmt9(x.cell.split) << ','
      << fmt9(x.cell.motor_gain) << ',' << x.successes << ',' << x.trials << ',' << int(x.success) << ','
      << fmt9(x.median_time_to_inversion) << '\n';
  }
}

// --- training --------------------------------------------------------------

TrainOutcome run_training(const RunConfig& cfg, std::uint64_t seed, const fs::path& out) {
  fs::create_directories(out);
  RunConfig echo = cfg;
  echo.seed = seed;
  echo.output = out;
  write_json(run_config_to_json(echo), out / "config.json");

  Trainer trainer(cfg.env, cfg.hyper, seed);
  std::ofstream log = open_out(out / "training_log.csv");
  std::ofstream timing = open_out(out / "timing.csv");
  log << "episode,cumulative_reward,sigma,lambda,psi,steps\n";
  timing << "episode,wall_time\n";
  const auto t0 = std::chrono::steady_clock::now();

  TrainOutcome res;
  auto on_episode = [&](const EpisodeStats& s) {
    res.episodes.push_back(s);
    log << s.episode << ',' << fmt9(s.cumulative_reward) << ',' << fmt9(s.sigma) << ',' << fmt9(s.split) << ','
        << fmt9(s.yaw) << ',' << s.steps << '\n';
    log.flush();
    timing << s.episode << ','
           << fmt9(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) << '\n';
    if (cfg.checkpoint_every > 0 && s.episode % cfg.checkpoint_every == 0 && s.episode < cfg.hyper.episodes) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_%05ld.bin", s.episode);
      trainer.save_checkpoint((out / name).string());
    }
    return false;
  };
  if (cfg.concurrent) {
    trainer.train_concurrent(on_episode);
  } else {
    trainer.train(on_episode);
  }
  res.checkpoint = out / "checkpoint.bin";
  trainer.save_checkpoint(res.checkpoint.string());

  std::vector<double> returns;
  for (const auto& s : res.episodes) returns.push_back(s.cumulative_reward);
  const std::vector<double> ma = moving_average(returns, cfg.smoothing_window);

  const EnvConfig ecfg = eval_env_config(cfg.env, cfg.success);
  InvertEnv env(ecfg);
  const GridCell nominal{cfg.params.extra_weight, 1.0, cfg.params.motor_gain};
  const SuccessResult nom =
      evaluate_success(policy_rollout(env, policy_of(trainer.agent().actor), cell_params(cfg.params, nominal)),
                       cfg.success);

  write_json({{"seed", seed},
              {"episodes", res.episodes.size()},
              {"gradient_steps", trainer.gradient_steps()},
              {"final_sigma", trainer.collector().sigma()},
              {"final_moving_average", ma.empty() ? 0.0 : ma.back()},
              {"convergence_episode",
               episodes_to_convergence(returns, cfg.smoothing_window, cfg.convergence_threshold)},
              {"nominal_success", nom.success},
              {"nominal_time_to_inversion", nom.time_to_inversion},
              {"checkpoint", res.checkpoint.filename().string()}},
             out / "summary.json");
  return res;
}

// --- ablation --------------------------------------------------------------

std::vector<AblationVariant> ablation_variants() {
  return {{"multi_buffer_clip", true, true}, {"multi_buffer_noclip", false, true}, {"single_buffer_clip", true, false}};
}

std::vector<AblationSummary> run_ablation(const RunConfig& cfg, const fs::path& out, int workers) {
  const auto variants = ablation_variants();
  const std::size_t ns = cfg.ablation_seeds.size();
  if (ns == 0) throw std::invalid_argument("ablation needs at least one seed");
  std::vector<long> conv(variants.size() * ns, -1);

  parallel_for(conv.size(), workers, [&](std::size_t i) {
    const AblationVariant& v = variants[i / ns];
    const std::uint64_t seed = cfg.ablation_seeds[i % ns];
    RunConfig c = cfg;
    c.hyper.clip = v.clip;
    c.hyper.multi_buffer = v.multi_buffer;
    c.checkpoint_every = 0;
    const TrainOutcome r = run_training(c, seed, out / v.name / ("seed_" + std::to_string(seed)));
    std::vector<double> returns;
    for (const auto& s : r.episodes) returns.push_back(s.cumulative_reward);
    conv[i] = episodes_to_convergence(returns, cfg.smoothing_window, cfg.convergence_threshold);
  });

  std::vector<AblationSummary> summary;
  std::ofstream csv = open_out(out / "ablation_summary.csv");
  csv << "variant,seed,convergence_episode\n";
  json j = json::array();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationSummary s;
    s.variant = variants[v].name;
    std::vector<double> eff;
    for (std::size_t k = 0; k < ns; ++k) {
      const long c = conv[v * ns + k];
      s.convergence.push_back(c);
      eff.push_back(c < 0 ? static_cast<double>(cfg.hyper.episodes + 1) : static_cast<double>(c));
      csv << s.variant << ',' << cfg.ablation_seeds[k] << ',' << c << '\n';
    }
    s.median = median(eff);
    j.push_back({{"variant", s.variant}, {"convergence", s.convergence}, {"median", s.median}});
    summary.push_back(s);
  }
  write_json({{"threshold", cfg.convergence_threshold}, {"window", cfg.smoothing_window}, {"variants", j}},
             out / "summary.json");
  return summary;
}

// --- deployment ------------------------------------------------------------

BlimpParams mismatched_params(const BlimpParams& sim, double top, double bottom, double drag_scale,
                              double inertia_scale) {
  BlimpParams p = sim;
  p.extra_weight = top + bottom;
  p.split = p.extra_weight > 0 ? top / p.extra_weight : 1.0;
  p.drag_linear *= drag_scale;
  p.drag_angular *= drag_scale;
  p.inertia *= inertia_scale;
  p.added_mass.tail<3>() *= inertia_scale;
  p.validate();
  return p;
}

DeployScenario scenario_from_json(const json& j, const BlimpParams& sim) {
  DeployScenario sc;
  sc.sim = sim;
  get(j, "duration", sc.duration);
  get(j, "drag_scale", sc.drag_scale);
  get(j, "inertia_scale", sc.inertia_scale);
  get(j, "roll_scales", sc.roll_scales);
  if (j.contains("mapping")) {
    read_vec3(j.at("mapping"), "scale", sc.mapping.scale);
    get(j.at("mapping"), "threshold", sc.mapping.threshold);
  }
  if (j.contains("pd")) {
    read_vec3(j.at("pd"), "kp", sc.pd.kp);
    read_vec3(j.at("pd"), "kd", sc.pd.kd);
    get(j.at("pd"), "activation_rate", sc.pd.activation_rate);
  }
  double top = 0.025, bottom = 0.0;
  if (j.contains("real")) {
    get(j.at("real"), "m_w1", top);
    get(j.at("real"), "m_w2", bottom);
  }
  sc.real = mismatched_params(sim, top, bottom, sc.drag_scale, sc.inertia_scale);
  for (const auto& w : j.value("weights", json::array())) {
    if (!w.is_array() || w.size() != 2) throw std::invalid_argument("weights entries need [m_w1, m_w2]");
    sc.weights.emplace_back(w[0].get<double>(), w[1].get<double>());
  }
  sc.mapping.validate();
  sc.pd.validate();
  return sc;
}

std::vector<DeployTrial> run_deploy(const DeployScenario& sc, const EnvConfig& env_cfg, const Net& actor,
                                    const SuccessCriterion& crit) {
  SuccessCriterion c = crit;
  c.horizon = sc.duration;
  EnvConfig e = eval_env_config(env_cfg, c);
  e.model = sc.sim;
  const Policy policy = policy_of(actor);

  std::vector<DeployTrial> trials;
  auto run = [&](const std::string& label, double scale, double top, double bottom, const BlimpParams& real) {
    MappingLayer layer = sc.mapping;
    layer.scale.x() = scale;
    InvertEnv env(e);
    DeployResult r = deploy_rollout(env, policy, layer, sc.pd, real);
    DeployTrial t;
    t.label = label;
    t.roll_scale = scale;
    t.top = top;
    t.bottom = bottom;
    t.handover_time = r.handover_time;
    t.result = evaluate_success(r.log, c);
    t.log = std::move(r.log);
    trials.push_back(std::move(t));
  };
  const double top = sc.real.extra_weight_top(), bottom = sc.real.extra_weight_bottom();
  for (double s : sc.roll_scales) run("scale_" + fmt9(s), s, top, bottom, sc.real);
  for (std::size_t i = 0; i < sc.weights.size(); ++i) {
    const auto [w1, w2] = sc.weights[i];
    run("MBR_" + std::to_string(i + 1), sc.mapping.scale.x(), w1, w2,
        mismatched_params(sc.sim, w1, w2, sc.drag_scale, sc.inertia_scale));
  }
  return trials;
}

}  // namespace mbr
