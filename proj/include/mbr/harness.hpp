#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbr/control.hpp"
#include "mbr/td3.hpp"

namespace mbr {

struct SuccessCriterion {
  double roll_tol = 0.2;   // rad, on pi - |phi|
  double pitch_tol = 0.3;  // rad
  double window = 5.0;     // s, held to the end
  double horizon = 30.0;   // s

  void validate() const;
};

struct SuccessResult {
  bool success = false;
  double time_to_inversion = -1.0;  // first t after which the hold never breaks; -1 if none
  double final_roll_dev = 0.0;
};

SuccessResult evaluate_success(const Rollout& log, const SuccessCriterion& crit);

/// Trailing mean; the first window-1 entries average what is available.
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window);

/// 1-based episode where the full-window moving average first reaches
/// `threshold`, or -1.
long episodes_to_convergence(const std::vector<double>& returns, std::size_t window, double threshold);

struct GridCell {
  double extra_weight = 0.02335;  // kg
  double split = 1.0;
  double motor_gain = 1.7;

  bool operator<(const GridCell& o) const;
};

struct EvalGrid {
  std::vector<GridCell> cells;
  int seeds = 3;
  int episodes = 1;  // per seed
  bool baseline = false;
  double yaw_range = 0.5;  // psi0 for the seeded start yaw

  void validate() const;
};

/// Plant for a grid cell: nominal file values with m_w, lambda, g_m replaced.
BlimpParams cell_params(const BlimpParams& nominal, const GridCell& c);

/// Evaluation environment: nominal allocator model, the criterion horizon,
/// no position bound.
EnvConfig eval_env_config(const EnvConfig& train_cfg, const SuccessCriterion& crit);

struct CellTrial {
  GridCell cell;
  std::string method;  // "policy" or "baseline"
  int seed = 0;
  int episode = 0;
  double yaw = 0.0;
  SuccessResult result;
};

struct CellSummary {
  GridCell cell;
  std::string method;
  int successes = 0;
  int trials = 0;
  bool success = false;  // strict majority
  double median_time_to_inversion = -1.0;
};

struct GridReport {
  std::vector<CellTrial> trials;
  std::vector<CellSummary> cells;
};

/// Yaw for (cell seed, episode): seed 0 episode 0 starts at zero yaw, the
/// rest draw from U(-psi0, psi0).
double trial_yaw(int seed, int episode, double yaw_range);

GridReport run_grid(const EvalGrid& grid, const EnvConfig& train_cfg, const SuccessCriterion& crit,
                    const Net* actor, const EnergyShapingGains* baseline, int workers = 1);

/// Everything a run reads from its config file.
struct RunConfig {
  std::filesystem::path config_path;
  BlimpParams params;
  EnvConfig env;
  Td3Hyper hyper;
  std::uint64_t seed = 1;
  std::filesystem::path output = "runs/default";
  SuccessCriterion success;
  EvalGrid grid;
  EnergyShapingGains baseline;
  int checkpoint_every = 100;
  bool concurrent = false;

  // Ablation
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3};
  double convergence_threshold = 30.0;
  std::size_t smoothing_window = 19;

  // Deployment
  nlohmann::json deploy;

  nlohmann::json raw;
};

RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& c);

nlohmann::json reward_to_json(const RewardParams& r);
RewardParams reward_from_json(const nlohmann::json& j, RewardParams base = {});
nlohmann::json grid_to_json(const EvalGrid& g);
EvalGrid grid_from_json(const nlohmann::json& j);
nlohmann::json baseline_to_json(const EnergyShapingGains& g);
EnergyShapingGains baseline_from_json(const nlohmann::json& j, EnergyShapingGains base = {});

/// %.9g formatting used by every CSV writer.
std::string fmt9(double x);

void write_rollout_csv(const Rollout& log, const std::filesystem::path& path);
void write_grid_csv(const GridReport& r, const std::filesystem::path& trials_path,
                    const std::filesystem::path& matrix_path);

struct TrainOutcome {
  std::vector<EpisodeStats> episodes;
  std::filesystem::path checkpoint;
};

/// Writes training_log.csv, timing.csv, checkpoints and summary.json to `out`.
TrainOutcome run_training(const RunConfig& cfg, std::uint64_t seed, const std::filesystem::path& out);

struct AblationVariant {
  std::string name;
  bool clip = true;
  bool multi_buffer = true;
};

std::vector<AblationVariant> ablation_variants();

struct AblationSummary {
  std::string variant;
  std::vector<long> convergence;  // per seed, -1 if never
  double median = 0.0;            // never-converged counts as N_e + 1
};

std::vector<AblationSummary> run_ablation(const RunConfig& cfg, const std::filesystem::path& out, int workers = 1);

struct DeployScenario {
  BlimpParams sim;
  BlimpParams real;
  MappingLayer mapping;
  PdGains pd;
  double duration = 60.0;
  std::vector<double> roll_scales = {0.5, 0.6, 0.7, 0.8};
  // Table of (m_w1, m_w2) in kg for the weight-configuration comparison.
  std::vector<std::pair<double, double>> weights;
  double drag_scale = 1.2;
  double inertia_scale = 1.1;
};

/// Sim params with a weight configuration and the drag/inertia mismatch.
BlimpParams mismatched_params(const BlimpParams& sim, double top, double bottom, double drag_scale,
                              double inertia_scale);

DeployScenario scenario_from_json(const nlohmann::json& j, const BlimpParams& sim);

struct DeployTrial {
  std::string label;
  double roll_scale = 0.0;
  double top = 0.0, bottom = 0.0;
  double handover_time = -1.0;
  SuccessResult result;
  Rollout log;
};

/// Mapping-scale sweep on the default mismatch followed by the weight table
/// at the scenario's own scale.
std::vector<DeployTrial> run_deploy(const DeployScenario& sc, const EnvConfig& env, const Net& actor,
                                    const SuccessCriterion& crit);

}  // namespace mbr
