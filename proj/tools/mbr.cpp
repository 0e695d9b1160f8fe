#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "mbr/harness.hpp"
#include "mbr/params_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string checkpoint;
  int workers = 1;
};

mbr::RunConfig load(const Common& c) {
  mbr::RunConfig cfg = mbr::load_run_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

void write_summary(const json& j, const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << '\n';
}

mbr::Net actor_from(const std::string& path) {
  if (path.empty()) throw std::runtime_error("--checkpoint is required");
  if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
  return mbr::load_agent(path).actor;
}

int cmd_train(const Common& c) {
  const mbr::RunConfig cfg = load(c);
  if (!c.seed_set && !cfg.raw.contains("seed")) throw std::runtime_error("train needs a seed");
  const auto res = mbr::run_training(cfg, cfg.seed, cfg.output);
  std::printf("trained %zu episodes, checkpoint %s\n", res.episodes.size(), res.checkpoint.c_str());
  return 0;
}

int cmd_eval_grid(const Common& c) {
  const mbr::RunConfig cfg = load(c);
  const mbr::Net actor = actor_from(c.checkpoint);
  const mbr::GridReport r = mbr::run_grid(cfg.grid, cfg.env, cfg.success, &actor,
                                          cfg.grid.baseline ? &cfg.baseline : nullptr, c.workers);
  mbr::write_grid_csv(r, cfg.output / "grid_trials.csv", cfg.output / "success_matrix.csv");
  json cells = json::array();
  for (const auto& s : r.cells) {
    cells.push_back({{"method", s.method},
                     {"m_w", s.cell.extra_weight},
                     {"lambda", s.cell.split},
                     {"g_m", s.cell.motor_gain},
                     {"success", s.success},
                     {"successes", s.successes},
                     {"trials", s.trials}});
    std::printf("%-8s m_w=%.5g lambda=%.3g g_m=%.3g  %s (%d/%d)\n", s.method.c_str(), s.cell.extra_weight,
                s.cell.split, s.cell.motor_gain, s.success ? "ok" : "x", s.successes, s.trials);
  }
  write_summary({{"checkpoint", c.checkpoint}, {"cells", cells}}, cfg.output / "summary.json");
  return 0;
}

int cmd_ablate(const Common& c) {
  const mbr::RunConfig cfg = load(c);
  const auto s = mbr::run_ablation(cfg, cfg.output, c.workers);
  for (const auto& v : s) std::printf("%-22s median convergence %.1f\n", v.variant.c_str(), v.median);
  return 0;
}

int cmd_deploy(const Common& c) {
  const mbr::RunConfig cfg = load(c);
  const mbr::Net actor = actor_from(c.checkpoint);
  const mbr::DeployScenario sc = mbr::scenario_from_json(cfg.deploy, cfg.params);
  const auto trials = mbr::run_deploy(sc, cfg.env, actor, cfg.success);
  std::ofstream csv((fs::create_directories(cfg.output), cfg.output / "deploy_summary.csv"));
  csv << "label,m_phi,m_w1,m_w2,success,time_to_inversion,handover_time,final_roll_dev\n";
  json rows = json::array();
  for (const auto& t : trials) {
    csv << t.label << ',' << mbr::fmt9(t.roll_scale) << ',' << mbr::fmt9(t.top) << ',' << mbr::fmt9(t.bottom) << ','
        << int(t.result.success) << ',' << mbr::fmt9(t.result.time_to_inversion) << ','
        << mbr::fmt9(t.handover_time) << ',' << mbr::fmt9(t.result.final_roll_dev) << '\n';
    mbr::write_rollout_csv(t.log, cfg.output / ("rollout_" + t.label + ".csv"));
    rows.push_back({{"label", t.label}, {"success", t.result.success}, {"time_to_inversion", t.result.time_to_inversion}});
    std::printf("%-12s %s tti=%.2f\n", t.label.c_str(), t.result.success ? "ok" : "x", t.result.time_to_inversion);
  }
  write_summary({{"checkpoint", c.checkpoint}, {"trials", rows}}, cfg.output / "summary.json");
  return 0;
}

int cmd_rollout(const Common& c) {
  const mbr::RunConfig cfg = load(c);
  const json r = cfg.raw.value("rollout", json::object());
  mbr::GridCell cell{cfg.params.extra_weight, cfg.params.split, cfg.params.motor_gain};
  cell.extra_weight = r.value("m_w", cell.extra_weight);
  cell.split = r.value("lambda", cell.split);
  cell.motor_gain = r.value("g_m", cell.motor_gain);
  const double yaw = r.value("yaw", 0.0);

  mbr::InvertEnv env(mbr::eval_env_config(cfg.env, cfg.success));
  const mbr::BlimpParams plant = mbr::cell_params(cfg.params, cell);
  mbr::Rollout log;
  std::string method;
  if (c.checkpoint.empty()) {
    method = "baseline";
    log = mbr::baseline_rollout(env, cfg.baseline, plant, yaw);
  } else {
    method = "policy";
    log = mbr::policy_rollout(env, mbr::policy_of(actor_from(c.checkpoint)), plant, yaw);
  }
  mbr::write_rollout_csv(log, cfg.output / "rollout.csv");
  const mbr::SuccessResult s = mbr::evaluate_success(log, cfg.success);
  write_summary({{"method", method},
                 {"m_w", cell.extra_weight},
                 {"lambda", cell.split},
                 {"g_m", cell.motor_gain},
                 {"yaw", yaw},
                 {"success", s.success},
                 {"time_to_inversion", s.time_to_inversion},
                 {"final_roll_dev", s.final_roll_dev}},
                cfg.output / "summary.json");
  std::printf("%s: %s, time to inversion %.2f s\n", method.c_str(), s.success ? "success" : "failure",
              s.time_to_inversion);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Miniature blimp inverted-pose training and evaluation"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "random seed")->each([&](const std::string&) { c.seed_set = true; });
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--checkpoint", c.checkpoint, "trained checkpoint");
    sub->add_option("--workers", c.workers, "parallel workers")->check(CLI::PositiveNumber);
  };
  auto* train = app.add_subcommand("train", "train a policy");
  auto* grid = app.add_subcommand("eval-grid", "evaluate a checkpoint over a parameter grid");
  auto* ablate = app.add_subcommand("ablate", "ablation over buffer and clipping variants");
  auto* deploy = app.add_subcommand("deploy", "policy + mapping layer on a mismatched plant");
  auto* rollout = app.add_subcommand("rollout", "single logged episode (policy, or baseline without --checkpoint)");
  for (auto* s : {train, grid, ablate, deploy, rollout}) add_common(s);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(c);
    if (*grid) return cmd_eval_grid(c);
    if (*ablate) return cmd_ablate(c);
    if (*deploy) return cmd_deploy(c);
    if (*rollout) return cmd_rollout(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
