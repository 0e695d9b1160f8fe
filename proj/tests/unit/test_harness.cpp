#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mbr/harness.hpp"

using namespace mbr;
using std::numbers::pi;

namespace {

// Rows every 0.1 s up to `end`; roll deviation from `dev(t)`.
template <class F>
Rollout trace(double end, F dev, bool terminated = false) {
  Rollout log;
  const int n = static_cast<int>(std::lround(end / 0.1));
  for (int k = 1; k <= n; ++k) {
    RolloutRow r;
    r.t = 0.1 * k;
    r.euler.roll = pi - dev(r.t);
    log.push_back(r);
  }
  if (terminated && !log.empty()) log.back().terminated = true;
  return log;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pinned at inversion succeeds from the first row") {
  const auto s = evaluate_success(trace(30.0, [](double) { return 0.0; }), SuccessCriterion{});
  CHECK(s.success);
  CHECK(s.time_to_inversion == doctest::Approx(0.1));
}

TEST_CASE("leaving the hold inside the window fails") {
  const auto s = evaluate_success(trace(30.0, [](double t) { return t < 10 || t > 28 ? 1.0 : 0.0; }),
                                  SuccessCriterion{});
  CHECK_FALSE(s.success);
  CHECK(s.time_to_inversion < 0);
}

TEST_CASE("time to inversion is the start of the final hold") {
  const auto s = evaluate_success(trace(30.0, [](double t) { return t < 12.05 ? 1.0 : 0.05; }), SuccessCriterion{});
  CHECK(s.success);
  CHECK(s.time_to_inversion == doctest::Approx(12.1));
  CHECK(s.final_roll_dev == doctest::Approx(0.05));
}

TEST_CASE("a hold shorter than the window fails") {
  const auto s = evaluate_success(trace(30.0, [](double t) { return t < 25.5 ? 1.0 : 0.0; }), SuccessCriterion{});
  CHECK_FALSE(s.success);
}

TEST_CASE("short or terminated traces fail") {
  CHECK_FALSE(evaluate_success(trace(20.0, [](double) { return 0.0; }), SuccessCriterion{}).success);
  CHECK_FALSE(evaluate_success(trace(30.0, [](double) { return 0.0; }, true), SuccessCriterion{}).success);
  CHECK_FALSE(evaluate_success(Rollout{}, SuccessCriterion{}).success);
}

TEST_CASE("rows past the horizon are ignored") {
  const auto s = evaluate_success(trace(40.0, [](double t) { return t < 20 || t > 30.05 ? 1.0 : 0.0; }),
                                  SuccessCriterion{});
  CHECK(s.success);
  CHECK(s.time_to_inversion == doctest::Approx(20.0));
}

TEST_CASE("pitch excursion breaks the hold") {
  Rollout log = trace(30.0, [](double) { return 0.0; });
  log[280].euler.pitch = 0.4;
  CHECK_FALSE(evaluate_success(log, SuccessCriterion{}).success);
}

TEST_CASE("tightening the tolerance never turns failure into success") {
  const Rollout log = trace(30.0, [](double t) { return 0.15 + 0.04 * std::sin(t); });
  bool prev = true;
  for (double tol : {0.3, 0.2, 0.18, 0.16, 0.1}) {
    SuccessCriterion c;
    c.roll_tol = tol;
    const bool ok = evaluate_success(log, c).success;
    CHECK((prev || !ok));
    prev = ok;
  }
}

TEST_CASE("success criterion validation") {
  SuccessCriterion c;
  c.window = 40.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SuccessCriterion{};
  c.roll_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("moving average") {
  std::vector<double> x(19, 1.0);
  x.insert(x.end(), 19, 0.0);
  const auto ma = moving_average(x, 19);
  CHECK(ma[18] == 1.0);
  CHECK(ma[37] == 0.0);
  CHECK(ma[27] == doctest::Approx(10.0 / 19));

  const auto c = moving_average(std::vector<double>(50, 3.5), 19);
  for (double v : c) CHECK(v == doctest::Approx(3.5));

  const auto p = moving_average({2.0, 4.0, 6.0}, 19);
  CHECK(p[1] == doctest::Approx(3.0));
  CHECK_THROWS_AS(moving_average(x, 0), std::invalid_argument);
}

TEST_CASE("episodes to convergence needs a full window") {
  std::vector<double> r(100, 0.0);
  for (std::size_t i = 40; i < r.size(); ++i) r[i] = 50.0;
  // 19-window mean first reaches 30 once 12 of 19 entries are 50.
  CHECK(episodes_to_convergence(r, 19, 30.0) == 52);
  CHECK(episodes_to_convergence(std::vector<double>(10, 100.0), 19, 30.0) == -1);
  CHECK(episodes_to_convergence(std::vector<double>(19, 100.0), 19, 30.0) == 19);
}

TEST_CASE("fmt9 formatting") {
  CHECK(fmt9(0.1) == "0.1");
  CHECK(fmt9(1.0 / 3.0) == "0.333333333");
  CHECK(fmt9(0.128645) == "0.128645");
  CHECK(fmt9(-2.5e-12) == "-2.5e-12");
  CHECK(fmt9(30) == "30");
  CHECK(fmt9(-0.0) == "0");
}

TEST_CASE("trial yaw is seeded and bounded") {
  CHECK(trial_yaw(0, 0, 0.5) == 0.0);
  for (int s = 0; s < 5; ++s)
    for (int e = 0; e < 3; ++e) {
      const double y = trial_yaw(s, e, 0.5);
      CHECK(std::abs(y) <= 0.5);
      CHECK(y == trial_yaw(s, e, 0.5));
    }
  CHECK(trial_yaw(1, 0, 0.5) != trial_yaw(2, 0, 0.5));
}

TEST_CASE("cell params replace only the grid fields") {
  const BlimpParams nom = default_params();
  const BlimpParams p = cell_params(nom, {0.01, 0.7, 2.0});
  CHECK(p.extra_weight == 0.01);
  CHECK(p.split == 0.7);
  CHECK(p.motor_gain == 2.0);
  CHECK(p.inertia == nom.inertia);
  CHECK_THROWS(cell_params(nom, {0.01, 1.5, 2.0}));
}

TEST_CASE("empty grid is rejected") {
  EvalGrid g;
  const EnergyShapingGains b;
  CHECK_THROWS_AS(run_grid(g, EnvConfig{}, SuccessCriterion{}, nullptr, &b), std::invalid_argument);
  g.cells.push_back(GridCell{});
  CHECK_THROWS_AS(run_grid(g, EnvConfig{}, SuccessCriterion{}, nullptr, nullptr), std::invalid_argument);
}

TEST_CASE("grid report has one row per cell and method") {
  EvalGrid g;
  g.seeds = 2;
  g.baseline = true;
  g.cells = {{0.025, 1.0, 1.7}, {0.005, 1.0, 1.7}};
  SuccessCriterion c;
  c.horizon = 2.0;
  c.window = 1.0;
  const EnergyShapingGains b;
  const GridReport r = run_grid(g, EnvConfig{}, c, nullptr, &b, 2);
  REQUIRE(r.cells.size() == 2);
  CHECK(r.trials.size() == 4);
  CHECK(r.cells[0].cell.extra_weight == 0.005);
  for (const auto& s : r.cells) {
    CHECK(s.trials == 2);
    CHECK(s.method == "baseline");
  }

  const auto dir = std::filesystem::temp_directory_path() / "mbr_grid_test";
  write_grid_csv(r, dir / "trials.csv", dir / "matrix.csv");
  const std::string m = slurp(dir / "matrix.csv");
  CHECK(m.rfind("method,m_w,lambda,g_m,successes,trials,success,median_time_to_inversion\n", 0) == 0);
  CHECK(std::count(m.begin(), m.end(), '\n') == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("rollout csv header and row count") {
  EnvConfig e;
  e.episode_time = 1.0;
  InvertEnv env(e);
  const Rollout log = baseline_rollout(env, EnergyShapingGains{}, e.plant);
  const auto p = std::filesystem::temp_directory_path() / "mbr_rollout_test.csv";
  write_rollout_csv(log, p);
  const std::string s = slurp(p);
  CHECK(s.rfind("t,phi,theta,psi,omega_x,omega_y,omega_z,a_1,a_2,a_3,eta_1,eta_2,eta_3,eta_4,reward,terminated,"
                "truncated\n",
                0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 11);
  std::filesystem::remove(p);
}

TEST_CASE("run config resolves params and deployment files") {
  const auto cfg = load_run_config(std::filesystem::path(MBR_SOURCE_DIR) / "configs" / "train.json");
  CHECK(cfg.hyper.episodes == 500);
  CHECK(cfg.grid.cells.size() == 20);
  CHECK(cfg.deploy.at("weights").size() == 5);
  const DeployScenario sc = scenario_from_json(cfg.deploy, cfg.params);
  CHECK(sc.real.extra_weight == doctest::Approx(0.025));
  CHECK(sc.real.drag_angular.x() == doctest::Approx(1.2 * cfg.params.drag_angular.x()));
  CHECK(sc.weights[4].second == doctest::Approx(0.00259));
}

TEST_CASE("mismatched params keep the split consistent") {
  const BlimpParams p = mismatched_params(default_params(), 0.025, 0.00259, 1.2, 1.1);
  CHECK(p.extra_weight == doctest::Approx(0.02759));
  CHECK(p.extra_weight_top() == doctest::Approx(0.025));
  CHECK(p.extra_weight_bottom() == doctest::Approx(0.00259));
}
