#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mbr/harness.hpp"
#include "mbr/params_io.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

mbr::BlimpParams params_arg(const py::object& o) {
  return o.is_none() ? mbr::default_params() : mbr::params_from_json(from_py(o));
}

py::dict rollout_dict(const mbr::Rollout& log) {
  const auto n = static_cast<Eigen::Index>(log.size());
  Eigen::VectorXd t(n), reward(n);
  Eigen::MatrixXd euler(n, 3), omega(n, 3), action(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = log[static_cast<std::size_t>(i)];
    t(i) = r.t;
    reward(i) = r.reward;
    euler.row(i) << r.euler.roll, r.euler.pitch, r.euler.yaw;
    omega.row(i) = r.omega.transpose();
    action.row(i) = r.action.transpose();
  }
  py::dict d;
  d["t"] = t;
  d["euler"] = euler;
  d["omega"] = omega;
  d["action"] = action;
  d["reward"] = reward;
  d["terminated"] = !log.empty() && log.back().terminated;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Miniature blimp inverted-pose simulator, TD3 trainer and evaluation harness";

  m.def("rotation_error", [](const mbr::Rotation& r, const mbr::Rotation& rd) {
    const auto e = mbr::so3::rotation_error(r, rd);
    return py::make_tuple(e.axis, e.angle);
  });
  m.def("euler_from_rotation", [](const mbr::Rotation& r) {
    const auto e = mbr::so3::euler_from_rotation(r);
    return py::make_tuple(e.roll, e.pitch, e.yaw);
  });
  m.def("integrate_rotation", &mbr::so3::integrate_rotation, py::arg("r"), py::arg("omega"), py::arg("dt"));

  m.def("default_params", [] { return to_py(mbr::params_to_json(mbr::default_params())); });
  m.def("load_params", [](const std::filesystem::path& p) { return to_py(mbr::params_to_json(mbr::load_params(p))); });
  m.def("neutral_extra_weight", [](py::object p) { return mbr::neutral_extra_weight(params_arg(p)); },
        py::arg("params") = py::none());
  m.def(
      "derive_geometry",
      [](py::object p) {
        const auto g = mbr::derive_geometry(params_arg(p));
        py::dict d;
        d["helium_mass"] = g.helium_mass;
        d["total_mass"] = g.total_mass;
        d["cg_height"] = g.cg_height;
        d["cg_to_buoyancy"] = g.cg_to_buoyancy;
        d["thrust_to_buoyancy"] = g.thrust_to_buoyancy;
        d["buoyancy"] = g.buoyancy;
        d["weight"] = g.weight;
        return d;
      },
      py::arg("params") = py::none());
  m.def("motor_force", &mbr::motor_force, py::arg("eta"), py::arg("gain"));
  m.def("command_from_force", &mbr::command_from_force, py::arg("force"), py::arg("gain"));

  py::class_<mbr::InvertEnv>(m, "InvertEnv")
      .def(py::init([](py::object params, double control_period, double position_limit) {
             mbr::EnvConfig c;
             c.plant = c.model = params_arg(params);
             c.control_period = control_period;
             c.position_limit = position_limit;
             return mbr::InvertEnv(c);
           }),
           py::arg("params") = py::none(), py::arg("control_period") = 0.1, py::arg("position_limit") = 3.0)
      .def("reset", py::overload_cast<double, double, std::uint64_t>(&mbr::InvertEnv::reset), py::arg("split") = 1.0,
           py::arg("yaw") = 0.0, py::arg("seed") = 0)
      .def("step",
           [](mbr::InvertEnv& e, const mbr::Action& a) {
             const auto r = e.step(a);
             return py::make_tuple(r.obs, r.reward, r.terminated, r.truncated);
           })
      .def_property_readonly("time", &mbr::InvertEnv::time)
      .def_property_readonly("rotation", [](const mbr::InvertEnv& e) { return e.state().rotation; })
      .def_property_readonly("omega", [](const mbr::InvertEnv& e) { return e.state().omega; })
      .def_property_readonly("position", [](const mbr::InvertEnv& e) { return e.state().position; });

  m.def("moving_average", &mbr::moving_average, py::arg("x"), py::arg("window") = 19);
  m.def("sigma_at_episode", [](long ep) { return mbr::sigma_at_episode(mbr::Td3Hyper{}, ep); });
  m.def("table2_defaults", [] { return to_py(mbr::hyper_to_json(mbr::Td3Hyper{})); });

  m.def(
      "train",
      [](const std::filesystem::path& config, std::uint64_t seed, const std::filesystem::path& out, int episodes) {
        mbr::RunConfig c = mbr::load_run_config(config);
        if (episodes > 0) c.hyper.episodes = episodes;
        py::gil_scoped_release release;
        const auto r = mbr::run_training(c, seed, out);
        return r.checkpoint;
      },
      py::arg("config"), py::arg("seed"), py::arg("out"), py::arg("episodes") = 0);

  m.def(
      "rollout",
      [](const std::filesystem::path& config, const std::string& checkpoint, double m_w, double split, double g_m) {
        const mbr::RunConfig c = mbr::load_run_config(config);
        mbr::InvertEnv env(mbr::eval_env_config(c.env, c.success));
        const mbr::BlimpParams plant = mbr::cell_params(c.params, {m_w, split, g_m});
        const mbr::Rollout log = checkpoint.empty()
                                     ? mbr::baseline_rollout(env, c.baseline, plant)
                                     : mbr::policy_rollout(env, mbr::policy_of(mbr::load_agent(checkpoint).actor), plant);
        py::dict d = rollout_dict(log);
        const auto s = mbr::evaluate_success(log, c.success);
        d["success"] = s.success;
        d["time_to_inversion"] = s.time_to_inversion;
        return d;
      },
      py::arg("config"), py::arg("checkpoint") = "", py::arg("m_w") = 0.02335, py::arg("split") = 1.0,
      py::arg("g_m") = 1.7);

  m.def(
      "eval_grid",
      [](const std::filesystem::path& config, const std::string& checkpoint, int workers) {
        const mbr::RunConfig c = mbr::load_run_config(config);
        const mbr::Net actor = mbr::load_agent(checkpoint).actor;
        mbr::GridReport r;
        {
          py::gil_scoped_release release;
          r = mbr::run_grid(c.grid, c.env, c.success, &actor, c.grid.baseline ? &c.baseline : nullptr, workers);
        }
        py::list out;
        for (const auto& s : r.cells) {
          py::dict d;
          d["method"] = s.method;
          d["m_w"] = s.cell.extra_weight;
          d["lambda"] = s.cell.split;
          d["g_m"] = s.cell.motor_gain;
          d["success"] = s.success;
          d["successes"] = s.successes;
          d["trials"] = s.trials;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("workers") = 1);
}
