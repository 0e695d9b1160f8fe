#include "mbr/params_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mbr {

using nlohmann::json;

namespace {

template <int N>
json vec_to_json(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(v(i));
  return a;
}

template <int N>
void read_vec(const json& j, const char* key, Eigen::Matrix<double, N, 1>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != static_cast<std::size_t>(N)) {
    throw std::invalid_argument(std::string("expected array of length ") + std::to_string(N) +
                                " for '" + key + "'");
  }
  for (int i = 0; i < N; ++i) out(i) = a.at(static_cast<std::size_t>(i)).get<double>();
}

void read(const json& j, const char* key, double& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}

}  // namespace

json params_to_json(const BlimpParams& p) {
  json thrusters = json::array();
  for (const auto& t : p.thrusters) {
    thrusters.push_back({{"position", vec_to_json<3>(t.position)},
                         {"direction", vec_to_json<3>(t.direction)}});
  }
  return {
      {"mass",
       {{"gondola", p.gondola_mass},
        {"battery", p.battery_mass},
        {"envelope", p.envelope_mass},
        {"extra_weight", p.extra_weight},
        {"split", p.split}}},
      {"envelope",
       {{"helium_density", p.helium_density},
        {"air_density", p.air_density},
        {"volume", p.volume}}},
      {"geometry",
       {{"gondola_half_height", p.gondola_half_height},
        {"envelope_half_height", p.envelope_half_height}}},
      {"gravity", p.gravity},
      {"motor", {{"gain", p.motor_gain}}},
      {"inertia", {{"rigid_body", vec_to_json<3>(p.inertia)}, {"added", vec_to_json<6>(p.added_mass)}}},
      {"drag", {{"linear", vec_to_json<3>(p.drag_linear)}, {"angular", vec_to_json<3>(p.drag_angular)}}},
      {"thrusters", thrusters},
      {"torque_limit", vec_to_json<3>(p.torque_limit)},
  };
}

BlimpParams params_from_json(const json& j) {
  BlimpParams p = default_params();
  if (j.contains("mass")) {
    const auto& m = j.at("mass");
    read(m, "gondola", p.gondola_mass);
    read(m, "battery", p.battery_mass);
    read(m, "envelope", p.envelope_mass);
    read(m, "extra_weight", p.extra_weight);
    read(m, "split", p.split);
  }
  if (j.contains("envelope")) {
    const auto& e = j.at("envelope");
    read(e, "helium_density", p.helium_density);
    read(e, "air_density", p.air_density);
    read(e, "volume", p.volume);
  }
  if (j.contains("geometry")) {
    read(j.at("geometry"), "gondola_half_height", p.gondola_half_height);
    read(j.at("geometry"), "envelope_half_height", p.envelope_half_height);
  }
  read(j, "gravity", p.gravity);
  if (j.contains("motor")) read(j.at("motor"), "gain", p.motor_gain);
  if (j.contains("inertia")) {
    read_vec<3>(j.at("inertia"), "rigid_body", p.inertia);
    read_vec<6>(j.at("inertia"), "added", p.added_mass);
  }
  if (j.contains("drag")) {
    read_vec<3>(j.at("drag"), "linear", p.drag_linear);
    read_vec<3>(j.at("drag"), "angular", p.drag_angular);
  }
  if (j.contains("thrusters")) {
    p.thrusters.clear();
    for (const auto& t : j.at("thrusters")) {
      Thruster th;
      read_vec<3>(t, "position", th.position);
      read_vec<3>(t, "direction", th.direction);
      p.thrusters.push_back(th);
    }
  }
  read_vec<3>(j, "torque_limit", p.torque_limit);
  p.validate();
  return p;
}

BlimpParams load_params(const std::filesystem::path& path, bool require_neutral) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parameter file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed parameter file " + path.string() + ": " + e.what());
  }
  BlimpParams p = params_from_json(j);
  if (require_neutral) {
    const double neutral = neutral_extra_weight(p);
    if (std::abs(p.extra_weight - neutral) > kNeutralTolerance) {
      throw std::invalid_argument("extra weight " + std::to_string(p.extra_weight) +
                                  " kg is not neutrally buoyant (expected " +
                                  std::to_string(neutral) + " kg)");
    }
  }
  return p;
}

void save_params(const BlimpParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << params_to_json(p).dump(2) << "\n";
}

}  // namespace mbr
