#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "mbr/so3.hpp"

namespace mbr {

using so3::Mat3;
using so3::Rotation;
using so3::Vec3;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Thruster {
  Vec3 position = Vec3::Zero();   // gondola frame, origin at the thrust center c_t
  Vec3 direction = Vec3::UnitX(); // unit
};

/// Physical parameters of the blimp. Body z points from the gondola towards
/// the envelope, so the upright pose is R = I.
struct BlimpParams {
  double gondola_mass = 0.070;         // m_t
  double battery_mass = 0.025;         // m_bat
  double envelope_mass = 0.0386;       // m_e, deflated
  double helium_density = 0.1786;      // rho_h
  double air_density = 1.225;          // rho_air
  double volume = 0.15;                // V
  double gondola_half_height = 0.05;   // h_t
  double envelope_half_height = 0.25;  // h_e
  double extra_weight = 0.02336;       // m_w = m_w1 + m_w2
  double split = 1.0;                  // lambda, m_w1 = lambda m_w (envelope top)
  double motor_gain = 1.7;             // g_m
  double gravity = 9.81;
  Vec6 added_mass = Vec6::Zero();      // diag M_a: 3 translational, 3 rotational
  Vec3 inertia = Vec3::Zero();         // diag I_rb about the center of buoyancy
  Vec3 drag_linear = Vec3::Zero();
  Vec3 drag_angular = Vec3::Zero();
  std::vector<Thruster> thrusters;
  Vec3 torque_limit = Vec3::Zero();    // tau_max, maps actions in [-1,1] to N m

  void validate() const;
  double helium_mass() const { return helium_density * volume; }
  double extra_weight_top() const { return split * extra_weight; }
  double extra_weight_bottom() const { return (1.0 - split) * extra_weight; }
};

/// Calibrated default parameter set (same values as configs/blimp_default.json).
BlimpParams default_params();

/// Centers are expressed in the gondola frame (origin c_t, z up).
struct MassGeometry {
  double helium_mass = 0.0;     // m_h
  double total_mass = 0.0;      // m_rb
  double thrust_to_buoyancy = 0.0;  // r_t^b
  double cg_height = 0.0;       // h_g, c_t -> c_g
  double cg_to_buoyancy = 0.0;  // r_z^b, c_g -> c_b
  Vec3 c_t = Vec3::Zero();
  Vec3 c_g = Vec3::Zero();
  Vec3 c_b = Vec3::Zero();
  double buoyancy = 0.0;        // rho_air V g
  double weight = 0.0;          // m_rb g
};

MassGeometry derive_geometry(const BlimpParams& p);

/// Extra weight that makes buoyancy equal weight; params.extra_weight is ignored.
double neutral_extra_weight(const BlimpParams& p);

struct BodyState {
  Vec3 position = Vec3::Zero();  // world, of c_b
  Vec3 velocity = Vec3::Zero();  // body frame
  Rotation rotation = Rotation::Identity();
  Vec3 omega = Vec3::Zero();     // body frame

  bool finite() const;
};

/// Signed per-thruster commands in [-1, 1].
using MotorCommand = Eigen::VectorXd;

/// Motor thrust polynomial with dead band; the sign of eta selects direction.
double motor_force(double eta, double gain);

/// Inverse of motor_force on the rising branch; saturates at |eta| = 1.
double command_from_force(double force, double gain);

/// Smallest |eta| that produces positive thrust.
double dead_band_command();

/// Maximum single-motor thrust (|eta| = 1).
double max_motor_force(double gain);

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

/// Torque-to-thrust allocation about the center of buoyancy. Uses the
/// minimum-norm least-squares solution and direction-preserving saturation.
class Allocator {
 public:
  Allocator(const BlimpParams& model, const MassGeometry& geom);

  /// Roll and pitch are part of the interface used by the collector; the
  /// gondola-frame allocation itself does not depend on attitude.
  MotorCommand allocate(const Vec3& torque, double roll, double pitch) const;

  /// Thruster forces (N) before conversion to commands, saturation applied.
  Eigen::VectorXd forces(const Vec3& torque) const;

  /// Torque realized by the given per-thruster forces.
  Vec3 torque_from_forces(const Eigen::VectorXd& f) const { return map_ * f; }

  /// Largest torque attainable along each body axis alone.
  Vec3 max_axis_torque() const;

  const Eigen::Matrix<double, 3, Eigen::Dynamic>& torque_map() const { return map_; }
  double gain() const { return gain_; }

 private:
  Eigen::Matrix<double, 3, Eigen::Dynamic> map_;
  Eigen::Matrix<double, Eigen::Dynamic, 3> pinv_;
  double gain_;
  double force_limit_;
};

/// Thruster torque-map columns about the center of buoyancy.
Eigen::Matrix<double, 3, Eigen::Dynamic> thruster_torque_map(const BlimpParams& p,
                                                             const MassGeometry& g);

/// Sum of body-frame force/torque about c_b: thrust, gravity and buoyancy,
/// quadratic drag, external wrench and Coriolis/centripetal coupling.
Wrench net_wrench(const BodyState& s, const MotorCommand& cmd, const BlimpParams& p,
                  const MassGeometry& g, const Wrench& external = {});

/// Thrust-only part of net_wrench.
Wrench thrust_wrench(const MotorCommand& cmd, const BlimpParams& p, const MassGeometry& g);

struct StepOutcome {
  BodyState state;
  bool diverged = false;
};

inline constexpr double kMaxStep = 0.05;
inline constexpr double kDivergence = 1e6;

/// Semi-implicit Euler: velocities from the wrench at the current state,
/// then position and attitude with the updated velocities.
StepOutcome step(const BodyState& s, const MotorCommand& cmd, const BlimpParams& p,
                 const MassGeometry& g, double dt, const Wrench& external = {});

/// Kinetic energy (including added mass) plus gravity/buoyancy potential,
/// with the potential zero at the upright pose at the origin.
double mechanical_energy(const BodyState& s, const BlimpParams& p, const MassGeometry& g);

}  // namespace mbr
