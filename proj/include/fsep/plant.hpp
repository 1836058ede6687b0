#pragma once

#include <array>

#include "fsep/mathcore.hpp"

namespace fsep {

/// Physical parameters of the vehicle. Defaults are the reference airframe
/// (1.121 kg quadrotor, 0.2122 m rotor spacing).
struct VehicleParams {
  double mass = 1.121;
  double gravity = 9.81;
  double d_phi = 0.2122;
  double d_theta = 0.2122;
  Vec3 inertia{5.6e-3, 5.6e-3, 8.1e-3};
  // Yaw reaction-torque arm. Not published for the reference airframe; placeholder value.
  double c_tau_f = 0.01;
  // Per-rotor thrust ceiling. Not published; chosen so hover sits near 46 % of it.
  double f_max = 6.0;
  /// Maximum length, width and height of the airframe (bounds the CoG offset).
  Vec3 body_box{0.3, 0.3, 0.1};

  void validate() const;
  Vec3 gravity_vector() const { return {0.0, 0.0, -gravity}; }
  double hover_force() const { return mass * gravity / 4.0; }
};

struct RigidState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  EulerAngles angles;
  Vec3 omega = Vec3::Zero();  // body rates [p q r]

  bool finite() const;
  double max_abs() const;
};

struct RigidStateDot {
  Vec3 position_dot = Vec3::Zero();
  Vec3 velocity_dot = Vec3::Zero();
  Vec3 angles_dot = Vec3::Zero();
  Vec3 omega_dot = Vec3::Zero();
};

/// Collective thrust along z_B and body moments.
struct Wrench {
  double thrust = 0.0;
  Vec3 moment = Vec3::Zero();

  Vec4 as_vector() const { return {thrust, moment.x(), moment.y(), moment.z()}; }
  static Wrench from_vector(const Vec4& u) { return {u(0), u.tail<3>()}; }
};

/// Actuator degradation. Loss of effectiveness lambda_i scales rotor thrust from
/// t_lambda on; coil aging adds lag_aging to the motor time constant of the rotors
/// flagged in aging_mask from t_aging on. cog_offset is present for the whole run.
struct FaultConfig {
  Vec4 lambda = Vec4::Ones();
  double t_lambda = 0.0;
  double lag_nominal = 0.02;  // T_a
  double lag_aging = 0.0;     // T_c
  double t_aging = 0.0;
  std::array<bool, 4> aging_mask{true, false, false, false};
  Vec3 cog_offset = Vec3::Zero();  // l_m

  void validate(const VehicleParams& params) const;
  double lag(int rotor, double t) const;
  double effectiveness(int rotor, double t) const;
};

/// Mixer matrix R_u: [F_m M_x M_y M_z]^T = R_u f.
Mat4 mixer_matrix(const VehicleParams& params);

Wrench mix_forces_to_wrench(const Vec4& f, const VehicleParams& params);

/// Linear map B_xi with load_torque(l_m) == B_xi * l_m at the given attitude.
Mat3 load_torque_matrix(const EulerAngles& angles, const VehicleParams& params);

/// Torque from a centre-of-gravity offset: l_m x (m R_EB G).
Vec3 load_torque(const Vec3& cog_offset, const EulerAngles& angles, const VehicleParams& params);

/// One rotor's critically damped second-order lag (1/(Ts+1))^2.
struct MotorChannel {
  double output = 0.0;
  double rate = 0.0;
};

using MotorState = std::array<MotorChannel, 4>;

MotorState steady_motors(const Vec4& forces);

/// Exact zero-order-hold step of the double lag. Requires dt <= T/5.
MotorChannel motor_step(const MotorChannel& channel, double command, double lag, double dt);

/// Filter output tau seconds into a step held at `command` (closed form, any tau >= 0).
double motor_output_at(const MotorChannel& channel, double command, double lag, double tau);

/// Per-step actuator configuration: saturated commands, active lags and gains.
struct ActuatorSetup {
  Vec4 command = Vec4::Zero();
  Vec4 lag = Vec4::Zero();
  Vec4 gain = Vec4::Ones();
  int saturation_events = 0;
};

ActuatorSetup actuator_setup(const Vec4& f_cmd, const FaultConfig& fault, double t,
                             const VehicleParams& params);

/// Thrust delivered tau seconds into the step that starts at `motors`.
Vec4 delivered_forces(const MotorState& motors, const ActuatorSetup& setup, double tau);

/// Saturate, lag and degrade the commands over one step; advances `motors` and
/// returns the delivered thrust at the end of the step.
Vec4 actuator_chain(const Vec4& f_cmd, const FaultConfig& fault, MotorState& motors, double t,
                    double dt, const VehicleParams& params, int* saturation_events = nullptr);

/// Rigid-body equations of motion.
RigidStateDot derivatives(const RigidState& state, const Wrench& wrench, const Vec3& xi_omega,
                          const VehicleParams& params);

/// Ground-truth vehicle: rigid body, motors and faults, stepped with classical RK4.
/// Rotor commands are held over a step; the lagged motor output is evaluated in
/// closed form at each RK4 stage so the scheme keeps its fourth-order accuracy.
class Plant {
 public:
  Plant(VehicleParams params, FaultConfig fault, RigidState initial, MotorState motors);

  struct StepInfo {
    Vec4 delivered = Vec4::Zero();  // at the end of the step
    int saturation_events = 0;
  };

  StepInfo step(const Vec4& f_cmd, double t, double dt);

  const RigidState& state() const { return state_; }
  const MotorState& motors() const { return motors_; }
  const VehicleParams& params() const { return params_; }
  const FaultConfig& fault() const { return fault_; }

  /// Delivered thrust at the current motor state with the gains active at time t.
  Vec4 delivered_now(double t) const;

 private:
  VehicleParams params_;
  FaultConfig fault_;
  RigidState state_;
  MotorState motors_;
};

}  // namespace fsep
