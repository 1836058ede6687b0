#pragma once

#include <array>
#include <optional>

#include "fsep/mathcore.hpp"
#include "fsep/observers.hpp"
#include "fsep/plant.hpp"

namespace fsep {

/// Nonsingular terminal sliding-mode parameters for roll and pitch.
struct SmcParams {
  Vec2 gamma{0.05, 0.05};
  int eps1 = 7;
  int eps2 = 5;
  double eps3 = 0.4;
  double k = 1000.0;
  /// Width of the tanh smoothing of sgn(s); 0 selects the pure sign.
  double boundary_layer = 2.0;

  double ratio() const { return static_cast<double>(eps1) / eps2; }
  void validate() const;
};

struct AttitudeReference {
  Vec2 x3_d = Vec2::Zero();      // (phi_d, theta_d)
  Vec2 x4_d = Vec2::Zero();      // (p_d, q_d)
  Vec2 x4_d_dot = Vec2::Zero();
};

/// s = e3 + gamma * sig(e4 + d_psi_hat)^(eps1/eps2), element-wise.
Vec2 sliding_surface(const Vec2& e3, const Vec2& e4, const Vec2& d_psi_hat, const SmcParams& p);

/// Roll/pitch moments (M_x, M_y). d0_hat is the roll/pitch part of the
/// fault and load estimate in angular-acceleration units; v1 is the FTDO rate.
Vec2 attitude_control(const RigidState& x, const AttitudeReference& ref, const Vec2& d_psi_hat,
                      const Vec2& v1, const Vec2& d0_hat, const SmcParams& p, const VehicleParams& params);

/// Scalar switching-gain bound: the roll/pitch rows of B R_u at full thrust
/// plus half the load torque of a CoG offset at the body-box corner.
double min_switching_gain(const VehicleParams& params);

/// Reference position with derivatives; d[n] is the n-th time derivative.
struct ReferencePoint {
  std::array<Vec3, 5> d{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

  const Vec3& position() const { return d[0]; }
};

struct PositionGains {
  Vec3 kp{4.0, 4.0, 4.0};
  Vec3 kd{4.0, 4.0, 4.0};
  double tilt_limit = 0.5;  // rad
};

struct OuterLoopOutput {
  double thrust = 0.0;
  double phi_d = 0.0;
  double theta_d = 0.0;
  Vec2 accel_xy = Vec2::Zero();  // horizontal acceleration command after the tilt limit
  bool tilt_limited = false;
  bool thrust_clamped = false;
};

/// PD position loop with acceleration feed-forward. Vertical thrust is inverted
/// at the current tilt; desired roll/pitch come from the small-angle relations.
/// The horizontal command is limited in norm to g * tilt_limit, which bounds
/// both angles at any heading.
/// d0_z is the vertical fault estimate (m/s^2) removed from the thrust demand.
OuterLoopOutput position_outer_loop(const Vec3& p_e, const Vec3& v_e, const EulerAngles& angles,
                                    const ReferencePoint& ref, const PositionGains& gains,
                                    const VehicleParams& params, double d0_z = 0.0);

struct AllocationResult {
  Vec4 f = Vec4::Zero();
  int clamp_events = 0;
  double yaw_scale = 1.0;  // fraction of the requested M_z that was kept
};

/// f = R_u^-1 u. When that leaves [0, f_max], M_z is scaled back first (down
/// to zero) so thrust and roll/pitch moments survive; what remains is clamped.
AllocationResult allocate_nominal(const Wrench& u, const VehicleParams& params);

/// Target rotor receives f_ex; the other three rotors realise (F_m, M_x, M_y).
/// Yaw is left to whatever results.
AllocationResult allocate_with_excitation(double thrust, double m_x, double m_y, double f_ex,
                                          const VehicleParams& params, int target_rotor = 0);

/// Critically damped second-order filter with its first two derivatives.
class CommandFilter {
 public:
  explicit CommandFilter(double bandwidth) : w_(bandwidth) {}
  void reset(const Vec2& x);
  void step(const Vec2& command, double dt);
  const Vec2& value() const { return x_; }
  const Vec2& rate() const { return xd_; }
  const Vec2& accel() const { return xdd_; }

 private:
  double w_;
  Vec2 x_ = Vec2::Zero();
  Vec2 xd_ = Vec2::Zero();
  Vec2 xdd_ = Vec2::Zero();
};

/// Roll/pitch reference for a horizontal acceleration a (inertial, with its
/// first two derivatives) at heading psi turning at psi_dot. The rotation by
/// psi is applied after filtering, so a fast yaw spin does not lag the tilt
/// direction.
AttitudeReference tilt_reference(const Vec2& a, const Vec2& a_dot, const Vec2& a_ddot, double psi, double psi_dot,
                                 double gravity);

/// Euler yaw rate from body rates.
double heading_rate(const EulerAngles& angles, const Vec3& omega);

struct ControllerConfig {
  SmcParams smc;
  PositionGains position;
  FtdoGains ftdo;
  double yaw_damping = 2.0;         // 1/s
  double command_bandwidth = 10.0;  // rad/s
};

/// Fault and load estimate expressed in the rates of y = [v_z p q r]:
/// d0 = B* d_gamma_hat + B_xi_aug l_m_hat.
Vec4 composite_estimate(const InputMatrices& m, const Vec4& d_gamma_hat, const Vec3& l_m_hat);

/// Outer loop, terminal SMC, yaw damper and allocation, with the controller's
/// filter and FTDO state.
class SafetyController {
 public:
  SafetyController(const VehicleParams& params, ControllerConfig cfg);

  struct Output {
    Vec4 f_cmd = Vec4::Zero();
    Wrench wrench;
    OuterLoopOutput outer;
    AttitudeReference attitude;
    Vec2 s = Vec2::Zero();
    Vec2 d_psi_hat = Vec2::Zero();
    int clamp_events = 0;
  };

  void reset(const RigidState& x);

  /// f_ex set selects the excitation allocation with the configured target rotor.
  Output update(const RigidState& meas, const ReferencePoint& ref, const Vec4& d0_hat,
                std::optional<double> f_ex, int target_rotor, double dt);

  const ControllerConfig& config() const { return cfg_; }
  const FtdoState& ftdo() const { return ftdo_; }

 private:
  VehicleParams params_;
  ControllerConfig cfg_;
  CommandFilter filter_;
  FtdoState ftdo_;
};

}  // namespace fsep
