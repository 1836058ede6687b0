#pragma once

#include <complex>
#include <vector>

#include "fsep/mathcore.hpp"
#include "fsep/plant.hpp"

namespace fsep {

using Mat7 = Eigen::Matrix<double, 7, 7>;

/// Measured channels used by the observer bank: y = [v_z p q r].
struct ObserverMeasurement {
  double v_z = 0.0;
  Vec3 omega = Vec3::Zero();

  Vec4 as_vector() const { return {v_z, omega.x(), omega.y(), omega.z()}; }
};

/// Input matrices of the coupled model
///   y' = drift(y) + B R_u f + B* d_gamma + B_xi_aug l_m.
struct InputMatrices {
  Mat4 B = Mat4::Zero();              // diag(cos(phi)cos(theta)/m, 1/Jx, 1/Jy, 1/Jz)
  Mat4 B_star = Mat4::Zero();         // B R_u diag(f)
  Mat43 B_xi_aug = Mat43::Zero();     // [0; J^-1 B_xi]
  Mat34 B_tilde_star = Mat34::Zero(); // rows 2..4 of B*
  Mat3 B_xi_tilde = Mat3::Zero();     // rows 2..4 of B_xi_aug
  Mat3 B_xi = Mat3::Zero();           // torque map, xi = B_xi l_m
};

InputMatrices build_input_matrices(const VehicleParams& params, const Vec4& f_applied,
                                   const EulerAngles& angles);

/// Known part of y': gravity on v_z and the gyroscopic terms on the rates.
Vec4 observer_drift(const ObserverMeasurement& y, const VehicleParams& params);

/// Literal gain test: both matrices -k1 B* + k1'k1 + B~*'B~* and
/// -k2 B~xi + k2'k2 + B_xi'B_xi must have eigenvalues with negative real part.
struct GainConditionReport {
  bool pass = false;
  std::vector<std::complex<double>> eig_loe;
  std::vector<std::complex<double>> eig_load;
  double max_real_loe = 0.0;
  double max_real_load = 0.0;
  /// Trace of each matrix; a non-negative trace rules out a pass.
  double trace_loe = 0.0;
  double trace_load = 0.0;
};

GainConditionReport check_gain_condition(const Mat4& k1, const Mat3& k2, const InputMatrices& m);

/// Matrix A of the estimation-error dynamics e' = A e, e = [d_gamma~; l_m~].
Mat7 error_dynamics_matrix(const Mat4& k1, const Mat3& k2, const InputMatrices& m);

/// Largest real part over the eigenvalues of error_dynamics_matrix.
double error_dynamics_abscissa(const Mat4& k1, const Mat3& k2, const InputMatrices& m);

/// Smallest eigenvalue of sym(G H) where e' = -G H e. A non-negative value means
/// V0 = |e|^2 / 2 cannot increase along the error dynamics.
double lyapunov_margin(const Mat4& k1, const Mat3& k2, const InputMatrices& m);

/// V0 = 0.5 (d_gamma~' d_gamma~ + l_m~' l_m~).
double lyapunov_v0(const Vec4& d_gamma_err, const Vec3& l_m_err);

struct ObserverGains {
  Mat4 k1 = Mat4::Zero();
  Mat3 k2 = Mat3::Zero();
};

/// Default gains at the level hover point. k1 acts only on the target rotor and
/// reads v_z and r, the two channels the CoG offset cannot reach at level
/// attitude; k2 is the scaled pseudo-inverse of the load map. Error poles sit at
/// -bandwidth_loe and -bandwidth_load.
ObserverGains design_default_gains(const VehicleParams& params, int target_rotor,
                                   double bandwidth_loe, double bandwidth_load);

/// Gradient gains k1 = kappa B*', k2 = kappa B~xi'; they make V0 non-increasing.
ObserverGains gradient_gains(const InputMatrices& m, double kappa);

struct IntegratedObserverState {
  Vec4 z1 = Vec4::Zero();
  Vec3 z2 = Vec3::Zero();
  Vec4 d_gamma_hat = Vec4::Zero();  // clamped to [-1, 0]
  Vec3 l_m_hat = Vec3::Zero();
};

/// LoE and load-uncertainty observer pair with linear p1 = k1 y, p2 = k2 omega.
class IntegratedObserver {
 public:
  /// Throws GainConditionViolated when the error dynamics at the hover point
  /// have an eigenvalue with positive real part.
  IntegratedObserver(const VehicleParams& params, ObserverGains gains);

  /// Sets z so the estimates start at the given values.
  void reset(const ObserverMeasurement& y, const Vec4& d_gamma0, const Vec3& l_m0);

  /// One explicit Euler step. f_model is the thrust the model believes each
  /// rotor delivers; m must be built from the same forces.
  void step(const ObserverMeasurement& y, const Vec4& f_model, const InputMatrices& m, double dt);

  const IntegratedObserverState& state() const { return state_; }
  Vec4 d_gamma_raw(const ObserverMeasurement& y) const;
  const ObserverGains& gains() const { return gains_; }
  const GainConditionReport& hover_report() const { return hover_report_; }
  double hover_abscissa() const { return hover_abscissa_; }

 private:
  VehicleParams params_;
  ObserverGains gains_;
  IntegratedObserverState state_;
  GainConditionReport hover_report_;
  double hover_abscissa_ = 0.0;
  double step_limit_ = 0.0;
};

/// Mirror of the actuator lag that the observers assume: saturation followed by
/// the double lag with the believed time constant and unit gain.
class ActuatorModel {
 public:
  ActuatorModel(const VehicleParams& params, double lag_nominal, const Vec4& initial);

  void set_lag(int rotor, double lag) { lag_(rotor) = lag; }
  double lag(int rotor) const { return lag_(rotor); }
  const Vec4& output() const { return output_; }
  void step(const Vec4& f_cmd, double dt);

 private:
  VehicleParams params_;
  Vec4 lag_;
  MotorState motors_;
  Vec4 output_;
};

/// Delivered force of one rotor modelled as the output of the exosystem
///   w' = S w,  S = [[0,0,0],[0,0,beta],[0,-beta,0]],  d = w0 + ws,
/// so w0 is the offset and ws the sinusoid at beta. Disturbance-observer form
///   w^ = z + L y,  z' = (S - L b1 H) w^ - L F,
/// with F the known part of y' and b1 = B R_u e_target.
class PeriodicObserver {
 public:
  PeriodicObserver(const VehicleParams& params, int target_rotor, double beta, double pole);

  void reset(const ObserverMeasurement& y, double offset0);
  void step(const ObserverMeasurement& y, const Vec4& known_rate, const Vec4& b1, double dt);

  /// Sinusoidal part d^_a of the delivered force.
  double d_a_hat() const { return w_hat_(1); }
  double offset_hat() const { return w_hat_(0); }
  const Vec3& exo_state() const { return w_hat_; }
  const Eigen::Matrix<double, 3, 4>& gain() const { return l_; }
  const Vec3& injection() const { return g_; }

 private:
  Mat3 s_;
  Eigen::RowVector3d h_;
  Eigen::Matrix<double, 3, 4> l_;
  Vec3 g_;
  Vec3 z_ = Vec3::Zero();
  Vec3 w_hat_ = Vec3::Zero();
};

/// Input column of one rotor: B R_u e_i at the given attitude.
Vec4 rotor_input_column(const VehicleParams& params, const EulerAngles& angles, int rotor);

/// Known part of y' while the target rotor is treated as unknown: drift, the
/// other rotors' modelled thrust with their LoE estimates, and the load torque.
Vec4 periodic_known_rate(const VehicleParams& params, const ObserverMeasurement& y,
                         const EulerAngles& angles, const Vec4& f_model, const Vec4& d_gamma_hat,
                         const Vec3& l_m_hat, int target_rotor);

enum class FtdoScheme {
  /// Implicit Euler with the set-valued sign: no chattering, and a constant
  /// disturbance is recovered exactly once sliding.
  Implicit,
  /// Explicit Euler with `substeps` sub-steps and inputs held over the call.
  Explicit,
};

struct FtdoGains {
  double lambda0 = 1.5;
  double lambda1 = 1.1;
  double L = 100.0;
  FtdoScheme scheme = FtdoScheme::Implicit;
  /// Explicit scheme only. With more than one, v1 is the mean rate of z1 over
  /// the call rather than the last switching value.
  int substeps = 10;

  void validate() const;
};

/// Finite-time disturbance observer state, one entry per channel (roll, pitch).
struct FtdoState {
  Vec2 z0 = Vec2::Zero();  // estimate of x3
  Vec2 z1 = Vec2::Zero();  // estimate of d_psi
  Vec2 v0 = Vec2::Zero();
  Vec2 v1 = Vec2::Zero();  // z1', used by the control law
  Vec2 x4_prev = Vec2::Zero();
  bool started = false;
};

/// Robust exact differentiator for x3' = x4 + d_psi. x3 and x4 are the samples
/// at the end of the step; the implicit scheme averages x4 over the step.
FtdoState ftdo_step(const FtdoState& s, const Vec2& x3, const Vec2& x4, const FtdoGains& g, double dt);

}  // namespace fsep
