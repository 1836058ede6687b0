#pragma once

#include <span>
#include <vector>

#include "fsep/mathcore.hpp"
#include "fsep/plant.hpp"

namespace fsep {

enum class ExcitationPhase { Off, Constant, Sinusoidal };

/// Admissible auxiliary-signal band [f_lower, f_upper] in newtons.
struct ExcitationEnvelope {
  double f_lower = 0.0;
  double f_upper = 0.0;

  bool nonempty() const { return f_lower <= f_upper; }
  double midpoint() const { return 0.5 * (f_lower + f_upper); }
  bool contains(double f, double tol = 0.0) const { return f >= f_lower - tol && f <= f_upper + tol; }
};

struct ExcitationConfig {
  double alpha = 0.3;  // (0, 1]
  double beta = 20.0;  // rad/s
  int target_rotor = 0;
  ExcitationPhase phase = ExcitationPhase::Off;

  void validate() const;
};

/// Extremes of the reference derivatives over the excitation window.
struct TrajectoryDerivBounds {
  double z_dd_max = 0.0;  // max |z_d''|, m/s^2
  double x_4_max = 0.0;   // max |x_d''''|, m/s^4
  double y_4_max = 0.0;   // max |y_d''''|, m/s^4
};

/// Thrust margins consumed by the trajectory: roll (dx), pitch (dy) and lift (dz), in N.
struct DeltaTerms {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
};

/// Linearized map from roll/pitch torques to the horizontal snap at yaw psi.
Mat2 snap_torque_matrix(double psi, const VehicleParams& params);

DeltaTerms delta_terms(const TrajectoryDerivBounds& bounds, const EulerAngles& angles,
                       const Vec3& xi_hat, const VehicleParams& params);

/// Raw band from the actuator limits and the tracking margins; may be empty.
ExcitationEnvelope envelope_bounds(const DeltaTerms& deltas, const VehicleParams& params);

/// Same as envelope_bounds but throws EmptyEnvelope when the band is empty.
ExcitationEnvelope envelope(const DeltaTerms& deltas, const VehicleParams& params);

struct ClampedValue {
  double value = 0.0;
  bool clamped = false;
};

/// Constant auxiliary command m(g + z_dd_max)/4, clamped into the envelope.
ClampedValue constant_signal(double z_dd_max, const VehicleParams& params,
                             const ExcitationEnvelope& env);

/// LoE factor from the steady delivered force of the excited rotor.
double recover_loe(double z1c, double f_cons);

/// Largest usable alpha: keeps midpoint * (1 +- alpha) inside the envelope.
double effective_alpha(const ExcitationEnvelope& env, double alpha);

/// Sinusoidal auxiliary command mid * (alpha sin(beta t) + 1); alpha is reduced
/// when the requested swing would leave the envelope.
double sinusoidal_signal(const ExcitationEnvelope& env, const ExcitationConfig& cfg, double t);

/// Command swing A = alpha_eff * (f_lower + f_upper) / 2.
double sinusoid_amplitude(const ExcitationEnvelope& env, const ExcitationConfig& cfg);

enum class LagRecoveryMode {
  PaperFormula,    // sqrt(lambda A / (beta^2 z1p)) - T_a
  ExactInversion,  // solves z1p = lambda A / (T^2 beta^2 + 1)
};

/// Aging increment T_c from the steady sinusoid amplitude of the excited rotor.
double recover_time_constant(double z1p, double lambda1, const ExcitationEnvelope& env,
                             const ExcitationConfig& cfg, double lag_nominal, LagRecoveryMode mode);

struct SinusoidFit {
  double amplitude = 0.0;
  double phase = 0.0;  // y ~ offset + amplitude * sin(beta t + phase)
  double offset = 0.0;
};

/// Least-squares fit of offset + a sin(beta t) + b cos(beta t) at known beta.
SinusoidFit fit_sinusoid(std::span<const double> t, std::span<const double> y, double beta);

/// Sequential diagnosis of the target rotor. The owner feeds estimates while a
/// phase is active; the session turns them into the LoE factor (constant phase)
/// and the aging increment (sinusoidal phase).
class DiagnosisSession {
 public:
  DiagnosisSession(ExcitationConfig cfg, double lag_nominal);

  void begin_constant(const ExcitationEnvelope& env, double f_cons, double t_start, double t_end);
  /// Target-rotor LoE estimate lambda_hat = 1 + d_gamma_hat.
  void add_constant_sample(double t, double lambda_hat);
  /// Closes the constant phase and returns the recovered LoE factor.
  double finish_constant();

  void begin_sinusoidal(const ExcitationEnvelope& env, double t_start, double t_end);
  void add_sinusoid_sample(double t, double d_a_hat);
  /// Closes the sinusoidal phase; returns T_c (throws InconsistentResponse).
  double finish_sinusoidal(LagRecoveryMode mode = LagRecoveryMode::ExactInversion);

  bool has_loe() const { return has_loe_; }
  bool has_lag() const { return has_lag_; }
  double loe() const { return loe_; }
  double z1c() const { return z1c_; }
  double z1p() const { return z1p_; }
  double aging() const { return aging_; }
  double f_cons() const { return f_cons_; }
  const ExcitationEnvelope& constant_envelope() const { return env_const_; }
  const ExcitationEnvelope& sinusoid_envelope() const { return env_sin_; }
  const ExcitationConfig& config() const { return cfg_; }

  /// Fraction of the constant phase (from its end) averaged for z1c.
  static constexpr double kConstantWindow = 0.5;
  /// Excitation periods used by the amplitude fit.
  static constexpr int kFitPeriods = 3;
  /// Largest aging increment assumed when sizing the settling delay, s.
  static constexpr double kSettleAgingBound = 0.08;

 private:
  ExcitationConfig cfg_;
  double lag_nominal_;
  ExcitationEnvelope env_const_;
  ExcitationEnvelope env_sin_;
  double f_cons_ = 0.0;
  double const_window_start_ = 0.0;
  double sin_fit_start_ = 0.0;
  double sum_ = 0.0;
  long count_ = 0;
  std::vector<double> sin_t_;
  std::vector<double> sin_y_;
  bool has_loe_ = false;
  bool has_lag_ = false;
  double loe_ = 1.0;
  double z1c_ = 0.0;
  double z1p_ = 0.0;
  double aging_ = 0.0;
};

}  // namespace fsep
