#include "fsep/excitation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fsep/errors.hpp"

namespace fsep {

void ExcitationConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("excitation: alpha must lie in (0, 1]");
  if (!(beta > 0.0)) throw ConfigError("excitation: beta must be positive");
  if (target_rotor < 0 || target_rotor > 3) throw ConfigError("excitation: target_rotor must be 0..3");
}

Mat2 snap_torque_matrix(double psi, const VehicleParams& p) {
  const double g = p.gravity;
  const double s = std::sin(psi), c = std::cos(psi);
  Mat2 rt;
  rt << -g * s / p.inertia.x(), -g * c / p.inertia.y(),
        g * c / p.inertia.x(), -g * s / p.inertia.y();
  return rt;
}

DeltaTerms delta_terms(const TrajectoryDerivBounds& b, const EulerAngles& a, const Vec3& xi_hat,
                       const VehicleParams& p) {
  const double tilt = std::cos(a.phi) * std::cos(a.theta);
  if (tilt < 1e-6) throw SingularAttitude("delta_terms: cos(phi) cos(theta) vanishes");
  // det(R_t) = g^2 / (Jx Jy) is never zero, so the inverse always exists.
  const Vec2 torque = snap_torque_matrix(a.psi, p).inverse() * Vec2(b.x_4_max, b.y_4_max);
  DeltaTerms d;
  d.dx = 2.0 / p.d_phi * (torque(0) - xi_hat(0));
  d.dy = 2.0 / p.d_theta * (torque(1) - xi_hat(1));
  d.dz = p.mass * p.gravity / tilt + p.mass * b.z_dd_max;
  return d;
}

ExcitationEnvelope envelope_bounds(const DeltaTerms& d, const VehicleParams& p) {
  const double fm = p.f_max;
  ExcitationEnvelope env;
  env.f_lower = std::max({-fm - d.dx, -2.0 * fm - d.dy, d.dz - 3.0 * fm, 0.0});
  env.f_upper = std::min({2.0 * fm - d.dx, fm - d.dy, fm});
  return env;
}

ExcitationEnvelope envelope(const DeltaTerms& d, const VehicleParams& p) {
  const ExcitationEnvelope env = envelope_bounds(d, p);
  if (!env.nonempty()) {
    throw EmptyEnvelope("excitation envelope is empty: f_lower = " + std::to_string(env.f_lower) +
                        " > f_upper = " + std::to_string(env.f_upper));
  }
  return env;
}

ClampedValue constant_signal(double z_dd_max, const VehicleParams& p, const ExcitationEnvelope& env) {
  if (!env.nonempty()) throw EmptyEnvelope("constant_signal: envelope is empty");
  const double raw = p.mass * (p.gravity + z_dd_max) / 4.0;
  const double v = std::clamp(raw, env.f_lower, env.f_upper);
  return {v, v != raw};
}

double recover_loe(double z1c, double f_cons) {
  if (!(f_cons > 1e-9)) throw DivisionByZero("recover_loe: constant excitation level is zero");
  return std::clamp(z1c / f_cons, 0.0, 1.0);
}

double effective_alpha(const ExcitationEnvelope& env, double alpha) {
  const double sum = env.f_lower + env.f_upper;
  if (sum <= 0.0) return 0.0;
  // mid (1 + a) <= f_upper  and  mid (1 - a) >= f_lower  <=>  a <= (fu - fl) / (fu + fl)
  const double limit = (env.f_upper - env.f_lower) / sum;
  return std::min(alpha, limit);
}

double sinusoidal_signal(const ExcitationEnvelope& env, const ExcitationConfig& cfg, double t) {
  const double a = effective_alpha(env, cfg.alpha);
  return env.midpoint() * (a * std::sin(cfg.beta * t) + 1.0);
}

double sinusoid_amplitude(const ExcitationEnvelope& env, const ExcitationConfig& cfg) {
  return effective_alpha(env, cfg.alpha) * env.midpoint();
}

double recover_time_constant(double z1p, double lambda1, const ExcitationEnvelope& env,
                             const ExcitationConfig& cfg, double lag_nominal, LagRecoveryMode mode) {
  if (!(z1p > 0.0) || !(lambda1 > 0.0) || !(cfg.beta > 0.0)) {
    throw DivisionByZero("recover_time_constant: amplitude, LoE factor and beta must be positive");
  }
  const double amp = sinusoid_amplitude(env, cfg);
  const double expected = lambda1 * amp;
  if (z1p > expected * (1.0 + 1e-9)) {
    throw InconsistentResponse("recover_time_constant: response amplitude " + std::to_string(z1p) +
                               " exceeds the undamped level " + std::to_string(expected));
  }
  double lag = 0.0;
  if (mode == LagRecoveryMode::PaperFormula) {
    lag = std::sqrt(expected / (cfg.beta * cfg.beta * z1p));
  } else {
    lag = std::sqrt(std::max(expected / z1p - 1.0, 0.0)) / cfg.beta;
  }
  return std::max(lag - lag_nominal, 0.0);
}

SinusoidFit fit_sinusoid(std::span<const double> t, std::span<const double> y, double beta) {
  if (t.size() != y.size() || t.size() < 3) throw EmptySeries("fit_sinusoid: need at least 3 samples");
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = t[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = std::sin(beta * ti);
    a(i, 2) = std::cos(beta * ti);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d x = a.colPivHouseholderQr().solve(b);
  SinusoidFit fit;
  fit.offset = x(0);
  fit.amplitude = std::hypot(x(1), x(2));
  fit.phase = std::atan2(x(2), x(1));
  return fit;
}

DiagnosisSession::DiagnosisSession(ExcitationConfig cfg, double lag_nominal)
    : cfg_(cfg), lag_nominal_(lag_nominal) {
  cfg_.validate();
}

void DiagnosisSession::begin_constant(const ExcitationEnvelope& env, double f_cons, double t_start,
                                      double t_end) {
  env_const_ = env;
  f_cons_ = f_cons;
  const_window_start_ = t_end - kConstantWindow * (t_end - t_start);
  sum_ = 0.0;
  count_ = 0;
}

void DiagnosisSession::add_constant_sample(double t, double lambda_hat) {
  if (t < const_window_start_) return;
  sum_ += lambda_hat;
  ++count_;
}

double DiagnosisSession::finish_constant() {
  if (count_ == 0) throw EmptySeries("constant phase ended before any sample was averaged");
  z1c_ = f_cons_ * (sum_ / static_cast<double>(count_));
  loe_ = recover_loe(z1c_, f_cons_);
  has_loe_ = true;
  return loe_;
}

void DiagnosisSession::begin_sinusoidal(const ExcitationEnvelope& env, double t_start, double t_end) {
  env_sin_ = env;
  const double period = 2.0 * std::numbers::pi / cfg_.beta;
  // Settle 8 worst-case lags plus two periods, then fit at most the last kFitPeriods periods.
  const double settle = 8.0 * (lag_nominal_ + kSettleAgingBound) + 2.0 * period;
  sin_fit_start_ = std::max(t_start + settle, t_end - kFitPeriods * period);
  sin_t_.clear();
  sin_y_.clear();
}

void DiagnosisSession::add_sinusoid_sample(double t, double d_a_hat) {
  if (t < sin_fit_start_) return;
  sin_t_.push_back(t);
  sin_y_.push_back(d_a_hat);
}

double DiagnosisSession::finish_sinusoidal(LagRecoveryMode mode) {
  if (!has_loe_) throw InconsistentResponse("sinusoidal phase requires a recovered LoE factor");
  const SinusoidFit fit = fit_sinusoid(sin_t_, sin_y_, cfg_.beta);
  z1p_ = fit.amplitude;
  aging_ = recover_time_constant(z1p_, loe_, env_sin_, cfg_, lag_nominal_, mode);
  has_lag_ = true;
  return aging_;
}

}  // namespace fsep
