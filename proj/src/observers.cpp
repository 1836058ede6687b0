#include "fsep/observers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsep/errors.hpp"

namespace fsep {

InputMatrices build_input_matrices(const VehicleParams& p, const Vec4& f, const EulerAngles& a) {
  InputMatrices m;
  const Vec3& J = p.inertia;
  m.B.diagonal() << std::cos(a.phi) * std::cos(a.theta) / p.mass, 1.0 / J.x(), 1.0 / J.y(), 1.0 / J.z();
  m.B_star = m.B * mixer_matrix(p) * f.asDiagonal();
  m.B_xi = load_torque_matrix(a, p);
  m.B_xi_tilde = J.cwiseInverse().asDiagonal() * m.B_xi;
  m.B_xi_aug.row(0).setZero();
  m.B_xi_aug.bottomRows<3>() = m.B_xi_tilde;
  m.B_tilde_star = m.B_star.bottomRows<3>();
  return m;
}

Vec4 observer_drift(const ObserverMeasurement& y, const VehicleParams& p) {
  const Vec3& J = p.inertia;
  const Vec3& w = y.omega;
  return {-p.gravity, (J.y() - J.z()) / J.x() * w.y() * w.z(), (J.z() - J.x()) / J.y() * w.x() * w.z(),
          (J.x() - J.y()) / J.z() * w.x() * w.y()};
}

namespace {

template <typename M>
std::vector<std::complex<double>> eigenvalues(const M& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  return out;
}

double max_real(const std::vector<std::complex<double>>& ev) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& e : ev) m = std::max(m, e.real());
  return m;
}

Mat7 stacked_input(const InputMatrices& m) {
  Mat7 h;
  h.topLeftCorner<4, 4>() = m.B_star;
  h.topRightCorner<4, 3>() = m.B_xi_aug;
  h.bottomLeftCorner<3, 4>() = m.B_tilde_star;
  h.bottomRightCorner<3, 3>() = m.B_xi_tilde;
  return h;
}

Mat7 block_gain(const Mat4& k1, const Mat3& k2) {
  Mat7 g = Mat7::Zero();
  g.topLeftCorner<4, 4>() = k1;
  g.bottomRightCorner<3, 3>() = k2;
  return g;
}

Vec4 hover_forces(const VehicleParams& p) { return Vec4::Constant(p.hover_force()); }

}  // namespace

GainConditionReport check_gain_condition(const Mat4& k1, const Mat3& k2, const InputMatrices& m) {
  const Mat4 loe = -k1 * m.B_star + k1.transpose() * k1 + m.B_tilde_star.transpose() * m.B_tilde_star;
  const Mat3 load = -k2 * m.B_xi_tilde + k2.transpose() * k2 + m.B_xi_tilde.transpose() * m.B_xi_tilde;
  GainConditionReport r;
  r.eig_loe = eigenvalues(loe);
  r.eig_load = eigenvalues(load);
  r.max_real_loe = max_real(r.eig_loe);
  r.max_real_load = max_real(r.eig_load);
  r.trace_loe = loe.trace();
  r.trace_load = load.trace();
  r.pass = r.max_real_loe < 0.0 && r.max_real_load < 0.0;
  return r;
}

Mat7 error_dynamics_matrix(const Mat4& k1, const Mat3& k2, const InputMatrices& m) {
  return -block_gain(k1, k2) * stacked_input(m);
}

double error_dynamics_abscissa(const Mat4& k1, const Mat3& k2, const InputMatrices& m) {
  return max_real(eigenvalues(error_dynamics_matrix(k1, k2, m)));
}

double lyapunov_margin(const Mat4& k1, const Mat3& k2, const InputMatrices& m) {
  const Mat7 gh = block_gain(k1, k2) * stacked_input(m);
  const Mat7 sym = 0.5 * (gh + gh.transpose());
  return Eigen::SelfAdjointEigenSolver<Mat7>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double lyapunov_v0(const Vec4& d_gamma_err, const Vec3& l_m_err) {
  return 0.5 * (d_gamma_err.squaredNorm() + l_m_err.squaredNorm());
}

ObserverGains design_default_gains(const VehicleParams& p, int target, double bw_loe, double bw_load) {
  if (target < 0 || target > 3) throw ConfigError("observer: target rotor must be 0..3");
  const InputMatrices m = build_input_matrices(p, hover_forces(p), EulerAngles{});
  const Vec4 b = m.B_star.col(target);
  const double n2 = b(0) * b(0) + b(3) * b(3);
  if (!(n2 > 0.0)) throw DivisionByZero("observer: target rotor has no thrust/yaw authority");
  ObserverGains g;
  g.k1.row(target) << bw_loe * b(0) / n2, 0.0, 0.0, bw_loe * b(3) / n2;
  g.k2 = bw_load * Eigen::CompleteOrthogonalDecomposition<Mat3>(m.B_xi_tilde).pseudoInverse();
  return g;
}

ObserverGains gradient_gains(const InputMatrices& m, double kappa) {
  ObserverGains g;
  g.k1 = kappa * m.B_star.transpose();
  g.k2 = kappa * m.B_xi_tilde.transpose();
  return g;
}

IntegratedObserver::IntegratedObserver(const VehicleParams& params, ObserverGains gains)
    : params_(params), gains_(std::move(gains)) {
  if (!gains_.k1.allFinite() || !gains_.k2.allFinite()) throw ConfigError("observer gains must be finite");
  const InputMatrices m = build_input_matrices(params_, hover_forces(params_), EulerAngles{});
  hover_report_ = check_gain_condition(gains_.k1, gains_.k2, m);
  const Mat7 a = error_dynamics_matrix(gains_.k1, gains_.k2, m);
  const auto ev = eigenvalues(a);
  hover_abscissa_ = max_real(ev);
  if (hover_abscissa_ > 1e-9) {
    throw GainConditionViolated("observer error dynamics unstable at hover: max Re(eig) = " +
                                std::to_string(hover_abscissa_));
  }
  double radius = 0.0;
  for (const auto& e : ev) radius = std::max(radius, std::abs(e));
  step_limit_ = radius > 0.0 ? 0.5 / radius : std::numeric_limits<double>::infinity();
}

void IntegratedObserver::reset(const ObserverMeasurement& y, const Vec4& d_gamma0, const Vec3& l_m0) {
  state_.z1 = d_gamma0 - gains_.k1 * y.as_vector();
  state_.z2 = l_m0 - gains_.k2 * y.omega;
  state_.d_gamma_hat = d_gamma0.cwiseMax(-1.0).cwiseMin(0.0);
  state_.l_m_hat = l_m0;
}

Vec4 IntegratedObserver::d_gamma_raw(const ObserverMeasurement& y) const {
  return state_.z1 + gains_.k1 * y.as_vector();
}

void IntegratedObserver::step(const ObserverMeasurement& y, const Vec4& f_model, const InputMatrices& m,
                              double dt) {
  if (dt > step_limit_) {
    throw StepTooLarge("observer step " + std::to_string(dt) + " s exceeds the explicit-Euler limit " +
                       std::to_string(step_limit_) + " s");
  }
  const Vec4 d_hat = state_.z1 + gains_.k1 * y.as_vector();
  const Vec3 l_hat = state_.z2 + gains_.k2 * y.omega;
  state_.d_gamma_hat = d_hat.cwiseMax(-1.0).cwiseMin(0.0);
  state_.l_m_hat = l_hat;

  const Vec4 known = observer_drift(y, params_) + m.B * mixer_matrix(params_) * f_model;
  const Vec4 rate = m.B_star * d_hat + m.B_xi_aug * l_hat + known;
  const Vec3 rate_tilde = m.B_tilde_star * d_hat + m.B_xi_tilde * l_hat + known.tail<3>();
  state_.z1 += dt * (-gains_.k1 * rate);
  state_.z2 += dt * (-gains_.k2 * rate_tilde);
}

ActuatorModel::ActuatorModel(const VehicleParams& params, double lag_nominal, const Vec4& initial)
    : params_(params), lag_(Vec4::Constant(lag_nominal)), motors_(steady_motors(initial)), output_(initial) {}

void ActuatorModel::step(const Vec4& f_cmd, double dt) {
  for (int i = 0; i < 4; ++i) {
    auto& ch = motors_[static_cast<std::size_t>(i)];
    ch = motor_step(ch, std::clamp(f_cmd(i), 0.0, params_.f_max), lag_(i), dt);
    output_(i) = ch.output;
  }
}

Vec4 rotor_input_column(const VehicleParams& p, const EulerAngles& a, int rotor) {
  const Vec3& J = p.inertia;
  const Vec4 scale(std::cos(a.phi) * std::cos(a.theta) / p.mass, 1.0 / J.x(), 1.0 / J.y(), 1.0 / J.z());
  return scale.cwiseProduct(mixer_matrix(p).col(rotor));
}

Vec4 periodic_known_rate(const VehicleParams& p, const ObserverMeasurement& y, const EulerAngles& a,
                         const Vec4& f_model, const Vec4& d_gamma_hat, const Vec3& l_m_hat, int target) {
  Vec4 f = f_model.cwiseProduct(Vec4::Ones() + d_gamma_hat);
  f(target) = 0.0;
  const InputMatrices m = build_input_matrices(p, Vec4::Zero(), a);
  return observer_drift(y, p) + m.B * mixer_matrix(p) * f + m.B_xi_aug * l_m_hat;
}

PeriodicObserver::PeriodicObserver(const VehicleParams& params, int target, double beta, double pole) {
  if (!(beta > 0.0) || !(pole > 0.0)) throw ConfigError("periodic observer: beta and pole must be positive");
  s_ << 0.0, 0.0, 0.0,
        0.0, 0.0, beta,
        0.0, -beta, 0.0;
  h_ << 1.0, 1.0, 0.0;
  // Ackermann placement of all three error poles at -pole.
  Mat3 obs;
  obs.row(0) = h_;
  obs.row(1) = h_ * s_;
  obs.row(2) = h_ * s_ * s_;
  const Mat3 i3 = Mat3::Identity();
  const Mat3 charpoly = s_ * s_ * s_ + 3.0 * pole * s_ * s_ + 3.0 * pole * pole * s_ + pole * pole * pole * i3;
  g_ = charpoly * obs.inverse() * Vec3(0.0, 0.0, 1.0);
  const Vec4 b1 = rotor_input_column(params, EulerAngles{}, target);
  l_ = g_ * (b1.transpose() / b1.squaredNorm());
}

void PeriodicObserver::reset(const ObserverMeasurement& y, double offset0) {
  w_hat_ = Vec3(offset0, 0.0, 0.0);
  z_ = w_hat_ - l_ * y.as_vector();
}

void PeriodicObserver::step(const ObserverMeasurement& y, const Vec4& known_rate, const Vec4& b1, double dt) {
  w_hat_ = z_ + l_ * y.as_vector();
  const Mat3 a = s_ - (l_ * b1) * h_;
  z_ += dt * (a * w_hat_ - l_ * known_rate);
}

void FtdoGains::validate() const {
  if (!(lambda0 > 0.0 && lambda1 > 0.0 && L > 0.0)) throw ConfigError("FTDO gains must be positive");
  if (substeps < 1) throw ConfigError("FTDO substeps must be at least 1");
}

namespace {

double sgn(double x) {
  constexpr double kDeadband = 1e-9;
  if (std::abs(x) < kDeadband) return 0.0;
  return x > 0.0 ? 1.0 : -1.0;
}

}  // namespace

FtdoState ftdo_step(const FtdoState& s, const Vec2& x3, const Vec2& x4, const FtdoGains& g, double dt) {
  FtdoState n = s;
  const double root_l = std::sqrt(g.L);
  if (g.scheme == FtdoScheme::Implicit) {
    const Vec2 x4_mean = s.started ? Vec2(0.5 * (s.x4_prev + x4)) : x4;
    const double band = dt * dt * g.lambda1 * g.L;
    for (int i = 0; i < 2; ++i) {
      // Error at the end of the step if no correction were applied.
      const double p = s.z0(i) + dt * (s.z1(i) + x4_mean(i)) - x3(i);
      double e = 0.0;
      double sw = 0.0;
      if (std::abs(p) <= band) {
        sw = p / band;
      } else {
        // |e| = r^2 with r^2 + dt lambda0 sqrt(L) r + band - |p| = 0.
        const double b = dt * g.lambda0 * root_l;
        const double r = 0.5 * (-b + std::sqrt(b * b + 4.0 * (std::abs(p) - band)));
        sw = p > 0.0 ? 1.0 : -1.0;
        e = sw * r * r;
      }
      n.v1(i) = -g.lambda1 * g.L * sw;
      n.z1(i) = s.z1(i) + dt * n.v1(i);
      n.v0(i) = -g.lambda0 * root_l * std::sqrt(std::abs(e)) * (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) + n.z1(i);
      n.z0(i) = x3(i) + e;
    }
  } else {
    const double h = dt / g.substeps;
    for (int k = 0; k < g.substeps; ++k) {
      for (int i = 0; i < 2; ++i) {
        const double e = n.z0(i) - x3(i);
        n.v0(i) = -g.lambda0 * root_l * std::sqrt(std::abs(e)) * sgn(e) + n.z1(i);
        n.v1(i) = -g.lambda1 * g.L * sgn(n.z1(i) - n.v0(i));
        n.z0(i) += h * (n.v0(i) + x4(i));
        n.z1(i) += h * n.v1(i);
      }
    }
    if (g.substeps > 1) n.v1 = (n.z1 - s.z1) / dt;
  }
  n.x4_prev = x4;
  n.started = true;
  return n;
}

}  // namespace fsep
