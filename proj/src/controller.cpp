#include "fsep/controller.hpp"

#include <algorithm>
#include <cmath>

#include "fsep/errors.hpp"

namespace fsep {

void SmcParams::validate() const {
  if (!((gamma.array() > 0.0).all())) throw ConfigError("smc: gamma must be positive");
  if (eps1 <= 0 || eps2 <= 0 || !(ratio() > 1.0 && ratio() < 2.0)) {
    throw ConfigError("smc: eps1/eps2 must lie strictly between 1 and 2");
  }
  if (!(eps3 > 0.0 && eps3 < 1.0)) throw ConfigError("smc: eps3 must lie in (0, 1)");
  if (!(k >= 0.0) || !(boundary_layer >= 0.0)) throw ConfigError("smc: k and boundary_layer must be >= 0");
}

Vec2 sliding_surface(const Vec2& e3, const Vec2& e4, const Vec2& d_psi_hat, const SmcParams& p) {
  return e3 + p.gamma.cwiseProduct(signed_power(e4 + d_psi_hat, p.ratio()));
}

namespace {

double switching(double s, const SmcParams& p) {
  const double sw = p.boundary_layer > 0.0 ? std::tanh(s / p.boundary_layer) : (s > 0.0) - (s < 0.0);
  return sw * std::pow(std::abs(s), p.eps3);
}

}  // namespace

Vec2 attitude_control(const RigidState& x, const AttitudeReference& ref, const Vec2& d_psi_hat,
                      const Vec2& v1, const Vec2& d0_hat, const SmcParams& p, const VehicleParams& params) {
  const Vec3& J = params.inertia;
  const Vec3& w = x.omega;
  const Vec2 e3 = Vec2(x.angles.phi, x.angles.theta) - ref.x3_d;
  const Vec2 e4 = w.head<2>() - ref.x4_d;
  const Vec2 arg = e4 + d_psi_hat;
  const Vec2 s = sliding_surface(e3, e4, d_psi_hat, p);
  const Vec2 a((J.y() - J.z()) * w.y() * w.z() / J.x(), (J.z() - J.x()) * w.x() * w.z() / J.y());
  const double r = p.ratio();
  Vec2 bracket = a - ref.x4_d_dot + d0_hat + v1;
  for (int i = 0; i < 2; ++i) {
    bracket(i) += signed_power(arg(i), 2.0 - r) / (p.gamma(i) * r) + p.k * switching(s(i), p);
  }
  return -J.head<2>().cwiseProduct(bracket);
}

double min_switching_gain(const VehicleParams& params) {
  const InputMatrices m = build_input_matrices(params, Vec4::Zero(), EulerAngles{});
  const Eigen::Matrix<double, 2, 4> rows = (m.B * mixer_matrix(params)).middleRows<2>(1);
  const double actuator = rows.jacobiSvd().singularValues()(0) * params.f_max;
  const Vec2 load = (m.B_xi_tilde * params.body_box).head<2>();
  return actuator + 0.5 * load.norm();
}

OuterLoopOutput position_outer_loop(const Vec3& p_e, const Vec3& v_e, const EulerAngles& angles,
                                    const ReferencePoint& ref, const PositionGains& g,
                                    const VehicleParams& params, double d0_z) {
  const Vec3 acc = ref.d[2] + g.kp.cwiseProduct(ref.d[0] - p_e) + g.kd.cwiseProduct(ref.d[1] - v_e);
  OuterLoopOutput out;
  const double tilt = std::cos(angles.phi) * std::cos(angles.theta);
  if (tilt < 1e-3) throw SingularAttitude("position_outer_loop: vehicle is on its side");
  const double raw = params.mass * (params.gravity + acc.z() - d0_z) / tilt;
  out.thrust = std::clamp(raw, 0.0, 4.0 * params.f_max);
  out.thrust_clamped = out.thrust != raw;

  Vec2 horizontal = acc.head<2>();
  const double limit = params.gravity * g.tilt_limit;
  if (horizontal.norm() > limit) {
    horizontal *= limit / horizontal.norm();
    out.tilt_limited = true;
  }
  out.accel_xy = horizontal;
  const double sp = std::sin(angles.psi), cp = std::cos(angles.psi);
  out.theta_d = (cp * horizontal.x() + sp * horizontal.y()) / params.gravity;
  out.phi_d = (sp * horizontal.x() - cp * horizontal.y()) / params.gravity;
  return out;
}

AttitudeReference tilt_reference(const Vec2& a, const Vec2& a_dot, const Vec2& a_ddot, double psi, double psi_dot,
                                 double gravity) {
  const double s = std::sin(psi), c = std::cos(psi);
  // phi = (s ax - c ay)/g, theta = (c ax + s ay)/g; yaw acceleration neglected.
  auto phi_of = [&](const Vec2& v) { return (s * v.x() - c * v.y()) / gravity; };
  auto theta_of = [&](const Vec2& v) { return (c * v.x() + s * v.y()) / gravity; };
  AttitudeReference r;
  r.x3_d = Vec2(phi_of(a), theta_of(a));
  r.x4_d = Vec2(phi_of(a_dot) + psi_dot * theta_of(a), theta_of(a_dot) - psi_dot * phi_of(a));
  r.x4_d_dot = Vec2(phi_of(a_ddot) + 2.0 * psi_dot * theta_of(a_dot) - psi_dot * psi_dot * phi_of(a),
                    theta_of(a_ddot) - 2.0 * psi_dot * phi_of(a_dot) - psi_dot * psi_dot * theta_of(a));
  return r;
}

double heading_rate(const EulerAngles& angles, const Vec3& omega) {
  const double cth = std::cos(angles.theta);
  if (std::abs(cth) < 1e-6) throw SingularAttitude("heading_rate: pitch at +-90 degrees");
  return (omega.y() * std::sin(angles.phi) + omega.z() * std::cos(angles.phi)) / cth;
}

namespace {

int clamp_forces(Vec4& f, double f_max) {
  int events = 0;
  for (int i = 0; i < 4; ++i) {
    const double c = std::clamp(f(i), 0.0, f_max);
    if (c != f(i)) ++events;
    f(i) = c;
  }
  return events;
}

}  // namespace

AllocationResult allocate_nominal(const Wrench& u, const VehicleParams& params) {
  const Mat4 inv = mixer_matrix(params).inverse();
  Vec4 no_yaw = u.as_vector();
  no_yaw(3) = 0.0;
  const Vec4 base = inv * no_yaw;
  const Vec4 yaw = inv.col(3) * u.moment.z();
  // Largest s in [0, 1] with base + s * yaw inside the box; yaw is dropped
  // entirely when base alone already violates it.
  double scale = 0.0;
  const bool base_ok = (base.array() >= 0.0).all() && (base.array() <= params.f_max).all();
  if (base_ok) {
    scale = 1.0;
    for (int i = 0; i < 4; ++i) {
      if (yaw(i) > 0.0) scale = std::min(scale, (params.f_max - base(i)) / yaw(i));
      if (yaw(i) < 0.0) scale = std::min(scale, -base(i) / yaw(i));
    }
    scale = std::max(scale, 0.0);
  }
  AllocationResult r;
  r.yaw_scale = scale;
  r.f = base + scale * yaw;
  r.clamp_events = clamp_forces(r.f, params.f_max);
  return r;
}

AllocationResult allocate_with_excitation(double thrust, double m_x, double m_y, double f_ex,
                                          const VehicleParams& params, int target) {
  if (target < 0 || target > 3) throw ConfigError("allocation: target rotor must be 0..3");
  const Mat4 ru = mixer_matrix(params);
  Mat3 sub;
  int col = 0;
  std::array<int, 3> others{};
  for (int i = 0; i < 4; ++i) {
    if (i == target) continue;
    others[static_cast<std::size_t>(col)] = i;
    sub.col(col++) = ru.col(i).head<3>();
  }
  const Vec3 rest = Vec3(thrust, m_x, m_y) - f_ex * ru.col(target).head<3>();
  const Vec3 f = sub.inverse() * rest;
  AllocationResult r;
  r.f(target) = f_ex;
  for (int j = 0; j < 3; ++j) r.f(others[static_cast<std::size_t>(j)]) = f(j);
  r.clamp_events = clamp_forces(r.f, params.f_max);
  return r;
}

void CommandFilter::reset(const Vec2& x) {
  x_ = x;
  xd_.setZero();
  xdd_.setZero();
}

void CommandFilter::step(const Vec2& command, double dt) {
  xdd_ = w_ * w_ * (command - x_) - 2.0 * w_ * xd_;
  xd_ += dt * xdd_;
  x_ += dt * xd_;
}

Vec4 composite_estimate(const InputMatrices& m, const Vec4& d_gamma_hat, const Vec3& l_m_hat) {
  return m.B_star * d_gamma_hat + m.B_xi_aug * l_m_hat;
}

SafetyController::SafetyController(const VehicleParams& params, ControllerConfig cfg)
    : params_(params), cfg_(cfg), filter_(cfg.command_bandwidth) {
  cfg_.smc.validate();
  cfg_.ftdo.validate();
  if (!(cfg_.command_bandwidth > 0.0)) throw ConfigError("controller: command bandwidth must be positive");
}

void SafetyController::reset(const RigidState& x) {
  filter_.reset(Vec2::Zero());
  ftdo_ = FtdoState{};
  ftdo_.z0 = Vec2(x.angles.phi, x.angles.theta);
}

SafetyController::Output SafetyController::update(const RigidState& meas, const ReferencePoint& ref,
                                                  const Vec4& d0_hat, std::optional<double> f_ex,
                                                  int target_rotor, double dt) {
  Output out;
  out.outer = position_outer_loop(meas.position, meas.velocity, meas.angles, ref, cfg_.position, params_,
                                  d0_hat(0));
  filter_.step(out.outer.accel_xy, dt);
  out.attitude = tilt_reference(filter_.value(), filter_.rate(), filter_.accel(), meas.angles.psi,
                                heading_rate(meas.angles, meas.omega), params_.gravity);

  const Vec2 x3(meas.angles.phi, meas.angles.theta);
  ftdo_ = ftdo_step(ftdo_, x3, meas.omega.head<2>(), cfg_.ftdo, dt);
  out.d_psi_hat = ftdo_.z1;

  const Vec2 u1 = attitude_control(meas, out.attitude, ftdo_.z1, ftdo_.v1, d0_hat.segment<2>(1), cfg_.smc,
                                   params_);
  out.s = sliding_surface(x3 - out.attitude.x3_d, meas.omega.head<2>() - out.attitude.x4_d, ftdo_.z1,
                          cfg_.smc);

  AllocationResult alloc;
  if (f_ex) {
    alloc = allocate_with_excitation(out.outer.thrust, u1(0), u1(1), *f_ex, params_, target_rotor);
  } else {
    const double m_z = params_.inertia.z() * (-cfg_.yaw_damping * meas.omega.z() - d0_hat(3));
    alloc = allocate_nominal(Wrench{out.outer.thrust, Vec3(u1(0), u1(1), m_z)}, params_);
  }
  out.f_cmd = alloc.f;
  out.clamp_events = alloc.clamp_events;
  out.wrench = mix_forces_to_wrench(alloc.f, params_);
  return out;
}

}  // namespace fsep
