#include "fsep/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsep/errors.hpp"

namespace fsep {

void VehicleParams::validate() const {
  const bool positive = mass > 0 && gravity > 0 && d_phi > 0 && d_theta > 0 && c_tau_f > 0 &&
                        f_max > 0 && (inertia.array() > 0).all() && (body_box.array() > 0).all();
  if (!positive) throw ConfigError("vehicle parameters must all be strictly positive");
  if (!inertia.allFinite() || !body_box.allFinite()) throw ConfigError("vehicle parameters must be finite");
}

bool RigidState::finite() const {
  return position.allFinite() && velocity.allFinite() && angles.as_vector().allFinite() &&
         omega.allFinite();
}

double RigidState::max_abs() const {
  return std::max({position.cwiseAbs().maxCoeff(), velocity.cwiseAbs().maxCoeff(),
                   angles.as_vector().cwiseAbs().maxCoeff(), omega.cwiseAbs().maxCoeff()});
}

void FaultConfig::validate(const VehicleParams& params) const {
  if ((lambda.array() < 0.0).any() || (lambda.array() > 1.0).any()) {
    throw ConfigError("fault: loss-of-effectiveness factors must lie in [0, 1]");
  }
  if (!(lag_nominal > 0.0) || lag_aging < 0.0) {
    throw ConfigError("fault: T_a must be positive and T_c non-negative");
  }
  const Vec3 half_box = 0.5 * params.body_box;
  if ((cog_offset.cwiseAbs().array() > half_box.array() + 1e-12).any()) {
    throw ConfigError("fault: CoG offset exceeds half the body box");
  }
}

double FaultConfig::lag(int rotor, double t) const {
  const bool aged = aging_mask[static_cast<std::size_t>(rotor)] && t >= t_aging;
  return aged ? lag_nominal + lag_aging : lag_nominal;
}

double FaultConfig::effectiveness(int rotor, double t) const {
  return t >= t_lambda ? lambda(rotor) : 1.0;
}

Mat4 mixer_matrix(const VehicleParams& p) {
  const double hx = p.d_phi / 2.0;
  const double hy = p.d_theta / 2.0;
  const double c = p.c_tau_f;
  Mat4 r;
  r << 1.0, 1.0, 1.0, 1.0,
       -hx, -hx, hx, hx,
       hy, -hy, hy, -hy,
       c, -c, -c, c;
  return r;
}

Wrench mix_forces_to_wrench(const Vec4& f, const VehicleParams& params) {
  return Wrench::from_vector(mixer_matrix(params) * f);
}

Mat3 load_torque_matrix(const EulerAngles& angles, const VehicleParams& params) {
  const Vec3 weight = params.mass * rotation_body_to_inertial(angles) * params.gravity_vector();
  // l x w == -w x l
  return -skew(weight);
}

Vec3 load_torque(const Vec3& cog_offset, const EulerAngles& angles, const VehicleParams& params) {
  const Vec3 weight = params.mass * rotation_body_to_inertial(angles) * params.gravity_vector();
  return cog_offset.cross(weight);
}

MotorState steady_motors(const Vec4& forces) {
  MotorState m;
  for (int i = 0; i < 4; ++i) m[static_cast<std::size_t>(i)] = {forces(i), 0.0};
  return m;
}

MotorChannel motor_step(const MotorChannel& channel, double command, double lag, double dt) {
  if (!(lag > 0.0) || !(dt > 0.0)) throw StepTooLarge("motor_step: lag and dt must be positive");
  if (dt > lag / 5.0) {
    throw StepTooLarge("motor_step: dt = " + std::to_string(dt) + " exceeds T/5 = " +
                       std::to_string(lag / 5.0));
  }
  const double e0 = channel.output - command;
  const double c = channel.rate + e0 / lag;
  const double decay = std::exp(-dt / lag);
  return {command + (e0 + c * dt) * decay, (channel.rate - c * dt / lag) * decay};
}

double motor_output_at(const MotorChannel& channel, double command, double lag, double tau) {
  const double e0 = channel.output - command;
  const double c = channel.rate + e0 / lag;
  return command + (e0 + c * tau) * std::exp(-tau / lag);
}

ActuatorSetup actuator_setup(const Vec4& f_cmd, const FaultConfig& fault, double t,
                             const VehicleParams& params) {
  ActuatorSetup s;
  for (int i = 0; i < 4; ++i) {
    const double clamped = std::clamp(f_cmd(i), 0.0, params.f_max);
    if (clamped != f_cmd(i)) ++s.saturation_events;
    s.command(i) = clamped;
    s.lag(i) = fault.lag(i, t);
    s.gain(i) = fault.effectiveness(i, t);
  }
  return s;
}

Vec4 delivered_forces(const MotorState& motors, const ActuatorSetup& setup, double tau) {
  Vec4 f;
  for (int i = 0; i < 4; ++i) {
    f(i) = setup.gain(i) *
           motor_output_at(motors[static_cast<std::size_t>(i)], setup.command(i), setup.lag(i), tau);
  }
  return f;
}

Vec4 actuator_chain(const Vec4& f_cmd, const FaultConfig& fault, MotorState& motors, double t,
                    double dt, const VehicleParams& params, int* saturation_events) {
  const ActuatorSetup setup = actuator_setup(f_cmd, fault, t, params);
  for (int i = 0; i < 4; ++i) {
    auto& m = motors[static_cast<std::size_t>(i)];
    m = motor_step(m, setup.command(i), setup.lag(i), dt);
  }
  if (saturation_events != nullptr) *saturation_events += setup.saturation_events;
  Vec4 out;
  for (int i = 0; i < 4; ++i) out(i) = setup.gain(i) * motors[static_cast<std::size_t>(i)].output;
  return out;
}

RigidStateDot derivatives(const RigidState& s, const Wrench& u, const Vec3& xi_omega,
                          const VehicleParams& params) {
  RigidStateDot d;
  const Vec3& w = s.omega;
  const Vec3& J = params.inertia;
  d.position_dot = s.velocity;
  d.velocity_dot = rotation_body_to_inertial(s.angles) * Vec3(0.0, 0.0, u.thrust) / params.mass +
                   params.gravity_vector();
  d.angles_dot = euler_rate_matrix(s.angles) * w;
  const Vec3 gyro((J.y() - J.z()) / J.x() * w.y() * w.z(), (J.z() - J.x()) / J.y() * w.x() * w.z(),
                  (J.x() - J.y()) / J.z() * w.x() * w.y());
  d.omega_dot = gyro + u.moment.cwiseQuotient(J) + xi_omega.cwiseQuotient(J);
  return d;
}

namespace {

RigidState advance(const RigidState& s, const RigidStateDot& d, double h) {
  RigidState out;
  out.position = s.position + h * d.position_dot;
  out.velocity = s.velocity + h * d.velocity_dot;
  out.angles = EulerAngles::from_vector(s.angles.as_vector() + h * d.angles_dot);
  out.omega = s.omega + h * d.omega_dot;
  return out;
}

}  // namespace

Plant::Plant(VehicleParams params, FaultConfig fault, RigidState initial, MotorState motors)
    : params_(params), fault_(fault), state_(initial), motors_(motors) {
  params_.validate();
  fault_.validate(params_);
}

Vec4 Plant::delivered_now(double t) const {
  Vec4 f;
  for (int i = 0; i < 4; ++i) f(i) = fault_.effectiveness(i, t) * motors_[static_cast<std::size_t>(i)].output;
  return f;
}

Plant::StepInfo Plant::step(const Vec4& f_cmd, double t, double dt) {
  const ActuatorSetup setup = actuator_setup(f_cmd, fault_, t, params_);

  auto rate = [&](const RigidState& s, double tau) {
    const Wrench u = mix_forces_to_wrench(delivered_forces(motors_, setup, tau), params_);
    const Vec3 xi = load_torque(fault_.cog_offset, s.angles, params_);
    return derivatives(s, u, xi, params_);
  };

  const RigidStateDot k1 = rate(state_, 0.0);
  const RigidStateDot k2 = rate(advance(state_, k1, dt / 2), dt / 2);
  const RigidStateDot k3 = rate(advance(state_, k2, dt / 2), dt / 2);
  const RigidStateDot k4 = rate(advance(state_, k3, dt), dt);

  RigidStateDot avg;
  avg.position_dot = (k1.position_dot + 2 * k2.position_dot + 2 * k3.position_dot + k4.position_dot) / 6;
  avg.velocity_dot = (k1.velocity_dot + 2 * k2.velocity_dot + 2 * k3.velocity_dot + k4.velocity_dot) / 6;
  avg.angles_dot = (k1.angles_dot + 2 * k2.angles_dot + 2 * k3.angles_dot + k4.angles_dot) / 6;
  avg.omega_dot = (k1.omega_dot + 2 * k2.omega_dot + 2 * k3.omega_dot + k4.omega_dot) / 6;
  state_ = advance(state_, avg, dt);

  for (int i = 0; i < 4; ++i) {
    auto& m = motors_[static_cast<std::size_t>(i)];
    m = motor_step(m, setup.command(i), setup.lag(i), dt);
  }

  StepInfo info;
  info.saturation_events = setup.saturation_events;
  for (int i = 0; i < 4; ++i) info.delivered(i) = setup.gain(i) * motors_[static_cast<std::size_t>(i)].output;
  return info;
}

}  // namespace fsep
