#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fsep/errors.hpp"
#include "fsep/plant.hpp"

using namespace fsep;

namespace {

const VehicleParams kParams;

// Amplitude of the component at beta, from a projection over whole periods.
double amplitude_at(const std::vector<double>& t, const std::vector<double>& y, double beta) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += y[i] * std::sin(beta * t[i]);
    c += y[i] * std::cos(beta * t[i]);
  }
  const double n = static_cast<double>(t.size());
  return 2.0 * std::hypot(s, c) / n;
}

}  // namespace

TEST(LoadTorque, ZeroOffset) {
  EXPECT_EQ(load_torque(Vec3::Zero(), {}, kParams), Vec3::Zero());
}

TEST(LoadTorque, ForwardOffsetAtLevel) {
  const Vec3 xi = load_torque(Vec3(0.01, 0.0, 0.0), {}, kParams);
  EXPECT_NEAR(xi.x(), 0.0, 1e-15);
  EXPECT_NEAR(xi.y(), 0.01 * 1.121 * 9.81, 1e-12);
  EXPECT_NEAR(xi.y(), 0.10997, 1e-5);
  EXPECT_NEAR(xi.z(), 0.0, 1e-15);
}

TEST(LoadTorque, LinearMapAgreesAndScales) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    const EulerAngles a{u(gen), u(gen), 4.0 * u(gen)};
    const Vec3 l(0.3 * u(gen), 0.3 * u(gen), 0.1 * u(gen));
    const Vec3 cross = load_torque(l, a, kParams);
    EXPECT_LT((cross - load_torque_matrix(a, kParams) * l).norm(), 1e-12);
    EXPECT_LT((load_torque(2.5 * l, a, kParams) - 2.5 * cross).norm(), 1e-12);
  }
}

TEST(Mixer, Examples) {
  Wrench w = mix_forces_to_wrench(Vec4(1, 1, 1, 1), kParams);
  EXPECT_DOUBLE_EQ(w.thrust, 4.0);
  EXPECT_EQ(w.moment, Vec3::Zero());

  w = mix_forces_to_wrench(Vec4(0, 0, 1, 1), kParams);
  EXPECT_NEAR(w.moment.x(), 0.2122, 1e-15);

  w = mix_forces_to_wrench(Vec4(1, 0, 0, 1), kParams);
  EXPECT_NEAR(w.moment.z(), 2.0 * kParams.c_tau_f, 1e-15);
}

TEST(Mixer, Invertible) {
  EXPECT_GT(std::abs(mixer_matrix(kParams).determinant()), 1e-6);
}

TEST(Motor, StepTooLargeRejected) {
  EXPECT_THROW(motor_step({}, 1.0, 0.02, 0.0041), StepTooLarge);
  EXPECT_NO_THROW(motor_step({}, 1.0, 0.02, 0.004));
  EXPECT_THROW(motor_step({}, 1.0, 0.0, 1e-4), StepTooLarge);
}

TEST(Motor, UnityDcGain) {
  MotorChannel m;
  const double lag = 0.05, dt = 1e-3;
  for (int i = 0; i < 2000; ++i) m = motor_step(m, 3.0, lag, dt);  // 40 time constants
  EXPECT_NEAR(m.output, 3.0, 3.0e-3);
  EXPECT_NEAR(m.rate, 0.0, 1e-9);
}

TEST(Motor, StepMatchesClosedForm) {
  // Double lag step response: 1 - (1 + t/T) exp(-t/T).
  MotorChannel m;
  const double lag = 0.03, dt = 2e-3;
  for (int i = 1; i <= 100; ++i) {
    m = motor_step(m, 1.0, lag, dt);
    const double t = i * dt;
    EXPECT_NEAR(m.output, 1.0 - (1.0 + t / lag) * std::exp(-t / lag), 1e-12);
  }
}

TEST(Motor, StepResponseNeverOvershoots) {
  MotorChannel m;
  const double dt = 1e-3, lag = 5.0 * dt;
  double prev = 0.0;
  for (int i = 0; i < 1000; ++i) {
    m = motor_step(m, 2.0, lag, dt);
    EXPECT_GE(m.output, prev);
    EXPECT_LE(m.output, 2.0);
    prev = m.output;
  }
}

TEST(Motor, SinusoidGainAndPhase) {
  const double lag = 0.05, beta = 20.0, amp = 1.0, dt = 1e-4;
  MotorChannel m;
  std::vector<double> t, y;
  const double period = 2.0 * std::numbers::pi / beta;
  const long settle = std::lround(20.0 * lag / dt);
  const long keep = std::lround(5.0 * period / dt);
  for (long i = 0; i < settle + keep; ++i) {
    // Command evaluated mid-step so the hold adds no net delay.
    m = motor_step(m, amp * std::sin(beta * (i + 0.5) * dt), lag, dt);
    if (i >= settle) {
      t.push_back((i + 1) * dt);
      y.push_back(m.output);
    }
  }
  const double expected = amp / (lag * lag * beta * beta + 1.0);
  EXPECT_NEAR(amplitude_at(t, y, beta), expected, 2e-3 * expected);

  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += y[i] * std::sin(beta * t[i]);
    c += y[i] * std::cos(beta * t[i]);
  }
  EXPECT_NEAR(std::atan2(c, s), -2.0 * std::atan(lag * beta), 5e-3);
}

TEST(Motor, ClosedFormMatchesStepping) {
  MotorChannel m{1.2, -3.0};
  const MotorChannel stepped = motor_step(m, 2.5, 0.04, 0.004);
  EXPECT_NEAR(motor_output_at(m, 2.5, 0.04, 0.004), stepped.output, 1e-14);
}

TEST(ActuatorChain, HealthyHoverPassesThrough) {
  FaultConfig fault;
  const Vec4 hover = Vec4::Constant(kParams.hover_force());
  MotorState motors = steady_motors(hover);
  const Vec4 out = actuator_chain(hover, fault, motors, 1.0, 1e-3, kParams);
  EXPECT_LT((out - hover).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ActuatorChain, LoeScalesSteadyOutput) {
  FaultConfig fault;
  fault.lambda = Vec4(0.7, 1.0, 1.0, 1.0);
  fault.t_lambda = 0.5;
  MotorState motors = steady_motors(Vec4::Constant(2.0));
  Vec4 out = Vec4::Zero();
  for (int i = 0; i < 1000; ++i) out = actuator_chain(Vec4::Constant(2.0), fault, motors, i * 1e-3, 1e-3, kParams);
  EXPECT_NEAR(out(0), 1.4, 1e-9);
  EXPECT_NEAR(out(1), 2.0, 1e-9);
}

TEST(ActuatorChain, SaturatesCommand) {
  FaultConfig fault;
  MotorState motors{};
  int events = 0;
  Vec4 out = Vec4::Zero();
  for (int i = 0; i < 2000; ++i) {
    out = actuator_chain(Vec4(9.0, -1.0, 2.0, 2.0), fault, motors, i * 1e-3, 1e-3, kParams, &events);
  }
  EXPECT_NEAR(out(0), kParams.f_max, 1e-9);
  EXPECT_NEAR(out(1), 0.0, 1e-9);
  EXPECT_EQ(events, 4000);
}

TEST(ActuatorChain, AgingAddsLagOnMaskedRotors) {
  FaultConfig fault;
  fault.lag_aging = 0.03;
  fault.t_aging = 1.0;
  EXPECT_DOUBLE_EQ(fault.lag(0, 0.5), 0.02);
  EXPECT_DOUBLE_EQ(fault.lag(0, 1.0), 0.05);
  EXPECT_DOUBLE_EQ(fault.lag(1, 2.0), 0.02);
}

TEST(ActuatorChain, HealthyChainEqualsPureLag) {
  FaultConfig fault;
  MotorState motors{};
  MotorChannel pure;
  for (int i = 0; i < 300; ++i) {
    const double cmd = 2.0 + std::sin(0.01 * i);
    const Vec4 out = actuator_chain(Vec4::Constant(cmd), fault, motors, i * 1e-3, 1e-3, kParams);
    pure = motor_step(pure, cmd, fault.lag_nominal, 1e-3);
    EXPECT_EQ(out(2), pure.output);
  }
}

TEST(FaultConfig, Validation) {
  FaultConfig f;
  EXPECT_NO_THROW(f.validate(kParams));
  f.lambda(2) = 1.2;
  EXPECT_THROW(f.validate(kParams), ConfigError);
  f = FaultConfig{};
  f.cog_offset = Vec3(0.0, 0.0, 0.06);
  EXPECT_THROW(f.validate(kParams), ConfigError);
}

TEST(Derivatives, HoverIsEquilibrium) {
  RigidState x;
  x.position = Vec3(1.0, -2.0, 3.0);
  const RigidStateDot d = derivatives(x, {kParams.mass * kParams.gravity, Vec3::Zero()}, Vec3::Zero(), kParams);
  EXPECT_LT(d.velocity_dot.norm(), 1e-12);
  EXPECT_LT(d.angles_dot.norm(), 1e-12);
  EXPECT_LT(d.omega_dot.norm(), 1e-12);
  EXPECT_EQ(d.position_dot, x.velocity);
}

TEST(Derivatives, SymmetricInertiaGivesNoYawCoupling) {
  RigidState x;
  x.omega = Vec3(1.0, 1.0, 0.0);
  const RigidStateDot d = derivatives(x, {kParams.mass * kParams.gravity, Vec3::Zero()}, Vec3::Zero(), kParams);
  EXPECT_NEAR(d.omega_dot.z(), 0.0, 1e-15);
}

TEST(Derivatives, FreeFall) {
  RigidState x;
  x.angles = {0.2, -0.1, 0.5};
  const RigidStateDot d = derivatives(x, {}, Vec3::Zero(), kParams);
  EXPECT_LT((d.velocity_dot - Vec3(0, 0, -kParams.gravity)).norm(), 1e-15);
}

TEST(Derivatives, MomentsAndLoadTorqueEnterThroughInertia) {
  RigidState x;
  const Vec3 m(0.01, -0.02, 0.003), xi(0.1, 0.0, -0.05);
  const RigidStateDot d = derivatives(x, {0.0, m}, xi, kParams);
  EXPECT_LT((d.omega_dot - (m + xi).cwiseQuotient(kParams.inertia)).norm(), 1e-12);
}

TEST(Derivatives, SingularAttitudePropagates) {
  RigidState x;
  x.angles.theta = std::numbers::pi / 2;
  EXPECT_THROW(derivatives(x, {}, Vec3::Zero(), kParams), SingularAttitude);
}

namespace {

// Open-loop flight with commands held from t = 0; only the rigid-body RK4
// contributes discretization error. One second keeps the free flight smooth;
// longer horizons tumble and leave the asymptotic regime.
RigidState fly(double dt, double duration) {
  FaultConfig fault;
  fault.lag_nominal = 0.05;
  fault.cog_offset = Vec3(0.01, -0.005, 0.0);
  RigidState x0;
  x0.velocity = Vec3(0.3, -0.2, 0.1);
  x0.angles = {0.05, -0.03, 0.2};
  x0.omega = Vec3(0.4, -0.3, 0.8);
  Plant plant(kParams, fault, x0, steady_motors(Vec4(2.6, 2.8, 2.7, 2.9)));
  const Vec4 cmd(2.9, 2.6, 2.75, 2.8);
  const long n = std::lround(duration / dt);
  for (long i = 0; i < n; ++i) plant.step(cmd, i * dt, dt);
  return plant.state();
}

Eigen::Matrix<double, 12, 1> flat(const RigidState& x) {
  Eigen::Matrix<double, 12, 1> v;
  v << x.position, x.velocity, x.angles.as_vector(), x.omega;
  return v;
}

}  // namespace

TEST(Plant, Rk4ConvergenceOrder) {
  const double dt = 0.01;
  const auto a = flat(fly(dt, 1.0));
  const auto b = flat(fly(dt / 2, 1.0));
  const auto c = flat(fly(dt / 4, 1.0));
  const double ratio = (a - b).norm() / (b - c).norm();
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Plant, HoverHoldsPosition) {
  RigidState x0;
  x0.position = Vec3(0.0, 0.7, 1.0);
  const Vec4 hover = Vec4::Constant(kParams.hover_force());
  Plant plant(kParams, FaultConfig{}, x0, steady_motors(hover));
  for (int i = 0; i < 10000; ++i) plant.step(hover, i * 1e-3, 1e-3);
  EXPECT_LT((plant.state().position - x0.position).norm(), 1e-6);
}
