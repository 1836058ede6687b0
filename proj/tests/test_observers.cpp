#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fsep/errors.hpp"
#include "fsep/observers.hpp"

using namespace fsep;

namespace {

const VehicleParams kParams;

Vec4 hover() { return Vec4::Constant(kParams.hover_force()); }

InputMatrices hover_matrices() { return build_input_matrices(kParams, hover(), EulerAngles{}); }

// Integrates the error dynamics e' = A e with RK4 and returns V0 along the way.
std::vector<double> v0_trajectory(const Mat7& a, Eigen::Matrix<double, 7, 1> e, double dt, int steps) {
  std::vector<double> v;
  for (int i = 0; i < steps; ++i) {
    v.push_back(0.5 * e.squaredNorm());
    const auto k1 = a * e;
    const auto k2 = a * (e + 0.5 * dt * k1);
    const auto k3 = a * (e + 0.5 * dt * k2);
    const auto k4 = a * (e + dt * k3);
    e += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  v.push_back(0.5 * e.squaredNorm());
  return v;
}

// Measurement generated by the same model the observer uses, at level attitude.
struct ModelTruth {
  Vec4 lambda = Vec4::Ones();
  Vec3 l_m = Vec3::Zero();
  Vec4 f = hover();
  ObserverMeasurement y;

  void step(double dt) {
    const InputMatrices m = build_input_matrices(kParams, f, EulerAngles{});
    const Vec4 rate = observer_drift(y, kParams) + m.B * mixer_matrix(kParams) * f.cwiseProduct(lambda) +
                      m.B_xi_aug * l_m;
    y.v_z += dt * rate(0);
    y.omega += dt * rate.tail<3>();
  }
};

}  // namespace

TEST(InputMatrices, ZeroForcesRemoveExcitation) {
  const InputMatrices m = build_input_matrices(kParams, Vec4::Zero(), EulerAngles{});
  EXPECT_EQ(m.B_star, Mat4::Zero());
}

TEST(InputMatrices, HoverFirstRow) {
  const Vec4 f(2.5, 2.6, 2.7, 2.8);
  const InputMatrices m = build_input_matrices(kParams, f, EulerAngles{});
  EXPECT_LT((m.B_star.row(0).transpose() - f / kParams.mass).norm(), 1e-14);
  EXPECT_EQ(m.B_xi_aug.row(0), Eigen::RowVector3d::Zero());
  EXPECT_EQ(m.B_tilde_star, m.B_star.bottomRows<3>());
  EXPECT_EQ(m.B_xi_tilde, m.B_xi_aug.bottomRows<3>());
}

TEST(InputMatrices, LoadMapInAngularAcceleration) {
  const EulerAngles a{0.1, -0.2, 0.3};
  const InputMatrices m = build_input_matrices(kParams, hover(), a);
  const Vec3 l(0.01, -0.02, 0.005);
  EXPECT_LT((m.B_xi_tilde * l - load_torque(l, a, kParams).cwiseQuotient(kParams.inertia)).norm(), 1e-12);
}

TEST(GainCondition, ZeroGainsFail) {
  const GainConditionReport r = check_gain_condition(Mat4::Zero(), Mat3::Zero(), hover_matrices());
  EXPECT_FALSE(r.pass);
  EXPECT_GE(r.max_real_loe, 0.0);
  EXPECT_GE(r.max_real_load, 0.0);
}

TEST(GainCondition, LiteralConditionInfeasibleAtHover) {
  // trace(-k B + k'k + C'C) >= |C|_F^2 - |B|_F^2 / 4 for every k, with the
  // minimum at k = B'/2. The bound is positive here, so no gain can pass.
  const InputMatrices m = hover_matrices();
  const double bound_loe = m.B_tilde_star.squaredNorm() - 0.25 * m.B_star.squaredNorm();
  const double bound_load = 0.75 * m.B_xi_tilde.squaredNorm();
  EXPECT_GT(bound_loe, 0.0);
  EXPECT_GT(bound_load, 0.0);

  const GainConditionReport best =
      check_gain_condition(0.5 * m.B_star.transpose(), 0.5 * m.B_xi_tilde.transpose(), m);
  EXPECT_NEAR(best.trace_loe, bound_loe, 1e-9 * bound_loe);
  EXPECT_NEAR(best.trace_load, bound_load, 1e-9 * bound_load);
  EXPECT_FALSE(best.pass);

  std::mt19937_64 gen(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double scale = std::pow(10.0, 4.0 * (n(gen) / 3.0));
    const Mat4 k1 = scale * Mat4::NullaryExpr([&] { return n(gen); });
    const Mat3 k2 = scale * Mat3::NullaryExpr([&] { return n(gen); });
    const GainConditionReport r = check_gain_condition(k1, k2, m);
    EXPECT_GE(r.trace_loe, bound_loe * (1.0 - 1e-9));
    EXPECT_FALSE(r.pass);
  }
}

TEST(Lyapunov, GradientGainsGiveNonIncreasingV0) {
  const InputMatrices m = hover_matrices();
  const ObserverGains g = gradient_gains(m, 1e-4);
  EXPECT_GE(lyapunov_margin(g.k1, g.k2, m), -1e-12);
  const Mat7 a = error_dynamics_matrix(g.k1, g.k2, m);
  std::mt19937_64 gen(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix<double, 7, 1> e;
    for (int i = 0; i < 4; ++i) e(i) = 0.3 * n(gen);
    for (int i = 4; i < 7; ++i) e(i) = 0.02 * n(gen);
    const auto v = v0_trajectory(a, e, 1e-3, 2000);
    for (std::size_t i = 1; i < v.size(); ++i) ASSERT_LE(v[i], v[i - 1] + 1e-8);
  }
}

TEST(Lyapunov, ReversedGainsDiverge) {
  const InputMatrices m = hover_matrices();
  const ObserverGains g = gradient_gains(m, -1e-4);
  EXPECT_LT(lyapunov_margin(g.k1, g.k2, m), 0.0);
  const Mat7 a = error_dynamics_matrix(g.k1, g.k2, m);
  Eigen::Matrix<double, 7, 1> e = Eigen::Matrix<double, 7, 1>::Constant(0.01);
  const auto v = v0_trajectory(a, e, 1e-4, 2000);
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [&](double x) { return x > 100.0 * v.front(); }));
}

TEST(Lyapunov, V0Definition) {
  EXPECT_DOUBLE_EQ(lyapunov_v0(Vec4(1, 0, 0, 0), Vec3(0, 2, 0)), 2.5);
}

TEST(DefaultGains, ErrorPolesAtRequestedBandwidth) {
  const ObserverGains g = design_default_gains(kParams, 0, 5.0, 7.0);
  const InputMatrices m = hover_matrices();
  Eigen::EigenSolver<Mat7> es(error_dynamics_matrix(g.k1, g.k2, m));
  std::vector<double> re;
  for (int i = 0; i < 7; ++i) {
    EXPECT_NEAR(es.eigenvalues()(i).imag(), 0.0, 1e-9);
    re.push_back(es.eigenvalues()(i).real());
  }
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re[0], -7.0, 1e-9);
  EXPECT_NEAR(re[1], -7.0, 1e-9);
  EXPECT_NEAR(re[2], -5.0, 1e-9);
  for (int i = 3; i < 7; ++i) EXPECT_NEAR(re[i], 0.0, 1e-9);
  EXPECT_LE(error_dynamics_abscissa(g.k1, g.k2, m), 1e-9);
}

TEST(DefaultGains, TargetRowBlindToLoadAtLevel) {
  const ObserverGains g = design_default_gains(kParams, 0, 5.0, 5.0);
  const InputMatrices m = hover_matrices();
  EXPECT_LT((g.k1 * m.B_xi_aug).norm(), 1e-12);
}

TEST(DefaultGains, BadTargetRejected) {
  EXPECT_THROW(design_default_gains(kParams, 4, 5.0, 5.0), ConfigError);
}

TEST(IntegratedObserver, UnstableGainsRejected) {
  ObserverGains g = design_default_gains(kParams, 0, 5.0, 5.0);
  g.k1 = -g.k1;
  EXPECT_THROW(IntegratedObserver(kParams, g), GainConditionViolated);
}

TEST(IntegratedObserver, StepLimitEnforced) {
  IntegratedObserver obs(kParams, design_default_gains(kParams, 0, 50.0, 50.0));
  EXPECT_THROW(obs.step({}, hover(), hover_matrices(), 0.05), StepTooLarge);
}

TEST(IntegratedObserver, HealthyEquilibriumStaysAtZero) {
  IntegratedObserver obs(kParams, design_default_gains(kParams, 0, 5.0, 5.0));
  ModelTruth truth;
  obs.reset(truth.y, Vec4::Zero(), Vec3::Zero());
  for (int i = 0; i < 3000; ++i) {
    truth.step(1e-3);
    obs.step(truth.y, truth.f, hover_matrices(), 1e-3);
  }
  EXPECT_LT(obs.state().d_gamma_hat.norm(), 1e-12);
  EXPECT_LT(obs.state().l_m_hat.norm(), 1e-12);
}

TEST(IntegratedObserver, RecoversLoeStep) {
  IntegratedObserver obs(kParams, design_default_gains(kParams, 0, 5.0, 5.0));
  ModelTruth truth;
  obs.reset(truth.y, Vec4::Zero(), Vec3::Zero());
  truth.lambda(0) = 0.7;
  const InputMatrices m = hover_matrices();
  for (int i = 0; i < 4000; ++i) {
    truth.step(1e-3);
    obs.step(truth.y, truth.f, m, 1e-3);
  }
  EXPECT_NEAR(obs.state().d_gamma_hat(0), -0.3, 1e-3);
}

TEST(IntegratedObserver, SeparatesLoadFromLoe) {
  IntegratedObserver obs(kParams, design_default_gains(kParams, 0, 5.0, 5.0));
  ModelTruth truth;
  obs.reset(truth.y, Vec4::Zero(), Vec3::Zero());
  truth.lambda(0) = 0.8;
  truth.l_m = Vec3(0.01, -0.015, 0.0);
  const InputMatrices m = hover_matrices();
  for (int i = 0; i < 4000; ++i) {
    truth.step(1e-3);
    obs.step(truth.y, truth.f, m, 1e-3);
  }
  EXPECT_NEAR(obs.state().d_gamma_hat(0), -0.2, 1e-3);
  EXPECT_LT((obs.state().l_m_hat - truth.l_m).norm(), 1e-3 * truth.l_m.norm() + 1e-6);
}

TEST(IntegratedObserver, BoundedUnderNoise) {
  IntegratedObserver obs(kParams, design_default_gains(kParams, 0, 5.0, 5.0));
  ModelTruth truth;
  truth.lambda(0) = 0.7;
  obs.reset(truth.y, Vec4::Zero(), Vec3::Zero());
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0.0, 1.0);
  const InputMatrices m = hover_matrices();
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    truth.step(1e-3);
    ObserverMeasurement y = truth.y;
    y.v_z += 0.01 * n(gen);
    y.omega += 0.005 * Vec3(n(gen), n(gen), n(gen));
    obs.step(y, truth.f, m, 1e-3);
    worst = std::max(worst, obs.state().l_m_hat.norm());
  }
  EXPECT_TRUE(obs.state().z1.allFinite());
  EXPECT_LT(worst, 0.05);
}

namespace {

struct PeriodicRun {
  double amplitude = 0.0;
  double power_fraction = 0.0;
  double final_abs = 0.0;
};

// Target-rotor force = offset + amp sin(beta t); the other rotors are known.
PeriodicRun run_periodic(double amp, double beta) {
  const double dt = 1e-3;
  PeriodicObserver obs(kParams, 0, beta, 30.0);
  ObserverMeasurement y;
  const Vec4 f_other = hover();
  const Vec4 b1 = rotor_input_column(kParams, EulerAngles{}, 0);
  obs.reset(y, 2.0);
  std::vector<double> t, d;
  const double period = 2.0 * std::numbers::pi / beta;
  const long n = std::lround(4.0 / dt);
  const long fit_from = n - std::lround(3.0 * period / dt);
  for (long i = 0; i < n; ++i) {
    const double tm = (i + 0.5) * dt;
    const double f1 = 2.0 + amp * std::sin(beta * tm);
    const Vec4 known = periodic_known_rate(kParams, y, EulerAngles{}, f_other, Vec4::Zero(), Vec3::Zero(), 0);
    y.v_z += dt * (known(0) + b1(0) * f1);
    y.omega += dt * (known.tail<3>() + b1.tail<3>() * f1);
    obs.step(y, periodic_known_rate(kParams, y, EulerAngles{}, f_other, Vec4::Zero(), Vec3::Zero(), 0), b1, dt);
    if (i >= fit_from) {
      t.push_back((i + 1) * dt);
      d.push_back(obs.d_a_hat());
    }
  }
  PeriodicRun r;
  double s = 0.0, c = 0.0, total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += d[i] * std::sin(beta * t[i]);
    c += d[i] * std::cos(beta * t[i]);
    total += d[i] * d[i];
  }
  const double m = static_cast<double>(t.size());
  r.amplitude = 2.0 * std::hypot(s, c) / m;
  r.power_fraction = total > 0.0 ? (r.amplitude * r.amplitude / 2.0) / (total / m) : 0.0;
  r.final_abs = std::abs(d.back());
  return r;
}

}  // namespace

TEST(PeriodicObserver, NoSinusoidMeansNoEstimate) {
  const PeriodicRun r = run_periodic(0.0, 20.0);
  EXPECT_LT(r.final_abs, 1e-6);
}

TEST(PeriodicObserver, AmplitudeAndSpectralConcentration) {
  const PeriodicRun r = run_periodic(0.5, 20.0);
  EXPECT_NEAR(r.amplitude, 0.5, 0.02 * 0.5);
  EXPECT_GT(r.power_fraction, 0.9);
}

TEST(PeriodicObserver, InvalidParametersRejected) {
  EXPECT_THROW(PeriodicObserver(kParams, 0, 0.0, 30.0), ConfigError);
  EXPECT_THROW(PeriodicObserver(kParams, 0, 20.0, -1.0), ConfigError);
}

namespace {

// x3' = x4 + d with known x4; x3 is integrated exactly between samples.
struct FtdoCase {
  double d0 = 0.0;
  double slope = 0.0;
  double x4 = 0.3;
  double dt = 1e-4;

  double d(double t) const { return d0 + slope * t; }
  double x3_increment(double t0, double t1) const {
    return x4 * (t1 - t0) + d0 * (t1 - t0) + 0.5 * slope * (t1 * t1 - t0 * t0);
  }
};

double ftdo_error_after(const FtdoCase& c, const FtdoGains& g, double settle, double horizon) {
  FtdoState s;
  double x3 = 0.2;
  s.z0 = Vec2::Constant(x3);
  double worst = 0.0;
  const long n = std::lround(horizon / c.dt);
  for (long i = 0; i < n; ++i) {
    const double t0 = i * c.dt, t1 = (i + 1) * c.dt;
    x3 += c.x3_increment(t0, t1);
    s = ftdo_step(s, Vec2::Constant(x3), Vec2::Constant(c.x4), g, c.dt);
    if (t1 >= settle) worst = std::max(worst, (s.z1 - Vec2::Constant(c.d(t1))).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST(Ftdo, ZeroDisturbanceStaysZero) {
  FtdoCase c;
  FtdoGains g;
  EXPECT_LT(ftdo_error_after(c, g, 0.0, 1.0), 1e-12);
}

TEST(Ftdo, ConstantRecoveredExactly) {
  FtdoCase c;
  c.d0 = 0.4;
  FtdoGains g;
  EXPECT_LT(ftdo_error_after(c, g, 0.5, 3.0), 1e-6);
}

TEST(Ftdo, RampRecoveredWithHalfStepDelay) {
  FtdoCase c;
  c.d0 = -0.3;
  c.slope = 0.2;
  FtdoGains g;
  // A one-step difference reports the mid-step value: the lag is slope * dt / 2.
  EXPECT_NEAR(ftdo_error_after(c, g, 1.0, 4.0), c.slope * c.dt / 2.0, 1e-9);
}

TEST(Ftdo, SinusoidTrackedAfterTransient) {
  FtdoGains g;
  const double dt = 1e-3;
  FtdoState s;
  double x3 = 0.0, worst = 0.0;
  for (long i = 0; i < 20000; ++i) {
    const double t0 = i * dt, t1 = (i + 1) * dt;
    x3 += -0.1 * (std::cos(t1) - std::cos(t0));
    s = ftdo_step(s, Vec2::Constant(x3), Vec2::Zero(), g, dt);
    if (t1 > 2.0) worst = std::max(worst, std::abs(s.z1(0) - 0.1 * std::sin(t1)));
  }
  EXPECT_LT(worst, 5e-3);
}

TEST(Ftdo, ExplicitSchemeConvergesToChatteringBand) {
  FtdoCase c;
  c.d0 = 0.4;
  FtdoGains g;
  g.scheme = FtdoScheme::Explicit;
  // Discrete sign switching leaves a band of order (lambda0 + lambda1) L dt / substeps.
  EXPECT_LT(ftdo_error_after(c, g, 1.0, 3.0), (g.lambda0 + g.lambda1) * g.L * c.dt);
}

TEST(Ftdo, RateIsIncrementOfEstimate) {
  FtdoGains g;
  FtdoState s;
  s = ftdo_step(s, Vec2(0.01, -0.02), Vec2::Zero(), g, 1e-3);
  const FtdoState n = ftdo_step(s, Vec2(0.02, -0.03), Vec2(0.1, 0.0), g, 1e-3);
  EXPECT_LT((n.v1 - (n.z1 - s.z1) / 1e-3).norm(), 1e-9);
}

TEST(Ftdo, GainValidation) {
  FtdoGains g;
  g.L = 0.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = FtdoGains{};
  g.substeps = 0;
  EXPECT_THROW(g.validate(), ConfigError);
}
