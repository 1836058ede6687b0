#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fsep/controller.hpp"
#include "fsep/excitation.hpp"
#include "fsep/observers.hpp"
#include "fsep/plant.hpp"

namespace fsep {

/// Deterministic random source. Uniform and normal draws are computed from the
/// raw 64-bit engine output, so sequences match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Circle with constant climb, entered at start_time; hover at the entry point before.
struct TrajectoryConfig {
  double radius = 0.7;
  double omega = 0.5;  // rad/s, period 4 pi
  double climb_rate = 0.1;
  double altitude = 1.0;
  double start_time = 20.0;
};

ReferencePoint reference(double t, const TrajectoryConfig& cfg);

/// Extremes of z'' and the horizontal snap over the whole trajectory.
TrajectoryDerivBounds reference_bounds(const TrajectoryConfig& cfg);

struct ExcitationWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  ExcitationPhase phase = ExcitationPhase::Off;
};

enum class ControllerMode { Proposed, NoFDD };

/// Standard deviations of the additive Gaussian measurement noise.
struct NoiseConfig {
  double position = 0.0;
  double velocity = 0.01;
  double angles = 0.0;
  double rates = 0.005;

  bool enabled() const { return position > 0 || velocity > 0 || angles > 0 || rates > 0; }
};

struct ObserverConfig {
  double bandwidth_loe = 5.0;
  double bandwidth_load = 2.0;
  double periodic_pole = 30.0;
  std::optional<Mat4> k1;  // explicit gains replace the default design
  std::optional<Mat3> k2;
};

struct Scenario {
  std::string name = "scenario";
  double duration = 50.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  ControllerMode mode = ControllerMode::Proposed;
  VehicleParams params;
  FaultConfig fault;
  TrajectoryConfig trajectory;
  ExcitationConfig excitation;
  std::vector<ExcitationWindow> schedule;
  LagRecoveryMode recovery = LagRecoveryMode::ExactInversion;
  ObserverConfig observer;
  ControllerConfig controller;
  NoiseConfig noise;
  double metrics_start = 20.0;

  void validate() const;
  /// Stage tag at time t: 0 pre-fault, 1 faulty without excitation, 2 constant,
  /// 3 sinusoidal, 4 after the last excitation window.
  int stage_at(double t) const;
};

/// Reference airframe, circle trajectory, fault at 35 s and excitation 37-46 s.
Scenario paper_scenario();

ObserverGains observer_gains(const Scenario& sc);

/// One logged step.
struct Sample {
  double t = 0.0;
  int stage = 0;
  RigidState x;
  Vec3 p_ref = Vec3::Zero();
  Vec4 lambda = Vec4::Ones();
  Vec4 d_gamma_hat = Vec4::Zero();
  Vec3 l_m = Vec3::Zero();
  Vec3 l_m_hat = Vec3::Zero();
  Vec3 xi = Vec3::Zero();
  Vec3 xi_hat = Vec3::Zero();
  double d_a_hat = 0.0;
  Vec4 f_cmd = Vec4::Zero();
  Vec4 f_out = Vec4::Zero();
  double f_ex = 0.0;
  Vec2 s = Vec2::Zero();
  Vec2 d_psi_hat = Vec2::Zero();
};

struct DiagnosisSummary {
  bool envelope_empty = false;
  bool has_loe = false;
  bool has_lag = false;
  bool inconsistent = false;
  double lambda_hat = 1.0;
  double aging_hat = 0.0;
  double z1c = 0.0;
  double z1p = 0.0;
  double f_cons = 0.0;
  bool f_cons_clamped = false;
  double alpha_eff = 0.0;
  double amplitude = 0.0;  // A
  ExcitationEnvelope env_constant;
  ExcitationEnvelope env_sinusoid;
  Vec3 l_m_hat = Vec3::Zero();  // at the end of the constant phase
};

struct EventCounts {
  long saturation = 0;
  long allocation_clamps = 0;
  long tilt_limited = 0;
  long thrust_clamped = 0;
};

struct ScenarioRecord {
  std::vector<Sample> samples;
  DiagnosisSummary diagnosis;
  EventCounts events;
  bool diverged = false;
  std::string divergence;
};

struct RunOptions {
  long stride = 1;  // keep every stride-th sample
  /// Return the samples logged so far instead of throwing on divergence.
  bool keep_partial = false;
};

/// Executes the scenario. Throws NumericalDivergence if the vehicle leaves the
/// physically meaningful range, unless options.keep_partial is set.
ScenarioRecord run(const Scenario& scenario, const RunOptions& options = {});

/// Divergence threshold on any state magnitude.
inline constexpr double kDivergenceBound = 1e6;

}  // namespace fsep
