#include "fsep/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fsep/errors.hpp"

namespace fsep {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  return r * std::cos(a);
}

ReferencePoint reference(double t, const TrajectoryConfig& c) {
  ReferencePoint ref;
  const double tau = std::max(t - c.start_time, 0.0);
  const bool moving = t >= c.start_time;
  for (int n = 0; n <= 4; ++n) {
    const double scale = c.radius * std::pow(c.omega, n);
    const double shift = c.omega * tau + n * std::numbers::pi / 2.0;
    Vec3& d = ref.d[static_cast<std::size_t>(n)];
    if (n == 0) {
      d = Vec3(scale * std::sin(shift), scale * std::cos(shift), c.altitude + c.climb_rate * tau);
    } else if (moving) {
      d = Vec3(scale * std::sin(shift), scale * std::cos(shift), n == 1 ? c.climb_rate : 0.0);
    }
  }
  return ref;
}

TrajectoryDerivBounds reference_bounds(const TrajectoryConfig& c) {
  const double snap = c.radius * std::pow(c.omega, 4);
  return {0.0, snap, snap};
}

void Scenario::validate() const {
  if (!(dt > 0.0) || !(duration > 0.0)) throw ConfigError("scenario: dt and duration must be positive");
  if (dt > fault.lag_nominal / 5.0) {
    throw ConfigError("scenario: dt must not exceed T_a / 5 = " + std::to_string(fault.lag_nominal / 5.0));
  }
  params.validate();
  fault.validate(params);
  excitation.validate();
  if (noise.position < 0 || noise.velocity < 0 || noise.angles < 0 || noise.rates < 0) {
    throw ConfigError("scenario: noise standard deviations must be non-negative");
  }
  if (!(observer.bandwidth_loe > 0 && observer.bandwidth_load > 0 && observer.periodic_pole > 0)) {
    throw ConfigError("scenario: observer bandwidths must be positive");
  }
  controller.smc.validate();
  const double k_min = min_switching_gain(params);
  if (controller.smc.k < k_min) {
    throw ConfigError("controller.smc.k must be at least k_min = " + std::to_string(k_min));
  }
  controller.ftdo.validate();
  bool have_constant = false;
  double last_end = -1e300;
  for (const auto& w : schedule) {
    if (w.phase == ExcitationPhase::Off) throw ConfigError("schedule: windows must be constant or sinusoidal");
    if (!(w.t_end > w.t_start)) throw ConfigError("schedule: each window needs t_end > t_start");
    if (w.t_start < last_end) throw ConfigError("schedule: windows must be ordered and non-overlapping");
    if (w.phase == ExcitationPhase::Sinusoidal && !have_constant) {
      throw ConfigError("schedule: a sinusoidal window needs an earlier constant window");
    }
    have_constant = have_constant || w.phase == ExcitationPhase::Constant;
    last_end = w.t_end;
  }
}

int Scenario::stage_at(double t) const {
  for (const auto& w : schedule) {
    if (t >= w.t_start && t < w.t_end) return w.phase == ExcitationPhase::Constant ? 2 : 3;
  }
  if (!schedule.empty() && t >= schedule.back().t_end) return 4;
  return t < fault.t_lambda ? 0 : 1;
}

Scenario paper_scenario() {
  Scenario sc;
  sc.name = "paper_sec4";
  sc.fault.lambda = Vec4(0.7, 1.0, 1.0, 1.0);
  sc.fault.t_lambda = 35.0;
  sc.fault.lag_nominal = 0.02;
  sc.fault.lag_aging = 0.03;
  sc.fault.t_aging = 0.0;
  sc.fault.cog_offset = Vec3(0.01, 0.0, 0.0);
  sc.schedule = {{37.0, 41.0, ExcitationPhase::Constant}, {41.0, 46.0, ExcitationPhase::Sinusoidal}};
  return sc;
}

ObserverGains observer_gains(const Scenario& sc) {
  ObserverGains g = design_default_gains(sc.params, sc.excitation.target_rotor, sc.observer.bandwidth_loe,
                                         sc.observer.bandwidth_load);
  if (sc.observer.k1) g.k1 = *sc.observer.k1;
  if (sc.observer.k2) g.k2 = *sc.observer.k2;
  return g;
}

namespace {

RigidState measure(const RigidState& x, const NoiseConfig& n, Rng& rng) {
  RigidState y = x;
  auto add = [&rng](Vec3& v, double sigma) {
    if (sigma <= 0.0) return;
    for (int i = 0; i < 3; ++i) v(i) += sigma * rng.normal();
  };
  add(y.position, n.position);
  add(y.velocity, n.velocity);
  Vec3 a = y.angles.as_vector();
  add(a, n.angles);
  y.angles = EulerAngles::from_vector(a);
  add(y.omega, n.rates);
  return y;
}

struct WindowProgress {
  bool begun = false;
  bool ended = false;
  bool skipped = false;
};

void simulate(const Scenario& sc, const RunOptions& opt, ScenarioRecord& rec) {
  const VehicleParams& P = sc.params;
  const int target = sc.excitation.target_rotor;
  const double dt = sc.dt;
  const bool proposed = sc.mode == ControllerMode::Proposed;
  const long steps = std::lround(sc.duration / dt);
  const long stride = std::max(opt.stride, 1L);

  RigidState x0;
  x0.position = reference(0.0, sc.trajectory).position();
  const Vec4 hover = Vec4::Constant(P.hover_force());
  Plant plant(P, sc.fault, x0, steady_motors(hover));
  ActuatorModel model(P, sc.fault.lag_nominal, hover);
  IntegratedObserver iobs(P, observer_gains(sc));
  PeriodicObserver pobs(P, target, sc.excitation.beta, sc.observer.periodic_pole);
  SafetyController ctrl(P, sc.controller);
  DiagnosisSession session(sc.excitation, sc.fault.lag_nominal);
  Rng rng(sc.seed);
  const TrajectoryDerivBounds bounds = reference_bounds(sc.trajectory);

  ctrl.reset(x0);
  iobs.reset(ObserverMeasurement{x0.velocity.z(), x0.omega}, Vec4::Zero(), Vec3::Zero());

  rec.samples.reserve(static_cast<std::size_t>(steps / stride + 1));
  DiagnosisSummary& diag = rec.diagnosis;
  std::vector<WindowProgress> progress(sc.schedule.size());

  ExcitationPhase active = ExcitationPhase::Off;
  bool frozen = false;
  Vec4 frozen_dg = Vec4::Zero();
  Vec3 frozen_l = Vec3::Zero();

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const RigidState& x = plant.state();
    const RigidState y = measure(x, sc.noise, rng);
    const ObserverMeasurement om{y.velocity.z(), y.omega};
    const ReferencePoint ref = reference(t, sc.trajectory);

    auto envelope_now = [&]() {
      const Vec3 xi_hat = load_torque_matrix(y.angles, P) * (frozen ? frozen_l : iobs.state().l_m_hat);
      return envelope_bounds(delta_terms(bounds, y.angles, xi_hat, P), P);
    };

    // Window transitions: close the running window before opening the next one.
    if (proposed) {
      for (std::size_t i = 0; i < sc.schedule.size(); ++i) {
        const ExcitationWindow& w = sc.schedule[i];
        WindowProgress& wp = progress[i];
        if (wp.begun && !wp.ended && t >= w.t_end) {
          wp.ended = true;
          active = ExcitationPhase::Off;
          if (wp.skipped) continue;
          if (w.phase == ExcitationPhase::Constant) {
            diag.lambda_hat = session.finish_constant();
            diag.has_loe = true;
            diag.z1c = session.z1c();
            frozen_dg = iobs.state().d_gamma_hat;
            frozen_dg(target) = diag.lambda_hat - 1.0;
            frozen_l = iobs.state().l_m_hat;
            diag.l_m_hat = frozen_l;
            iobs.reset(om, frozen_dg, frozen_l);
          } else {
            try {
              diag.aging_hat = session.finish_sinusoidal(sc.recovery);
              diag.has_lag = true;
            } catch (const InconsistentResponse&) {
              diag.inconsistent = true;
            } catch (const EmptySeries&) {
              diag.inconsistent = true;
            }
            diag.z1p = session.z1p();
            model.set_lag(target, sc.fault.lag_nominal + diag.aging_hat);
            frozen = false;
            iobs.reset(om, frozen_dg, frozen_l);
          }
        }
      }
      for (std::size_t i = 0; i < sc.schedule.size(); ++i) {
        const ExcitationWindow& w = sc.schedule[i];
        WindowProgress& wp = progress[i];
        if (wp.begun || t < w.t_start || t >= w.t_end) continue;
        wp.begun = true;
        const ExcitationEnvelope env = envelope_now();
        if (!env.nonempty() || (w.phase == ExcitationPhase::Sinusoidal && !diag.has_loe)) {
          diag.envelope_empty = diag.envelope_empty || !env.nonempty();
          wp.skipped = true;
          continue;
        }
        active = w.phase;
        if (w.phase == ExcitationPhase::Constant) {
          const ClampedValue fc = constant_signal(bounds.z_dd_max, P, env);
          diag.f_cons = fc.value;
          diag.f_cons_clamped = fc.clamped;
          diag.env_constant = env;
          session.begin_constant(env, fc.value, w.t_start, w.t_end);
        } else {
          diag.env_sinusoid = env;
          diag.alpha_eff = effective_alpha(env, sc.excitation.alpha);
          diag.amplitude = sinusoid_amplitude(env, sc.excitation);
          session.begin_sinusoidal(env, w.t_start, w.t_end);
          pobs.reset(om, diag.lambda_hat * env.midpoint());
          frozen = true;
        }
      }
    }

    const Vec4 f_model = model.output();
    const InputMatrices m = build_input_matrices(P, f_model, y.angles);
    if (!frozen) iobs.step(om, f_model, m, dt);
    const Vec4 dg = frozen ? frozen_dg : iobs.state().d_gamma_hat;
    const Vec3 lh = frozen ? frozen_l : iobs.state().l_m_hat;

    std::optional<double> f_ex;
    if (active == ExcitationPhase::Constant) {
      session.add_constant_sample(t, 1.0 + iobs.d_gamma_raw(om)(target));
      f_ex = diag.f_cons;
    } else if (active == ExcitationPhase::Sinusoidal) {
      const Vec4 known = periodic_known_rate(P, om, y.angles, f_model, dg, lh, target);
      pobs.step(om, known, rotor_input_column(P, y.angles, target), dt);
      session.add_sinusoid_sample(t, pobs.d_a_hat());
      f_ex = sinusoidal_signal(diag.env_sinusoid, sc.excitation, t);
    }

    const Vec4 d0 = proposed ? composite_estimate(m, dg, lh) : Vec4::Zero();
    SafetyController::Output out;
    try {
      out = ctrl.update(y, ref, d0, f_ex, target, dt);
    } catch (const SingularAttitude& e) {
      throw NumericalDivergence("run '" + sc.name + "' diverged at t = " + std::to_string(t) + ": " + e.what());
    }
    rec.events.allocation_clamps += out.clamp_events;
    rec.events.tilt_limited += out.outer.tilt_limited ? 1 : 0;
    rec.events.thrust_clamped += out.outer.thrust_clamped ? 1 : 0;

    if (k % stride == 0) {
      Sample s;
      s.t = t;
      s.stage = sc.stage_at(t);
      s.x = x;
      s.p_ref = ref.position();
      for (int i = 0; i < 4; ++i) s.lambda(i) = sc.fault.effectiveness(i, t);
      s.d_gamma_hat = dg;
      s.l_m = sc.fault.cog_offset;
      s.l_m_hat = lh;
      s.xi = load_torque(sc.fault.cog_offset, x.angles, P);
      s.xi_hat = load_torque_matrix(x.angles, P) * lh;
      s.d_a_hat = active == ExcitationPhase::Sinusoidal ? pobs.d_a_hat() : 0.0;
      s.f_cmd = out.f_cmd;
      s.f_out = plant.delivered_now(t);
      s.f_ex = f_ex.value_or(0.0);
      s.s = out.s;
      s.d_psi_hat = out.d_psi_hat;
      rec.samples.push_back(s);
    }

    model.step(out.f_cmd, dt);
    try {
      rec.events.saturation += plant.step(out.f_cmd, t, dt).saturation_events;
    } catch (const SingularAttitude& e) {
      throw NumericalDivergence("run '" + sc.name + "' diverged at t = " + std::to_string(t) + ": " + e.what());
    }
    const RigidState& nx = plant.state();
    if (!nx.finite() || nx.max_abs() > kDivergenceBound) {
      throw NumericalDivergence("run '" + sc.name + "' diverged at t = " + std::to_string(t + dt) +
                                ": state magnitude exceeds " + std::to_string(kDivergenceBound));
    }
  }
}

}  // namespace

ScenarioRecord run(const Scenario& sc, const RunOptions& opt) {
  sc.validate();
  ScenarioRecord rec;
  try {
    simulate(sc, opt, rec);
  } catch (const NumericalDivergence& e) {
    if (!opt.keep_partial) throw;
    rec.diverged = true;
    rec.divergence = e.what();
  }
  return rec;
}

}  // namespace fsep
