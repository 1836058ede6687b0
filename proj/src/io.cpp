#include "fsep/io.hpp"

#include <charconv>
#include <cmath>

namespace fsep {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<std::string> timeseries_columns() {
  return {"t",         "stage",     "x",         "y",         "z",          "vx",         "vy",
          "vz",        "phi",       "theta",     "psi",       "p",          "q",          "r",
          "x_ref",     "y_ref",     "z_ref",     "lambda1",   "lambda2",    "lambda3",    "lambda4",
          "dgamma1",   "dgamma2",   "dgamma3",   "dgamma4",   "lm_x",       "lm_y",       "lm_z",
          "lm_hat_x",  "lm_hat_y",  "lm_hat_z",  "xi_x",      "xi_y",       "xi_z",       "xi_hat_x",
          "xi_hat_y",  "xi_hat_z",  "d_a_hat",   "f_cmd1",    "f_cmd2",     "f_cmd3",     "f_cmd4",
          "f_out1",    "f_out2",    "f_out3",    "f_out4",    "f_ex",       "s_phi",      "s_theta",
          "dpsi_hat_phi", "dpsi_hat_theta"};
}

void write_timeseries_csv(std::ostream& out, const ScenarioRecord& rec) {
  const auto cols = timeseries_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\r\n";
  std::string line;
  auto put = [&line](double v) {
    line += ',';
    line += format_number(v);
  };
  auto put_vec = [&put](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v(i));
  };
  for (const Sample& s : rec.samples) {
    line = format_number(s.t);
    line += ',';
    line += std::to_string(s.stage);
    put_vec(s.x.position);
    put_vec(s.x.velocity);
    put_vec(s.x.angles.as_vector());
    put_vec(s.x.omega);
    put_vec(s.p_ref);
    put_vec(s.lambda);
    put_vec(s.d_gamma_hat);
    put_vec(s.l_m);
    put_vec(s.l_m_hat);
    put_vec(s.xi);
    put_vec(s.xi_hat);
    put(s.d_a_hat);
    put_vec(s.f_cmd);
    put_vec(s.f_out);
    put(s.f_ex);
    put_vec(s.s);
    put_vec(s.d_psi_hat);
    line += "\r\n";
    out << line;
  }
}

namespace {

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

json complex_list(const std::vector<std::complex<double>>& ev) {
  json a = json::array();
  for (const auto& e : ev) a.push_back({{"re", e.real()}, {"im", e.imag()}});
  return a;
}

json envelope_json(const ExcitationEnvelope& e) { return {{"f_lower", e.f_lower}, {"f_upper", e.f_upper}}; }

}  // namespace

json metrics_json(const Scenario& sc, const ScenarioRecord& rec, const Metrics& m) {
  const DiagnosisSummary& d = rec.diagnosis;
  const int target = sc.excitation.target_rotor;
  const double lam = sc.fault.lambda(target);
  json j;
  j["scenario"] = sc.name;
  j["mode"] = sc.mode == ControllerMode::Proposed ? "proposed" : "nofdd";
  j["seed"] = sc.seed;
  j["mte"] = m.mte;
  j["mee"] = m.mee;
  j["mae"] = m.mae;
  j["mr"] = misdiagnosed(d, lam, 0.1) ? 1.0 : 0.0;
  j["std_est"] = vec(m.std_est);
  j["samples"] = m.samples;
  j["diverged"] = rec.diverged;
  if (rec.diverged) j["divergence"] = rec.divergence;
  j["diagnosis"] = {{"has_loe", d.has_loe},
                    {"has_lag", d.has_lag},
                    {"envelope_empty", d.envelope_empty},
                    {"inconsistent_response", d.inconsistent},
                    {"lambda_true", lam},
                    {"lambda_hat", d.lambda_hat},
                    {"T_c_true", sc.fault.aging_mask[static_cast<std::size_t>(target)] ? sc.fault.lag_aging : 0.0},
                    {"T_c_hat", d.aging_hat},
                    {"z1c", d.z1c},
                    {"z1p", d.z1p},
                    {"f_cons", d.f_cons},
                    {"f_cons_clamped", d.f_cons_clamped},
                    {"alpha_effective", d.alpha_eff},
                    {"amplitude", d.amplitude},
                    {"envelope_constant", envelope_json(d.env_constant)},
                    {"envelope_sinusoid", envelope_json(d.env_sinusoid)},
                    {"l_m_true", vec(sc.fault.cog_offset)},
                    {"l_m_hat", vec(d.l_m_hat)}};
  j["events"] = {{"saturation", rec.events.saturation},
                 {"allocation_clamps", rec.events.allocation_clamps},
                 {"tilt_limited", rec.events.tilt_limited},
                 {"thrust_clamped", rec.events.thrust_clamped}};
  return j;
}

json eigen_report(const Scenario& sc) {
  const VehicleParams& p = sc.params;
  const InputMatrices m = build_input_matrices(p, Vec4::Constant(p.hover_force()), EulerAngles{});
  const ObserverGains g = observer_gains(sc);
  const GainConditionReport r = check_gain_condition(g.k1, g.k2, m);
  const PeriodicObserver po(p, sc.excitation.target_rotor, sc.excitation.beta, sc.observer.periodic_pole);
  json j;
  j["operating_point"] = "level hover, f_i = m g / 4";
  j["B_star"] = mat(m.B_star);
  j["B_xi_aug"] = mat(m.B_xi_aug);
  j["k1"] = mat(g.k1);
  j["k2"] = mat(g.k2);
  j["literal_condition"] = {{"pass", r.pass},
                            {"eig_loe", complex_list(r.eig_loe)},
                            {"eig_load", complex_list(r.eig_load)},
                            {"trace_loe", r.trace_loe},
                            {"trace_load", r.trace_load}};
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(error_dynamics_matrix(g.k1, g.k2, m)), false);
  std::vector<std::complex<double>> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()(i));
  j["error_dynamics"] = {{"eigenvalues", complex_list(ev)},
                         {"abscissa", error_dynamics_abscissa(g.k1, g.k2, m)},
                         {"lyapunov_margin", lyapunov_margin(g.k1, g.k2, m)}};
  j["periodic_observer"] = {{"beta", sc.excitation.beta},
                            {"pole", sc.observer.periodic_pole},
                            {"injection", vec(po.injection())},
                            {"L", mat(po.gain())}};
  j["min_switching_gain"] = min_switching_gain(p);
  j["switching_gain"] = sc.controller.smc.k;
  return j;
}

std::vector<std::string> montecarlo_columns() {
  return {"run", "seed", "lambda1", "lm_x", "lm_y", "lm_z", "failed", "misdiagnosed", "lambda_hat",
          "T_c_hat", "mte", "mee", "mae", "mte_nofdd", "error"};
}

void write_montecarlo_csv(std::ostream& out, const MonteCarloResult& res) {
  const auto cols = montecarlo_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\r\n";
  for (const RunOutcome& o : res.runs) {
    std::string err = o.error;
    std::string quoted = "\"";
    for (char c : err) quoted += (c == '"') ? std::string("\"\"") : std::string(1, c);
    quoted += "\"";
    out << o.index << ',' << o.seed << ',' << format_number(o.lambda1) << ',' << format_number(o.l_m.x()) << ','
        << format_number(o.l_m.y()) << ',' << format_number(o.l_m.z()) << ',' << (o.failed ? 1 : 0) << ','
        << (o.misdiagnosed ? 1 : 0) << ',' << format_number(o.diagnosis.lambda_hat) << ','
        << format_number(o.diagnosis.aging_hat) << ',' << format_number(o.failed ? NAN : o.metrics.mte) << ','
        << format_number(o.failed ? NAN : o.metrics.mee) << ',' << format_number(o.failed ? NAN : o.metrics.mae)
        << ',' << (o.nofdd ? format_number(o.nofdd->mte) : std::string()) << ',' << quoted << "\r\n";
  }
}

json montecarlo_json(const MonteCarloResult& r, const MonteCarloConfig& cfg, std::uint64_t master_seed) {
  json j;
  j["master_seed"] = master_seed;
  j["runs"] = r.n;
  j["threshold"] = cfg.threshold;
  j["failed"] = r.n_failed;
  j["misdiagnosed"] = r.n_misdiagnosed;
  j["mr"] = r.mr;
  j["mean_mte"] = r.mean_mte;
  j["mean_mee"] = r.mean_mee;
  j["mean_lambda_error"] = r.mean_lambda_error;
  if (cfg.compare_nofdd) {
    j["mean_mte_nofdd"] = r.mean_mte_nofdd;
    j["compared"] = r.n_compared;
    j["proposed_better"] = r.n_proposed_better;
  }
  return j;
}

std::vector<EnvelopeRow> envelope_table(const Scenario& sc, double step) {
  std::vector<EnvelopeRow> rows;
  const TrajectoryDerivBounds bounds = reference_bounds(sc.trajectory);
  const auto n = static_cast<long>(std::floor(sc.duration / step + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * step;
    const ReferencePoint ref = reference(t, sc.trajectory);
    const Vec3& a = ref.d[2];
    EulerAngles ang;
    ang.theta = a.x() / sc.params.gravity;
    ang.phi = -a.y() / sc.params.gravity;
    const Vec3 xi = load_torque(sc.fault.cog_offset, ang, sc.params);
    EnvelopeRow row;
    row.t = t;
    row.deltas = delta_terms(bounds, ang, xi, sc.params);
    row.env = envelope_bounds(row.deltas, sc.params);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fsep
