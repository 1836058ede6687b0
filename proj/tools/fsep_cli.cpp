// fsep: run fault-separation scenarios from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fsep/config.hpp"
#include "fsep/errors.hpp"
#include "fsep/io.hpp"
#include "fsep/metrics.hpp"
#include "fsep/montecarlo.hpp"
#include "fsep/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiverged = 2;
constexpr int kExitConfig = 3;
constexpr int kExitEmptyEnvelope = 4;
constexpr int kExitOther = 1;

struct Common {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario, "Scenario JSON file (defaults to the built-in paper scenario)");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--override", c.overrides, "Set a config value, e.g. fault.lambda1=0.5 (repeatable)");
}

fsep::ScenarioFile load(const Common& c) {
  fsep::ScenarioFile f = fsep::load_scenario(c.scenario, c.overrides);
  if (c.seed) f.scenario.seed = *c.seed;
  return f;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw fsep::ConfigError("cannot create output directory '" + dir + "'");
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream o(path);
  if (!o) throw fsep::ConfigError("cannot write '" + path.string() + "'");
  o << j.dump(2) << '\n';
}

int cmd_run(const Common& c) {
  const fsep::ScenarioFile f = load(c);
  const fs::path out = prepare_out(c.out);
  const fsep::Scenario& sc = f.scenario;
  write_json(out / "eigen_report.json", fsep::eigen_report(sc));
  fsep::RunOptions opts;
  opts.keep_partial = true;
  const fsep::ScenarioRecord rec = fsep::run(sc, opts);
  fsep::Metrics m;
  try {
    m = fsep::compute_metrics(rec.samples, fsep::default_window(sc));
  } catch (const fsep::EmptySeries&) {
    if (!rec.diverged) throw;
    m.mte = m.mee = m.mae = NAN;  // diverged before the tracking window opened
  }
  {
    std::ofstream csv(out / "timeseries.csv", std::ios::binary);
    if (!csv) throw fsep::ConfigError("cannot write timeseries.csv");
    fsep::write_timeseries_csv(csv, rec);
  }
  const json mj = fsep::metrics_json(sc, rec, m);
  write_json(out / "metrics.json", mj);
  std::cout << "mte " << m.mte << " m, mee " << m.mee << " N m, lambda_hat "
            << rec.diagnosis.lambda_hat << ", T_c_hat " << rec.diagnosis.aging_hat << " s\n"
            << "wrote " << (out / "timeseries.csv").string() << ", metrics.json, eigen_report.json\n";
  if (rec.diverged) throw fsep::NumericalDivergence(rec.divergence);
  return kExitOk;
}

int cmd_envelope(const Common& c, double step) {
  const fsep::ScenarioFile f = load(c);
  const fsep::Scenario& sc = f.scenario;
  const auto rows = fsep::envelope_table(sc, step);
  std::printf("%8s %12s %12s %12s %10s %10s %s\n", "t", "delta_x", "delta_y", "delta_z", "f_lower", "f_upper", "");
  bool empty_in_window = false;
  bool any_empty = false;
  for (const auto& r : rows) {
    bool in_window = false;
    for (const auto& w : sc.schedule) in_window = in_window || (r.t >= w.t_start && r.t <= w.t_end);
    const bool empty = !r.env.nonempty();
    any_empty = any_empty || empty;
    empty_in_window = empty_in_window || (empty && in_window);
    std::printf("%8.2f %12.6f %12.6f %12.6f %10.4f %10.4f %s\n", r.t, r.deltas.dx, r.deltas.dy, r.deltas.dz,
                r.env.f_lower, r.env.f_upper, empty ? "EMPTY" : (in_window ? "excite" : ""));
  }
  const bool fail = sc.schedule.empty() ? any_empty : empty_in_window;
  if (fail) {
    std::cerr << "error: excitation envelope is empty\n";
    return kExitEmptyEnvelope;
  }
  return kExitOk;
}

int cmd_montecarlo(const Common& c, std::optional<long> n, int jobs) {
  fsep::ScenarioFile f = load(c);
  if (n) f.montecarlo.runs = *n;
  if (f.montecarlo.runs < 1) throw fsep::ConfigError("montecarlo: -n must be at least 1");
  if (jobs < 1) throw fsep::ConfigError("montecarlo: --jobs must be at least 1");
  const fs::path out = prepare_out(c.out);
  const std::uint64_t master = f.scenario.seed;
  const fsep::MonteCarloResult r = fsep::monte_carlo(f.scenario, f.montecarlo, master, jobs);
  {
    std::ofstream csv(out / "runs.csv", std::ios::binary);
    fsep::write_montecarlo_csv(csv, r);
  }
  const json agg = fsep::montecarlo_json(r, f.montecarlo, master);
  write_json(out / "aggregate.json", agg);
  std::cout << agg.dump(2) << '\n';
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& key, const std::vector<std::string>& values) {
  if (values.empty()) throw fsep::ConfigError("sweep: --values needs at least one entry");
  const fs::path out = prepare_out(c.out);
  std::ofstream csv(out / "sweep.csv", std::ios::binary);
  csv << "value,mte,mee,lambda_hat,T_c_hat,status\r\n";
  std::printf("%14s %10s %10s %10s %10s %s\n", "value", "mte", "mee", "lambda", "T_c", "status");
  for (const auto& v : values) {
    Common one = c;
    one.overrides.push_back(key + "=" + v);
    const fsep::ScenarioFile f = load(one);
    std::string status = "ok";
    double mte = NAN, mee = NAN, lam = NAN, tc = NAN;
    fsep::RunOptions opts;
    opts.keep_partial = true;
    const fsep::ScenarioRecord rec = fsep::run(f.scenario, opts);
    if (rec.diverged || rec.samples.empty() || rec.samples.back().t < f.scenario.metrics_start) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "diverged@%.3f", rec.samples.empty() ? 0.0 : rec.samples.back().t);
      status = buf;
    } else {
      const fsep::Metrics m = fsep::compute_metrics(rec.samples, fsep::default_window(f.scenario));
      mte = m.mte;
      mee = m.mee;
    }
    lam = rec.diagnosis.lambda_hat;
    tc = rec.diagnosis.aging_hat;
    csv << v << ',' << fsep::format_number(mte) << ',' << fsep::format_number(mee) << ','
        << fsep::format_number(lam) << ',' << fsep::format_number(tc) << ',' << status << "\r\n";
    std::printf("%14s %10.4f %10.4f %10.4f %10.4f %s\n", v.c_str(), mte, mee, lam, tc, status.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Excitation-based fault separation for a quadrotor: simulation and diagnosis"};
  app.require_subcommand(1);

  Common run_opts, env_opts, mc_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "Simulate one scenario and write timeseries.csv, metrics.json, eigen_report.json");
  add_common(run, run_opts);

  double env_step = 1.0;
  auto* env = app.add_subcommand("envelope", "Print the excitation envelope along the reference trajectory");
  add_common(env, env_opts);
  env->add_option("--step", env_step, "Sampling interval in seconds")->check(CLI::PositiveNumber);

  std::optional<long> mc_n;
  int mc_jobs = 1;
  auto* mc = app.add_subcommand("montecarlo", "Randomised batch; writes runs.csv and aggregate.json");
  add_common(mc, mc_opts);
  mc->add_option("-n,--runs", mc_n, "Number of runs (overrides montecarlo.runs)");
  mc->add_option("--jobs", mc_jobs, "Worker threads");

  std::string sweep_key;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run the scenario once per value of one config key");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", sweep_key, "Dotted config key, e.g. excitation.beta")->required();
  sweep->add_option("--values", sweep_values, "Values to try")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*env) return cmd_envelope(env_opts, env_step);
    if (*mc) return cmd_montecarlo(mc_opts, mc_n, mc_jobs);
    if (*sweep) return cmd_sweep(sweep_opts, sweep_key, sweep_values);
  } catch (const fsep::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fsep::NumericalDivergence& e) {
    std::cerr << "numerical divergence: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const fsep::EmptyEnvelope& e) {
    std::cerr << "empty envelope: " << e.what() << '\n';
    return kExitEmptyEnvelope;
  } catch (const fsep::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
