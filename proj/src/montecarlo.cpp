#include "fsep/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "fsep/errors.hpp"

namespace fsep {

void MonteCarloConfig::validate(const Scenario& base) const {
  if (runs < 1) throw ConfigError("montecarlo: runs must be at least 1");
  if (!(lambda1_min >= 0.0 && lambda1_max <= 1.0 && lambda1_min <= lambda1_max)) {
    throw ConfigError("montecarlo: lambda1 range must lie in [0, 1]");
  }
  if ((l_m_range.array() < 0.0).any() ||
      (l_m_range.array() > 0.5 * base.params.body_box.array() + 1e-12).any()) {
    throw ConfigError("montecarlo: l_m_range must be non-negative and within half the body box");
  }
  if (!(threshold > 0.0)) throw ConfigError("montecarlo: threshold must be positive");
}

std::uint64_t run_seed(std::uint64_t master, long index) {
  // splitmix64 finaliser over the master seed and run index
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Scenario monte_carlo_scenario(const Scenario& base, const MonteCarloConfig& cfg, std::uint64_t master,
                              long index) {
  Rng rng(run_seed(master, index));
  Scenario sc = base;
  sc.name = base.name + "#" + std::to_string(index);
  sc.fault.lambda(sc.excitation.target_rotor) = rng.uniform(cfg.lambda1_min, cfg.lambda1_max);
  for (int i = 0; i < 3; ++i) sc.fault.cog_offset(i) = rng.uniform(-cfg.l_m_range(i), cfg.l_m_range(i));
  sc.seed = rng.next_u64();
  return sc;
}

namespace {

RunOutcome execute(const Scenario& base, const MonteCarloConfig& cfg, std::uint64_t master, long index) {
  RunOutcome o;
  o.index = index;
  const Scenario sc = monte_carlo_scenario(base, cfg, master, index);
  o.seed = sc.seed;
  o.lambda1 = sc.fault.lambda(sc.excitation.target_rotor);
  o.l_m = sc.fault.cog_offset;
  const MetricsWindow window = default_window(sc);
  try {
    const ScenarioRecord rec = run(sc);
    o.diagnosis = rec.diagnosis;
    o.metrics = compute_metrics(rec.samples, window);
    o.misdiagnosed = misdiagnosed(rec.diagnosis, o.lambda1, cfg.threshold);
  } catch (const Error& e) {
    o.failed = true;
    o.misdiagnosed = true;
    o.error = e.what();
  }
  if (cfg.compare_nofdd) {
    Scenario nf = sc;
    nf.mode = ControllerMode::NoFDD;
    try {
      const ScenarioRecord rec = run(nf);
      o.nofdd = compute_metrics(rec.samples, window);
    } catch (const Error& e) {
      o.nofdd_failed = true;
    }
  }
  return o;
}

}  // namespace

MonteCarloResult monte_carlo(const Scenario& base, const MonteCarloConfig& cfg, std::uint64_t master, int jobs) {
  cfg.validate(base);
  base.validate();
  MonteCarloResult res;
  res.n = cfg.runs;
  res.runs.resize(static_cast<std::size_t>(cfg.runs));

  std::atomic<long> next{0};
  auto worker = [&]() {
    for (long i = next++; i < cfg.runs; i = next++) res.runs[static_cast<std::size_t>(i)] = execute(base, cfg, master, i);
  };
  const int n_threads = static_cast<int>(std::clamp<long>(jobs, 1, cfg.runs));
  std::vector<std::thread> pool;
  for (int j = 1; j < n_threads; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  long ok = 0;
  double lam_err = 0.0;
  for (const RunOutcome& o : res.runs) {
    if (o.failed) ++res.n_failed;
    if (o.misdiagnosed) ++res.n_misdiagnosed;
    if (!o.failed) {
      ++ok;
      res.mean_mte += o.metrics.mte;
      res.mean_mee += o.metrics.mee;
      lam_err += std::abs(o.diagnosis.lambda_hat - o.lambda1);
    }
    if (o.nofdd) {
      ++res.n_compared;
      res.mean_mte_nofdd += o.nofdd->mte;
      // A failed proposed run never counts as better.
      if (!o.failed && o.metrics.mte < o.nofdd->mte) ++res.n_proposed_better;
    } else if (cfg.compare_nofdd && o.nofdd_failed) {
      ++res.n_compared;
      if (!o.failed) ++res.n_proposed_better;
    }
  }
  if (ok > 0) {
    res.mean_mte /= static_cast<double>(ok);
    res.mean_mee /= static_cast<double>(ok);
    res.mean_lambda_error = lam_err / static_cast<double>(ok);
  }
  long nofdd_ok = 0;
  for (const RunOutcome& o : res.runs) nofdd_ok += o.nofdd ? 1 : 0;
  if (nofdd_ok > 0) res.mean_mte_nofdd /= static_cast<double>(nofdd_ok);
  res.mr = misdiagnosis_rate(res.n_misdiagnosed, res.n);
  return res;
}

}  // namespace fsep
