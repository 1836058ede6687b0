#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsep/metrics.hpp"
#include "fsep/sim.hpp"

namespace fsep {

/// Randomisation of a Monte-Carlo batch. Each run draws lambda_1 uniformly from
/// [lambda1_min, lambda1_max], each CoG-offset component from +-l_m_range and a
/// fresh noise seed.
struct MonteCarloConfig {
  long runs = 100;
  double lambda1_min = 0.5;
  double lambda1_max = 1.0;
  Vec3 l_m_range{0.02, 0.02, 0.02};
  double threshold = 0.1;
  bool compare_nofdd = false;

  void validate(const Scenario& base) const;
};

struct RunOutcome {
  long index = 0;
  std::uint64_t seed = 0;
  double lambda1 = 1.0;
  Vec3 l_m = Vec3::Zero();
  bool failed = false;
  std::string error;
  bool misdiagnosed = false;
  DiagnosisSummary diagnosis;
  Metrics metrics;
  std::optional<Metrics> nofdd;
  bool nofdd_failed = false;
};

struct MonteCarloResult {
  std::vector<RunOutcome> runs;
  long n = 0;
  long n_failed = 0;
  long n_misdiagnosed = 0;
  double mr = 0.0;
  double mean_mte = 0.0;
  double mean_mee = 0.0;
  double mean_lambda_error = 0.0;
  double mean_mte_nofdd = 0.0;
  long n_compared = 0;
  long n_proposed_better = 0;
};

/// Seed of run `index`, a pure function of the master seed.
std::uint64_t run_seed(std::uint64_t master_seed, long index);

/// The randomised scenario of run `index`.
Scenario monte_carlo_scenario(const Scenario& base, const MonteCarloConfig& cfg, std::uint64_t master_seed,
                              long index);

/// Runs the batch on `jobs` threads. Results are stored by run index and
/// aggregated in index order, so the outcome does not depend on `jobs`.
MonteCarloResult monte_carlo(const Scenario& base, const MonteCarloConfig& cfg, std::uint64_t master_seed,
                             int jobs);

}  // namespace fsep
