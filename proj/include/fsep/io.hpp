#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsep/metrics.hpp"
#include "fsep/montecarlo.hpp"
#include "fsep/sim.hpp"

namespace fsep {

/// Column names of timeseries.csv, in order.
std::vector<std::string> timeseries_columns();

void write_timeseries_csv(std::ostream& out, const ScenarioRecord& record);

nlohmann::json metrics_json(const Scenario& scenario, const ScenarioRecord& record, const Metrics& metrics);

/// Observer matrices, gains and gain-condition eigenvalues at the hover point.
nlohmann::json eigen_report(const Scenario& scenario);

std::vector<std::string> montecarlo_columns();
void write_montecarlo_csv(std::ostream& out, const MonteCarloResult& result);
nlohmann::json montecarlo_json(const MonteCarloResult& result, const MonteCarloConfig& cfg, std::uint64_t master_seed);

struct EnvelopeRow {
  double t = 0.0;
  DeltaTerms deltas;
  ExcitationEnvelope env;
};

/// Envelope along the reference with the small-angle attitude that realises the
/// reference acceleration and the true load torque. One row per `step` seconds.
std::vector<EnvelopeRow> envelope_table(const Scenario& scenario, double step);

/// Shortest round-trip decimal text of x ("nan"/"inf" for non-finite values).
std::string format_number(double x);

}  // namespace fsep
