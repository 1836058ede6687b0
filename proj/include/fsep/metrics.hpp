#pragma once

#include <span>

#include "fsep/sim.hpp"

namespace fsep {

struct Metrics {
  double mte = 0.0;  // mean |p_d - p|, m
  double mee = 0.0;  // mean |xi - xi_hat|, N m
  double mae = 0.0;  // mean per-axis |p_d - p|, m
  Vec4 std_est = Vec4::Zero();  // per-channel std of d_gamma_hat in the STD window
  long samples = 0;
  long std_samples = 0;
};

struct MetricsWindow {
  double t_from = 0.0;      // tracking and estimation errors use t >= t_from
  double std_from = 0.0;    // STD uses t >= std_from
};

/// Default windows: tracking from scenario.metrics_start; STD after the last
/// excitation window, or from 5 s after the fault when there is none.
MetricsWindow default_window(const Scenario& scenario);

/// Throws EmptySeries when no sample falls in the tracking window.
Metrics compute_metrics(std::span<const Sample> samples, const MetricsWindow& window);

/// N_f / N_s; throws EmptySeries when n_total is zero.
double misdiagnosis_rate(long n_failed, long n_total);

/// Misdiagnosis predicate on the recovered LoE factor.
bool misdiagnosed(const DiagnosisSummary& d, double lambda_true, double threshold);

}  // namespace fsep
