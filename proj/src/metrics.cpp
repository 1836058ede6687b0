#include "fsep/metrics.hpp"

#include <cmath>

#include "fsep/errors.hpp"

namespace fsep {

MetricsWindow default_window(const Scenario& sc) {
  MetricsWindow w;
  w.t_from = sc.metrics_start;
  w.std_from = sc.schedule.empty() ? sc.fault.t_lambda + 5.0 : sc.schedule.back().t_end;
  return w;
}

Metrics compute_metrics(std::span<const Sample> samples, const MetricsWindow& window) {
  Metrics m;
  double te = 0.0, ee = 0.0, ae = 0.0;
  Vec4 sum = Vec4::Zero(), sum2 = Vec4::Zero();
  for (const Sample& s : samples) {
    if (s.t >= window.t_from) {
      const Vec3 e = s.p_ref - s.x.position;
      te += e.norm();
      ae += e.cwiseAbs().sum() / 3.0;
      ee += (s.xi - s.xi_hat).norm();
      ++m.samples;
    }
    if (s.t >= window.std_from) {
      sum += s.d_gamma_hat;
      sum2 += s.d_gamma_hat.cwiseAbs2();
      ++m.std_samples;
    }
  }
  if (m.samples == 0) throw EmptySeries("compute_metrics: no samples in the tracking window");
  const double n = static_cast<double>(m.samples);
  m.mte = te / n;
  m.mee = ee / n;
  m.mae = ae / n;
  if (m.std_samples > 1) {
    const double k = static_cast<double>(m.std_samples);
    const Vec4 mean = sum / k;
    const Vec4 var = ((sum2 - k * mean.cwiseAbs2()) / (k - 1.0)).cwiseMax(0.0);
    m.std_est = var.cwiseSqrt();
  }
  return m;
}

double misdiagnosis_rate(long n_failed, long n_total) {
  if (n_total <= 0) throw EmptySeries("misdiagnosis_rate: no runs");
  return static_cast<double>(n_failed) / static_cast<double>(n_total);
}

bool misdiagnosed(const DiagnosisSummary& d, double lambda_true, double threshold) {
  if (!d.has_loe) return true;
  return std::abs(d.lambda_hat - lambda_true) > threshold;
}

}  // namespace fsep
