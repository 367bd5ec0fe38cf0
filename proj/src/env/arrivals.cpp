#include "dgpg/env/arrivals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dgpg::env {

double arrival_rate(int t, double base, double noise) {
  if (!(base > 0.0)) throw std::invalid_argument("arrival_rate: base must be positive");
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / kTidalPeriod;
  return base * std::max(kRateFloor, 1.0 + kTidalAmplitude * std::sin(phase) + noise);
}

double calibrate_base_rate(std::span<const ServerSpec> fleet, double target_util,
                           const WorkloadStats& stats) {
  if (fleet.empty()) throw std::invalid_argument("calibrate_base_rate: empty fleet");
  if (!(target_util > 0.0 && target_util < 1.0))
    throw std::invalid_argument("calibrate_base_rate: target utilization must be in (0, 1)");
  double effective_cores = 0.0;
  for (const auto& s : fleet) effective_cores += s.vcpus * s.eta_cpu;
  return target_util * effective_cores / (stats.mean_cpu * stats.mean_duration);
}

int poisson_quantile(double mean, double q) {
  if (mean <= 0.0) return 0;
  // Sum the pmf in log space to stay finite for large means.
  double cdf = 0.0;
  for (int k = 0;; ++k) {
    const double log_pmf = -mean + k * std::log(mean) - std::lgamma(k + 1.0);
    cdf += std::exp(log_pmf);
    if (cdf >= q) return k;
    if (k > 100000) return k;
  }
}

}  // namespace dgpg::env
