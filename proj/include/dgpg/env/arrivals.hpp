#pragma once

#include <span>

#include "dgpg/env/job.hpp"
#include "dgpg/env/server_spec.hpp"

namespace dgpg::env {

inline constexpr double kTidalPeriod = 1000.0;
inline constexpr double kTidalAmplitude = 0.3;
inline constexpr double kArrivalNoiseStd = 0.1;
inline constexpr double kRateFloor = 0.1;

// Time-varying Poisson intensity: base * max(0.1, 1 + 0.3 sin(2 pi t / 1000) + noise).
double arrival_rate(int t, double base, double noise);

// CPU flow balance: rho * sum_i(vcpus_i * eta_cpu_i) / (E[cpu_req] * E[duration]).
double calibrate_base_rate(std::span<const ServerSpec> fleet, double target_util,
                           const WorkloadStats& stats);

// Smallest k with P(Poisson(mean) <= k) >= q.
int poisson_quantile(double mean, double q);

}  // namespace dgpg::env
