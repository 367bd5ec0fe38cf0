#pragma once

#include <cstdint>

#include "dgpg/common/rng.hpp"
#include "dgpg/env/server_spec.hpp"

namespace dgpg::env {

enum class JobKind { CpuIntensive, MemIntensive };

struct Job {
  std::uint64_t id = 0;
  JobKind kind = JobKind::CpuIntensive;
  double cpu_req = 0.0;
  double mem_req = 0.0;
  double duration_base = 0.0;
  int arrival_t = 0;

  ResourceVec demand() const noexcept { return {cpu_req, mem_req}; }
};

// Bimodal workload parameters.
namespace workload {
inline constexpr double kCpuJobProb = 0.6;
inline constexpr double kCpuParetoShape = 1.7;
inline constexpr double kCpuParetoScale = 0.6;
inline constexpr double kMemParetoShape = 2.2;
inline constexpr double kMemParetoScale = 0.4;
inline constexpr double kDurationLogMu = 3.0;
inline constexpr double kDurationLogSigma = 0.5;
inline constexpr double kDurationMin = 5.0;
inline constexpr double kDurationMax = 150.0;
}  // namespace workload

// Applies the per-kind clipping rules to raw draws. `cpu_draw` is the raw
// Pareto sample, `ratio_draw` the memory-to-CPU ratio, `duration_draw` the raw
// log-normal sample.
Job make_job(JobKind kind, double cpu_draw, double ratio_draw, double duration_draw, int t);

Job sample_job(Rng& rng, int t);
Job sample_job(Rng& rng, int t, JobKind kind);

// Pareto(shape, scale) by inverse CDF.
double sample_pareto(Rng& rng, double shape, double scale);

struct WorkloadStats {
  double mean_cpu = 0.0;
  double mean_duration = 0.0;
};

inline constexpr std::uint64_t kCalibrationSeed = 20240601;
inline constexpr std::size_t kCalibrationDraws = 100000;

// Monte Carlo estimate of E[cpu_req] and E[duration_base] over `draws`
// sample_job draws from `seed`.
WorkloadStats estimate_workload_stats(std::uint64_t seed, std::size_t draws);

// The calibration estimate under the fixed calibration seed, computed once.
const WorkloadStats& calibration_workload_stats();

}  // namespace dgpg::env
