#include "dgpg/env/job.hpp"

#include <algorithm>
#include <cmath>

namespace dgpg::env {

using namespace workload;

double sample_pareto(Rng& rng, double shape, double scale) {
  // 1 - U keeps the argument in (0, 1].
  const double u = 1.0 - uniform01(rng);
  return scale * std::pow(u, -1.0 / shape);
}

Job make_job(JobKind kind, double cpu_draw, double ratio_draw, double duration_draw, int t) {
  Job job;
  job.kind = kind;
  if (kind == JobKind::CpuIntensive) {
    job.cpu_req = std::clamp(cpu_draw, 0.5, 20.0);
    job.mem_req = std::clamp(job.cpu_req * ratio_draw, 0.5, 64.0);
  } else {
    job.cpu_req = std::clamp(cpu_draw, 0.2, 8.0);
    job.mem_req = std::clamp(job.cpu_req * ratio_draw, 1.0, 128.0);
  }
  job.duration_base = std::clamp(duration_draw, kDurationMin, kDurationMax);
  job.arrival_t = t;
  return job;
}

Job sample_job(Rng& rng, int t, JobKind kind) {
  double cpu = 0.0;
  double ratio = 0.0;
  if (kind == JobKind::CpuIntensive) {
    cpu = sample_pareto(rng, kCpuParetoShape, kCpuParetoScale);
    ratio = std::uniform_real_distribution<double>(1.5, 3.0)(rng);
  } else {
    cpu = sample_pareto(rng, kMemParetoShape, kMemParetoScale);
    ratio = std::uniform_real_distribution<double>(6.0, 12.0)(rng);
  }
  const double duration = std::lognormal_distribution<double>(kDurationLogMu, kDurationLogSigma)(rng);
  return make_job(kind, cpu, ratio, duration, t);
}

Job sample_job(Rng& rng, int t) {
  const JobKind kind = uniform01(rng) < kCpuJobProb ? JobKind::CpuIntensive : JobKind::MemIntensive;
  return sample_job(rng, t, kind);
}

WorkloadStats estimate_workload_stats(std::uint64_t seed, std::size_t draws) {
  Rng rng(seed);
  double cpu = 0.0;
  double dur = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Job j = sample_job(rng, 0);
    cpu += j.cpu_req;
    dur += j.duration_base;
  }
  return {cpu / static_cast<double>(draws), dur / static_cast<double>(draws)};
}

const WorkloadStats& calibration_workload_stats() {
  static const WorkloadStats stats = estimate_workload_stats(kCalibrationSeed, kCalibrationDraws);
  return stats;
}

}  // namespace dgpg::env
