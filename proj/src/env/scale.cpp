#include "dgpg/env/scale.hpp"

#include <stdexcept>

#include "dgpg/env/arrivals.hpp"
#include "dgpg/env/job.hpp"

namespace dgpg::env {

namespace {

ScaleConfig make_scale(std::string name, std::size_t n, std::size_t k) {
  ScaleConfig s;
  s.name = std::move(name);
  s.n_servers = n;
  s.n_clusters = k;
  s.servers_per_cluster = n / k;
  s.obs_mode = n >= 200 ? ObsMode::Compressed : ObsMode::Raw;
  return s;
}

const std::vector<ScaleConfig>& scales() {
  static const std::vector<ScaleConfig> all = {
      make_scale("tiny", 2, 2),       make_scale("small", 5, 5),   make_scale("compact", 10, 10),
      make_scale("standard", 20, 20), make_scale("medium", 50, 25), make_scale("heavy", 100, 25),
      make_scale("xlarge", 200, 40),
  };
  return all;
}

}  // namespace

std::span<const ScaleConfig> builtin_scales() { return scales(); }

const ScaleConfig& scale_by_name(std::string_view name) {
  for (const auto& s : scales())
    if (s.name == name) return s;
  throw std::out_of_range("unknown scale: " + std::string(name));
}

const ScaleConfig& scale_by_servers(std::size_t n_servers) {
  for (const auto& s : scales())
    if (s.n_servers == n_servers) return s;
  throw std::out_of_range("no built-in scale with N=" + std::to_string(n_servers));
}

int concurrent_slots(const ScaleConfig& scale) {
  double expected_cores = 0.0;
  for (const auto& t : builtin_server_types()) expected_cores += t.sample_weight * t.vcpus * t.eta_cpu;
  const auto& stats = calibration_workload_stats();
  const double rate = scale.target_util_hi * expected_cores * static_cast<double>(scale.n_servers) /
                      (stats.mean_cpu * stats.mean_duration);
  return std::max(1, poisson_quantile(rate, 0.999));
}

Scenario make_scenario(const ScaleConfig& scale, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  Scenario sc;
  sc.seed = seed;
  sc.scale_name = scale.name;
  sc.fleet = sample_fleet(scale.n_servers, rng);
  const double rho =
      std::uniform_real_distribution<double>(scale.target_util_lo, scale.target_util_hi)(rng);
  sc.base_rate = calibrate_base_rate(sc.fleet, rho, calibration_workload_stats());
  return sc;
}

}  // namespace dgpg::env
