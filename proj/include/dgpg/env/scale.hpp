#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgpg/env/server_spec.hpp"

namespace dgpg::env {

enum class ObsMode { Raw, Compressed };

struct ScaleConfig {
  std::string name;
  std::size_t n_servers = 0;
  std::size_t n_clusters = 0;
  std::size_t servers_per_cluster = 0;
  int episode_len = 3000;
  int arrivals_end = 2000;
  double target_util_lo = 0.80;
  double target_util_hi = 0.85;
  ObsMode obs_mode = ObsMode::Raw;

  // Action space: servers when clusters are singletons, else clusters.
  std::size_t act_dim() const noexcept { return n_clusters; }
  bool cluster_actions() const noexcept { return servers_per_cluster > 1; }
};

std::span<const ScaleConfig> builtin_scales();
const ScaleConfig& scale_by_name(std::string_view name);
const ScaleConfig& scale_by_servers(std::size_t n_servers);

// Fixed number of concurrent-job slots in the observation for a scale: the
// 99.9th percentile of per-step Poisson arrivals at the base rate of the
// expected catalog fleet at the top of the target-utilization band.
int concurrent_slots(const ScaleConfig& scale);

struct Scenario {
  std::uint64_t seed = 0;
  std::string scale_name;
  std::vector<ServerSpec> fleet;
  double base_rate = 0.0;
};

// Samples a fleet, a target utilization in the scale's band, and calibrates
// the base rate, all from `seed`.
Scenario make_scenario(const ScaleConfig& scale, std::uint64_t seed);

}  // namespace dgpg::env
