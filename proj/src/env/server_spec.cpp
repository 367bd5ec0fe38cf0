#include "dgpg/env/server_spec.hpp"

#include <algorithm>
#include <stdexcept>

namespace dgpg::env {

namespace {

const std::vector<ServerSpec>& catalog() {
  static const std::vector<ServerSpec> types = {
      {"m4.8xlarge", Generation::Gen1, 32, 128.0, 0.70, 0.68, 0.10},
      {"t3.2xlarge", Generation::Gen1, 16, 64.0, 0.72, 0.70, 0.03},
      {"t3a.2xlarge", Generation::Gen1, 16, 64.0, 0.75, 0.72, 0.02},
      {"m5.8xlarge", Generation::Gen2, 32, 128.0, 0.95, 0.93, 0.20},
      {"c5.18xlarge", Generation::Gen2, 64, 128.0, 0.98, 0.93, 0.10},
      {"c5.12xlarge", Generation::Gen2, 48, 96.0, 0.97, 0.93, 0.08},
      {"r5.8xlarge", Generation::Gen2, 32, 256.0, 0.87, 0.92, 0.09},
      {"r5.6xlarge", Generation::Gen2, 24, 192.0, 0.84, 0.93, 0.07},
      {"m5n.12xlarge", Generation::Gen2, 48, 192.0, 0.96, 0.92, 0.06},
      {"m6i.8xlarge", Generation::Gen3, 32, 128.0, 1.06, 0.95, 0.15},
      {"c5n.18xlarge", Generation::Gen3, 64, 256.0, 1.08, 0.95, 0.08},
      {"c6i.32xlarge", Generation::Gen3, 96, 384.0, 1.08, 0.96, 0.02},
  };
  return types;
}

}  // namespace

std::span<const ServerSpec> builtin_server_types() { return catalog(); }

const ServerSpec& server_type(std::string_view instance_name) {
  for (const auto& s : catalog())
    if (s.instance_name == instance_name) return s;
  throw std::out_of_range("unknown instance type: " + std::string(instance_name));
}

std::vector<ServerSpec> sample_fleet(std::size_t n, Rng& rng) {
  return sample_fleet(n, rng, catalog());
}

std::vector<ServerSpec> sample_fleet(std::size_t n, Rng& rng, std::span<const ServerSpec> types) {
  if (n == 0) throw std::invalid_argument("sample_fleet: n must be >= 1");
  if (types.empty()) throw std::invalid_argument("sample_fleet: empty catalog");
  std::vector<double> weights;
  weights.reserve(types.size());
  for (const auto& t : types) weights.push_back(t.sample_weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  std::vector<ServerSpec> fleet;
  fleet.reserve(n);
  for (std::size_t i = 0; i < n; ++i) fleet.push_back(types[pick(rng)]);
  std::shuffle(fleet.begin(), fleet.end(), rng);
  return fleet;
}

std::string_view to_string(Generation g) {
  switch (g) {
    case Generation::Gen1: return "Gen1";
    case Generation::Gen2: return "Gen2";
    case Generation::Gen3: return "Gen3";
  }
  return "?";
}

}  // namespace dgpg::env
