#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgpg/common/rng.hpp"

namespace dgpg::env {

// Resource dimensions tracked by the simulator: CPU cores and memory (GB).
inline constexpr std::size_t kResourceDims = 2;
inline constexpr std::size_t kCpu = 0;
inline constexpr std::size_t kMem = 1;

using ResourceVec = std::array<double, kResourceDims>;

enum class Generation { Gen1, Gen2, Gen3 };

struct ServerSpec {
  std::string instance_name;
  Generation generation = Generation::Gen2;
  int vcpus = 0;
  double mem_gb = 0.0;
  double eta_cpu = 1.0;
  double eta_mem = 1.0;
  double sample_weight = 0.0;

  ResourceVec capacity() const noexcept { return {static_cast<double>(vcpus), mem_gb}; }

  friend bool operator==(const ServerSpec&, const ServerSpec&) = default;
};

// Fleet-wide normalizers used by observations (largest instance in the catalog).
inline constexpr double kMaxVcpus = 96.0;
inline constexpr double kMaxMemGb = 384.0;

// The twelve AWS-derived instance types with their sampling weights.
std::span<const ServerSpec> builtin_server_types();

// Looks up a catalog entry by instance name; throws std::out_of_range.
const ServerSpec& server_type(std::string_view instance_name);

// Draws n servers i.i.d. from the catalog's categorical weights, then shuffles
// uniformly. The result order is the server index order.
std::vector<ServerSpec> sample_fleet(std::size_t n, Rng& rng);
std::vector<ServerSpec> sample_fleet(std::size_t n, Rng& rng, std::span<const ServerSpec> catalog);

std::string_view to_string(Generation g);

}  // namespace dgpg::env
