#pragma once

#include <span>
#include <vector>

#include "dgpg/env/cluster.hpp"
#include "dgpg/env/scale.hpp"

namespace dgpg::env {

inline constexpr std::size_t kServerFeatures = 7;
inline constexpr std::size_t kClusterFeatures = 28;
inline constexpr std::size_t kTaskStatFeatures = 6;
// own job (cpu, mem), t / episode_len, agent index / slots
inline constexpr std::size_t kAgentSuffixDim = 4;
inline constexpr double kQueueClip = 50.0;
inline constexpr double kCpuReqNorm = 20.0;
inline constexpr double kMemReqNorm = 128.0;

std::size_t raw_obs_dim(std::size_t n_servers, std::size_t slots);
std::size_t compressed_obs_dim(std::size_t n_clusters);

// Builds agent observations. An observation is laid out as
//   [shared prefix | own cpu, own mem, t/T, agent/slots]
// where the prefix (server or cluster block followed by the concurrent-task
// block) is identical for every agent acting in the same step. The trainer
// stores one prefix per step and only the 4-dim suffix per agent.
class ObservationBuilder {
 public:
  ObservationBuilder(std::span<const ServerSpec> fleet, const ScaleConfig& scale, std::size_t slots);

  ObsMode mode() const noexcept { return mode_; }
  std::size_t slots() const noexcept { return slots_; }
  std::size_t prefix_dim() const noexcept { return prefix_dim_; }
  // Prefix length without the concurrent-task block (agent-local critic input).
  std::size_t local_prefix_dim() const noexcept { return local_prefix_dim_; }
  std::size_t obs_dim() const noexcept { return prefix_dim_ + kAgentSuffixDim; }

  void build_prefix(const ClusterState& state, std::span<double> out) const;
  void build_suffix(const ClusterState& state, const Job& job, std::size_t agent_index,
                    std::span<double> out) const;

  std::vector<double> build(const ClusterState& state, const Job& job, std::size_t agent_index) const;

 private:
  void server_block(const ClusterState& state, std::span<double> out) const;
  void cluster_block(const ClusterState& state, std::span<double> out) const;
  void task_block(const ClusterState& state, std::span<double> out) const;

  std::vector<ServerSpec> fleet_;
  std::vector<std::vector<std::size_t>> clusters_;
  ObsMode mode_;
  std::size_t slots_;
  std::size_t prefix_dim_;
  std::size_t local_prefix_dim_;
};

// Standalone entry point: full observation vector for one agent. Throws
// std::invalid_argument if `mode` does not match the scale's observation mode.
std::vector<double> build_observation(const ClusterState& state, std::span<const ServerSpec> fleet,
                                      const ScaleConfig& scale, const Job& agent_job,
                                      std::size_t agent_index, std::size_t slots, ObsMode mode);

}  // namespace dgpg::env
