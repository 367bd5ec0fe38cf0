#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "dgpg/common/matrix.hpp"
#include "dgpg/common/rng.hpp"
#include "dgpg/env/job.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/env/server_spec.hpp"

namespace dgpg::env {

struct RunningJob {
  Job job;
  double remaining_work = 0.0;
};

struct ServerState {
  ServerSpec spec;
  std::vector<RunningJob> running;
  std::deque<Job> local_queue;
  // Jobs whose demand exceeds this host's total capacity in some dimension.
  // They can never be admitted, so they sit outside the FIFO and are counted
  // as queued.
  std::vector<Job> stranded;
  ResourceVec util{};
  ResourceVec queued_demand{};

  std::size_t queue_len() const noexcept { return local_queue.size() + stranded.size(); }
  double util_frac(std::size_t k) const noexcept { return util[k] / spec.capacity()[k]; }
};

struct ClusterState {
  int t = 0;
  int episode_len = 3000;
  int arrivals_end = 2000;
  std::vector<ServerState> servers;
  std::vector<Job> global_buffer;

  std::size_t n_servers() const noexcept { return servers.size(); }
  std::size_t total_queued() const noexcept;
  std::size_t total_running() const noexcept;
  // x_t: per-server running load, N x kResourceDims.
  Matrix util_matrix() const;
  // C^k: running load plus the demand of every queued and buffered job.
  ResourceVec workload_pressure() const noexcept;
  bool empty() const noexcept;
};

struct StepInfo {
  Matrix util_before;                  // x_t before this step's placements
  ResourceVec pressure{};              // workload pressure before placement
  std::vector<std::size_t> servers;    // per agent, chosen server
  std::vector<ResourceVec> demands;    // per agent, job demand vector
  std::size_t completed = 0;           // jobs finished during the step
};

struct StepResult {
  double reward = 0.0;
  StepInfo info;
};

// Reward weights.
inline constexpr double kQueueWeight = 1.0;
inline constexpr double kEnergyWeight = 20.0;

// r = -(w1 (Q_global + sum Q_k) / N + w2 (sum L_k / eta_k) / C_total).
double reward(const ClusterState& state);

// Discrete-time cluster simulator. The arrival stream is drawn from a stream
// owned by the instance and seeded by the scenario, so it does not depend on
// the placements.
class Simulator {
 public:
  explicit Simulator(const Scenario& scenario, int episode_len = 3000, int arrivals_end = 2000);

  const ClusterState& state() const noexcept { return state_; }
  std::span<const ServerSpec> fleet() const noexcept { return fleet_; }
  double base_rate() const noexcept { return base_rate_; }

  // One placement (server index) per job in the global buffer, in buffer order.
  // Throws std::invalid_argument on a count mismatch or an invalid index.
  StepResult step(std::span<const std::size_t> placements);

  bool done() const noexcept { return state_.t >= state_.episode_len; }

  // Appends a job to the global buffer (hand-built states in tests and probes).
  void inject(Job job);

  std::uint64_t jobs_generated() const noexcept { return next_job_id_; }
  std::uint64_t jobs_completed() const noexcept { return completed_; }

 private:
  void generate_arrivals(int t);
  Job draw_placeable_job(int t);
  void admit(ServerState& server);
  std::size_t progress(ServerState& server);

  std::vector<ServerSpec> fleet_;
  double base_rate_ = 0.0;
  Rng arrival_rng_;
  ClusterState state_;
  std::uint64_t next_job_id_ = 0;
  std::uint64_t completed_ = 0;
  ResourceVec fleet_max_{};
};

// Sorts servers by (vcpus, mem_gb) descending (stable in index) and chunks the
// order into k_clusters contiguous groups. Throws if N % k_clusters != 0.
std::vector<std::vector<std::size_t>> cluster_partition(std::span<const ServerSpec> fleet,
                                                        std::size_t k_clusters);

bool fits(const ResourceVec& load, const ResourceVec& capacity, const ResourceVec& demand) noexcept;
bool can_ever_fit(const ServerSpec& spec, const ResourceVec& demand) noexcept;

// Best-fit within a server group. Among servers where the job fits in every
// dimension under `loads`, the one with the highest mean fractional load wins;
// otherwise the least-loaded server able to hold the job at all (any server
// if none can). Ties go to the lowest server index.
std::size_t within_cluster_bestfit(std::span<const ResourceVec> loads,
                                   std::span<const ServerSpec> fleet,
                                   std::span<const std::size_t> cluster, const ResourceVec& demand);

// Same rule evaluated on the running utilization of `state`.
std::size_t within_cluster_bestfit(const ClusterState& state, std::span<const std::size_t> cluster,
                                   const Job& job);

// Running load plus queued demand per server.
std::vector<ResourceVec> committed_loads(const ClusterState& state);

// Maps per-agent actions to servers. With singleton clusters the action is the
// server index itself; otherwise it names a cluster and the job goes to the
// best-fit server of that cluster, with loads updated sequentially so that
// earlier agents' jobs are visible to later ones.
class ActionResolver {
 public:
  ActionResolver(std::span<const ServerSpec> fleet, const ScaleConfig& scale);

  std::size_t act_dim() const noexcept { return clusters_.size(); }
  std::span<const ServerSpec> fleet() const noexcept { return fleet_; }
  const std::vector<std::vector<std::size_t>>& clusters() const noexcept { return clusters_; }
  std::size_t cluster_of(std::size_t server) const { return cluster_of_.at(server); }

  std::vector<std::size_t> resolve(const ClusterState& state, std::span<const std::size_t> actions) const;

 private:
  std::vector<ServerSpec> fleet_;
  std::vector<std::vector<std::size_t>> clusters_;
  std::vector<std::size_t> cluster_of_;
  bool direct_ = true;
};

}  // namespace dgpg::env
