#include "dgpg/env/cluster.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dgpg/env/arrivals.hpp"

namespace dgpg::env {

namespace {
constexpr double kFitSlack = 1e-9;
constexpr double kDoneSlack = 1e-9;

double mean_fraction(const ResourceVec& load, const ResourceVec& cap) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < kResourceDims; ++k) s += load[k] / cap[k];
  return s / static_cast<double>(kResourceDims);
}
}  // namespace

std::size_t ClusterState::total_queued() const noexcept {
  std::size_t q = 0;
  for (const auto& s : servers) q += s.queue_len();
  return q;
}

std::size_t ClusterState::total_running() const noexcept {
  std::size_t r = 0;
  for (const auto& s : servers) r += s.running.size();
  return r;
}

Matrix ClusterState::util_matrix() const {
  Matrix x(servers.size(), kResourceDims);
  for (std::size_t i = 0; i < servers.size(); ++i)
    for (std::size_t k = 0; k < kResourceDims; ++k) x(i, k) = servers[i].util[k];
  return x;
}

ResourceVec ClusterState::workload_pressure() const noexcept {
  ResourceVec c{};
  for (const auto& s : servers)
    for (std::size_t k = 0; k < kResourceDims; ++k) c[k] += s.util[k] + s.queued_demand[k];
  for (const auto& s : servers)
    for (const auto& j : s.stranded) {
      const auto d = j.demand();
      for (std::size_t k = 0; k < kResourceDims; ++k) c[k] += d[k];
    }
  for (const auto& j : global_buffer) {
    const auto d = j.demand();
    for (std::size_t k = 0; k < kResourceDims; ++k) c[k] += d[k];
  }
  return c;
}

bool ClusterState::empty() const noexcept {
  return global_buffer.empty() && total_queued() == 0 && total_running() == 0;
}

double reward(const ClusterState& state) {
  const auto n = static_cast<double>(state.servers.size());
  if (n == 0.0) return 0.0;
  double queued = static_cast<double>(state.global_buffer.size());
  double energy = 0.0;
  double capacity = 0.0;
  for (const auto& s : state.servers) {
    queued += static_cast<double>(s.queue_len());
    energy += (s.util[kCpu] + s.util[kMem]) / s.spec.eta_cpu;
    capacity += s.spec.vcpus + s.spec.mem_gb;
  }
  return -(kQueueWeight * queued / n + kEnergyWeight * energy / capacity);
}

bool fits(const ResourceVec& load, const ResourceVec& capacity, const ResourceVec& demand) noexcept {
  for (std::size_t k = 0; k < kResourceDims; ++k)
    if (load[k] + demand[k] > capacity[k] + kFitSlack) return false;
  return true;
}

bool can_ever_fit(const ServerSpec& spec, const ResourceVec& demand) noexcept {
  return fits(ResourceVec{}, spec.capacity(), demand);
}

Simulator::Simulator(const Scenario& scenario, int episode_len, int arrivals_end)
    : fleet_(scenario.fleet), base_rate_(scenario.base_rate), arrival_rng_(derive_seed(scenario.seed, 1)) {
  if (fleet_.empty()) throw std::invalid_argument("Simulator: empty fleet");
  state_.episode_len = episode_len;
  state_.arrivals_end = arrivals_end;
  state_.servers.resize(fleet_.size());
  for (std::size_t i = 0; i < fleet_.size(); ++i) {
    state_.servers[i].spec = fleet_[i];
    for (std::size_t k = 0; k < kResourceDims; ++k)
      fleet_max_[k] = std::max(fleet_max_[k], fleet_[i].capacity()[k]);
  }
  if (0 < state_.arrivals_end && base_rate_ > 0.0) generate_arrivals(0);
}

Job Simulator::draw_placeable_job(int t) {
  for (;;) {
    Job j = sample_job(arrival_rng_, t);
    const auto d = j.demand();
    const bool placeable = std::any_of(fleet_.begin(), fleet_.end(),
                                       [&](const ServerSpec& s) { return can_ever_fit(s, d); });
    if (placeable) {
      j.id = next_job_id_++;
      return j;
    }
  }
}

void Simulator::generate_arrivals(int t) {
  const double noise = std::normal_distribution<double>(0.0, kArrivalNoiseStd)(arrival_rng_);
  const double rate = arrival_rate(t, base_rate_, noise);
  const int count = std::poisson_distribution<int>(rate)(arrival_rng_);
  for (int i = 0; i < count; ++i) state_.global_buffer.push_back(draw_placeable_job(t));
}

void Simulator::admit(ServerState& server) {
  const auto cap = server.spec.capacity();
  while (!server.local_queue.empty()) {
    const Job& head = server.local_queue.front();
    const auto d = head.demand();
    if (!fits(server.util, cap, d)) break;
    for (std::size_t k = 0; k < kResourceDims; ++k) {
      server.util[k] += d[k];
      server.queued_demand[k] -= d[k];
    }
    server.running.push_back({head, head.duration_base});
    server.local_queue.pop_front();
  }
  if (server.local_queue.empty()) server.queued_demand = {};
}

std::size_t Simulator::progress(ServerState& server) {
  std::size_t done = 0;
  const double rate = server.spec.eta_cpu;
  for (std::size_t i = 0; i < server.running.size();) {
    auto& rj = server.running[i];
    rj.remaining_work -= rate;
    if (rj.remaining_work <= kDoneSlack) {
      const auto d = rj.job.demand();
      for (std::size_t k = 0; k < kResourceDims; ++k) server.util[k] -= d[k];
      server.running[i] = server.running.back();
      server.running.pop_back();
      ++done;
    } else {
      ++i;
    }
  }
  if (server.running.empty()) server.util = {};
  return done;
}

void Simulator::inject(Job job) {
  job.id = next_job_id_++;
  state_.global_buffer.push_back(job);
}

StepResult Simulator::step(std::span<const std::size_t> placements) {
  auto& buffer = state_.global_buffer;
  if (placements.size() != buffer.size())
    throw std::invalid_argument("Simulator::step: expected " + std::to_string(buffer.size()) +
                                " placements, got " + std::to_string(placements.size()));
  for (std::size_t p : placements)
    if (p >= state_.servers.size())
      throw std::invalid_argument("Simulator::step: invalid server index " + std::to_string(p));

  StepResult result;
  result.info.util_before = state_.util_matrix();
  result.info.pressure = state_.workload_pressure();
  result.info.servers.assign(placements.begin(), placements.end());
  result.info.demands.reserve(buffer.size());

  for (std::size_t a = 0; a < buffer.size(); ++a) {
    auto& server = state_.servers[placements[a]];
    const auto d = buffer[a].demand();
    result.info.demands.push_back(d);
    if (can_ever_fit(server.spec, d)) {
      server.local_queue.push_back(buffer[a]);
      for (std::size_t k = 0; k < kResourceDims; ++k) server.queued_demand[k] += d[k];
    } else {
      server.stranded.push_back(buffer[a]);
    }
  }
  buffer.clear();

  for (auto& server : state_.servers) {
    admit(server);
    result.info.completed += progress(server);
  }
  completed_ += result.info.completed;

  state_.t += 1;
  if (state_.t < state_.arrivals_end && base_rate_ > 0.0) generate_arrivals(state_.t);

  result.reward = reward(state_);
  return result;
}

std::vector<std::vector<std::size_t>> cluster_partition(std::span<const ServerSpec> fleet,
                                                        std::size_t k_clusters) {
  if (k_clusters == 0 || fleet.size() % k_clusters != 0)
    throw std::invalid_argument("cluster_partition: N=" + std::to_string(fleet.size()) +
                                " is not divisible by K=" + std::to_string(k_clusters));
  std::vector<std::size_t> order(fleet.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (fleet[a].vcpus != fleet[b].vcpus) return fleet[a].vcpus > fleet[b].vcpus;
    return fleet[a].mem_gb > fleet[b].mem_gb;
  });
  const std::size_t per = fleet.size() / k_clusters;
  std::vector<std::vector<std::size_t>> groups(k_clusters);
  for (std::size_t c = 0; c < k_clusters; ++c)
    groups[c].assign(order.begin() + static_cast<std::ptrdiff_t>(c * per),
                     order.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
  return groups;
}

std::size_t within_cluster_bestfit(std::span<const ResourceVec> loads,
                                   std::span<const ServerSpec> fleet,
                                   std::span<const std::size_t> cluster, const ResourceVec& demand) {
  if (cluster.empty()) throw std::invalid_argument("within_cluster_bestfit: empty cluster");

  auto better = [](double score, std::size_t idx, double best_score, std::size_t best_idx, bool maximize) {
    if (score != best_score) return maximize ? score > best_score : score < best_score;
    return idx < best_idx;
  };

  std::size_t best = cluster.size();
  double best_score = 0.0;
  for (std::size_t pos = 0; pos < cluster.size(); ++pos) {
    const std::size_t i = cluster[pos];
    const auto cap = fleet[i].capacity();
    if (!fits(loads[i], cap, demand)) continue;
    const double score = mean_fraction(loads[i], cap);
    if (best == cluster.size() || better(score, i, best_score, cluster[best], true)) {
      best = pos;
      best_score = score;
    }
  }
  if (best != cluster.size()) return cluster[best];

  // Nothing fits right now: least-loaded server that can ever hold the job,
  // falling back to every server.
  for (int pass = 0; pass < 2 && best == cluster.size(); ++pass) {
    for (std::size_t pos = 0; pos < cluster.size(); ++pos) {
      const std::size_t i = cluster[pos];
      if (pass == 0 && !can_ever_fit(fleet[i], demand)) continue;
      const double score = mean_fraction(loads[i], fleet[i].capacity());
      if (best == cluster.size() || better(score, i, best_score, cluster[best], false)) {
        best = pos;
        best_score = score;
      }
    }
  }
  return cluster[best];
}

std::size_t within_cluster_bestfit(const ClusterState& state, std::span<const std::size_t> cluster,
                                   const Job& job) {
  std::vector<ResourceVec> loads(state.servers.size());
  std::vector<ServerSpec> fleet(state.servers.size());
  for (std::size_t i = 0; i < state.servers.size(); ++i) {
    loads[i] = state.servers[i].util;
    fleet[i] = state.servers[i].spec;
  }
  return within_cluster_bestfit(loads, fleet, cluster, job.demand());
}

std::vector<ResourceVec> committed_loads(const ClusterState& state) {
  std::vector<ResourceVec> loads(state.servers.size());
  for (std::size_t i = 0; i < state.servers.size(); ++i)
    for (std::size_t k = 0; k < kResourceDims; ++k)
      loads[i][k] = state.servers[i].util[k] + state.servers[i].queued_demand[k];
  return loads;
}

ActionResolver::ActionResolver(std::span<const ServerSpec> fleet, const ScaleConfig& scale)
    : fleet_(fleet.begin(), fleet.end()), direct_(!scale.cluster_actions()) {
  if (fleet_.size() != scale.n_servers)
    throw std::invalid_argument("ActionResolver: fleet size does not match scale " + scale.name);
  if (direct_) {
    clusters_.resize(fleet_.size());
    for (std::size_t i = 0; i < fleet_.size(); ++i) clusters_[i] = {i};
  } else {
    clusters_ = cluster_partition(fleet_, scale.n_clusters);
  }
  cluster_of_.resize(fleet_.size());
  for (std::size_t c = 0; c < clusters_.size(); ++c)
    for (std::size_t i : clusters_[c]) cluster_of_[i] = c;
}

std::vector<std::size_t> ActionResolver::resolve(const ClusterState& state,
                                                 std::span<const std::size_t> actions) const {
  if (actions.size() != state.global_buffer.size())
    throw std::invalid_argument("ActionResolver::resolve: one action per buffered job required");
  std::vector<std::size_t> servers(actions.size());
  for (std::size_t a = 0; a < actions.size(); ++a)
    if (actions[a] >= clusters_.size())
      throw std::invalid_argument("ActionResolver::resolve: action out of range");
  if (direct_) {
    std::copy(actions.begin(), actions.end(), servers.begin());
    return servers;
  }
  auto loads = committed_loads(state);
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const auto d = state.global_buffer[a].demand();
    const std::size_t j = within_cluster_bestfit(loads, fleet_, clusters_[actions[a]], d);
    for (std::size_t k = 0; k < kResourceDims; ++k) loads[j][k] += d[k];
    servers[a] = j;
  }
  return servers;
}

}  // namespace dgpg::env
