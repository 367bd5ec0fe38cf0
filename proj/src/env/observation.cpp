#include "dgpg/env/observation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dgpg/common/stats.hpp"

namespace dgpg::env {

namespace {

constexpr double kHeavyMargin = 0.1;
constexpr double kOverloadFrac = 0.9;
constexpr double kClusterSizeNorm = 10.0;

double population_std(std::span<const double> xs, double mean) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

// min, q25, median, q75, max, mean, std
void distribution_stats(std::vector<double> xs, double* out) {
  std::sort(xs.begin(), xs.end());
  const double mean = mean_of(xs);
  out[0] = xs.front();
  out[1] = sorted_quantile(xs, 0.25);
  out[2] = sorted_quantile(xs, 0.5);
  out[3] = sorted_quantile(xs, 0.75);
  out[4] = xs.back();
  out[5] = mean;
  out[6] = population_std(xs, mean);
}

double clipped_queue(const ServerState& s) {
  return std::min(static_cast<double>(s.queue_len()), kQueueClip) / kQueueClip;
}

}  // namespace

std::size_t raw_obs_dim(std::size_t n_servers, std::size_t slots) {
  return kServerFeatures * n_servers + 2 * slots + kAgentSuffixDim;
}

std::size_t compressed_obs_dim(std::size_t n_clusters) {
  return kClusterFeatures * n_clusters + kTaskStatFeatures + kAgentSuffixDim;
}

ObservationBuilder::ObservationBuilder(std::span<const ServerSpec> fleet, const ScaleConfig& scale,
                                       std::size_t slots)
    : fleet_(fleet.begin(), fleet.end()), mode_(scale.obs_mode), slots_(slots) {
  if (fleet_.size() != scale.n_servers)
    throw std::invalid_argument("ObservationBuilder: fleet size does not match scale " + scale.name);
  if (slots_ == 0) throw std::invalid_argument("ObservationBuilder: slot count must be positive");
  if (mode_ == ObsMode::Raw) {
    local_prefix_dim_ = kServerFeatures * fleet_.size();
    prefix_dim_ = local_prefix_dim_ + 2 * slots_;
  } else {
    clusters_ = cluster_partition(fleet_, scale.n_clusters);
    local_prefix_dim_ = kClusterFeatures * clusters_.size();
    prefix_dim_ = local_prefix_dim_ + kTaskStatFeatures;
  }
}

void ObservationBuilder::server_block(const ClusterState& state, std::span<double> out) const {
  for (std::size_t i = 0; i < fleet_.size(); ++i) {
    const auto& s = state.servers[i];
    double* o = out.data() + i * kServerFeatures;
    o[0] = s.util[kCpu] / fleet_[i].vcpus;
    o[1] = s.util[kMem] / fleet_[i].mem_gb;
    o[2] = clipped_queue(s);
    o[3] = fleet_[i].eta_cpu;
    o[4] = fleet_[i].eta_mem;
    o[5] = fleet_[i].vcpus / static_cast<double>(kMaxVcpus);
    o[6] = fleet_[i].mem_gb / kMaxMemGb;
  }
}

void ObservationBuilder::cluster_block(const ClusterState& state, std::span<double> out) const {
  std::vector<double> cpu, mem, queue;
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    const auto& members = clusters_[c];
    double* o = out.data() + c * kClusterFeatures;
    cpu.clear();
    mem.clear();
    queue.clear();
    double used_cpu = 0.0, used_mem = 0.0, cap_cpu = 0.0, cap_mem = 0.0, eta = 0.0;
    double raw_queue = 0.0, nonempty = 0.0, overloaded = 0.0;
    double cpu_heavy = 0.0, mem_heavy = 0.0, balanced = 0.0;
    for (std::size_t i : members) {
      const auto& s = state.servers[i];
      const double fc = s.util[kCpu] / fleet_[i].vcpus;
      const double fm = s.util[kMem] / fleet_[i].mem_gb;
      cpu.push_back(fc);
      mem.push_back(fm);
      queue.push_back(clipped_queue(s));
      used_cpu += s.util[kCpu];
      used_mem += s.util[kMem];
      cap_cpu += fleet_[i].vcpus;
      cap_mem += fleet_[i].mem_gb;
      eta += fleet_[i].eta_cpu;
      raw_queue += static_cast<double>(s.queue_len());
      if (s.queue_len() > 0) nonempty += 1.0;
      if (s.queue_len() > 0 || std::max(fc, fm) > kOverloadFrac) overloaded += 1.0;
      if (fc - fm > kHeavyMargin) cpu_heavy += 1.0;
      else if (fm - fc > kHeavyMargin) mem_heavy += 1.0;
      else balanced += 1.0;
    }
    const double s_count = static_cast<double>(members.size());

    distribution_stats(cpu, o);
    distribution_stats(mem, o + 7);

    double corr = 0.0;
    const double mc = mean_of(cpu), mm = mean_of(mem);
    const double sc = population_std(cpu, mc), sm = population_std(mem, mm);
    if (sc > 1e-12 && sm > 1e-12) {
      double cov = 0.0;
      for (std::size_t j = 0; j < cpu.size(); ++j) cov += (cpu[j] - mc) * (mem[j] - mm);
      corr = std::clamp(cov / s_count / (sc * sm), -1.0, 1.0);
    }
    o[14] = (corr + 1.0) / 2.0;
    o[15] = cpu_heavy / s_count;
    o[16] = mem_heavy / s_count;
    o[17] = balanced / s_count;

    const double qmean = mean_of(queue);
    o[18] = std::min(raw_queue, kQueueClip * s_count) / (kQueueClip * s_count);
    o[19] = *std::max_element(queue.begin(), queue.end());
    o[20] = qmean;
    o[21] = population_std(queue, qmean);
    o[22] = nonempty / s_count;

    o[23] = std::clamp(1.0 - used_cpu / cap_cpu, 0.0, 1.0);
    o[24] = std::clamp(1.0 - used_mem / cap_mem, 0.0, 1.0);
    o[25] = eta / s_count;
    o[26] = s_count / kClusterSizeNorm;
    o[27] = overloaded / s_count;
  }
}

void ObservationBuilder::task_block(const ClusterState& state, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const auto& jobs = state.global_buffer;
  if (mode_ == ObsMode::Raw) {
    const std::size_t shown = std::min(jobs.size(), slots_);
    for (std::size_t a = 0; a < shown; ++a) {
      out[2 * a] = jobs[a].cpu_req / kCpuReqNorm;
      out[2 * a + 1] = jobs[a].mem_req / kMemReqNorm;
    }
    return;
  }
  if (jobs.empty()) return;
  std::vector<double> c, m;
  c.reserve(jobs.size());
  m.reserve(jobs.size());
  for (const auto& j : jobs) {
    c.push_back(j.cpu_req / kCpuReqNorm);
    m.push_back(j.mem_req / kMemReqNorm);
  }
  const double mc = mean_of(c), mm = mean_of(m);
  out[0] = mc;
  out[1] = population_std(c, mc);
  out[2] = *std::max_element(c.begin(), c.end());
  out[3] = mm;
  out[4] = population_std(m, mm);
  out[5] = *std::max_element(m.begin(), m.end());
}

void ObservationBuilder::build_prefix(const ClusterState& state, std::span<double> out) const {
  if (out.size() != prefix_dim_) throw std::invalid_argument("build_prefix: output size mismatch");
  if (state.servers.size() != fleet_.size())
    throw std::invalid_argument("build_prefix: state does not match fleet");
  auto head = out.first(local_prefix_dim_);
  if (mode_ == ObsMode::Raw) server_block(state, head);
  else cluster_block(state, head);
  task_block(state, out.subspan(local_prefix_dim_));
}

void ObservationBuilder::build_suffix(const ClusterState& state, const Job& job, std::size_t agent_index,
                                      std::span<double> out) const {
  if (out.size() != kAgentSuffixDim) throw std::invalid_argument("build_suffix: output size mismatch");
  out[0] = job.cpu_req / kCpuReqNorm;
  out[1] = job.mem_req / kMemReqNorm;
  out[2] = std::clamp(static_cast<double>(state.t) / state.episode_len, 0.0, 1.0);
  out[3] = static_cast<double>(std::min(agent_index, slots_)) / static_cast<double>(slots_);
}

std::vector<double> ObservationBuilder::build(const ClusterState& state, const Job& job,
                                              std::size_t agent_index) const {
  std::vector<double> obs(obs_dim());
  std::span<double> s(obs);
  build_prefix(state, s.first(prefix_dim_));
  build_suffix(state, job, agent_index, s.subspan(prefix_dim_));
  return obs;
}

std::vector<double> build_observation(const ClusterState& state, std::span<const ServerSpec> fleet,
                                      const ScaleConfig& scale, const Job& agent_job,
                                      std::size_t agent_index, std::size_t slots, ObsMode mode) {
  if (mode != scale.obs_mode)
    throw std::invalid_argument("build_observation: mode does not match scale " + scale.name);
  return ObservationBuilder(fleet, scale, slots).build(state, agent_job, agent_index);
}

}  // namespace dgpg::env
