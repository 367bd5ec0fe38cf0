#include "dgpg/baselines/heuristics.hpp"

#include <numeric>
#include <stdexcept>

namespace dgpg::baselines {

std::size_t bestfit_place(std::span<const env::ResourceVec> loads, std::span<const env::ServerSpec> fleet,
                          const env::Job& job) {
  if (fleet.empty()) throw std::invalid_argument("bestfit_place: empty fleet");
  std::vector<std::size_t> all(fleet.size());
  std::iota(all.begin(), all.end(), 0);
  return env::within_cluster_bestfit(loads, fleet, all, job.demand());
}

std::size_t bestfit_place(const env::ClusterState& state, const env::Job& job) {
  const auto loads = env::committed_loads(state);
  std::vector<env::ServerSpec> fleet;
  fleet.reserve(state.servers.size());
  for (const auto& s : state.servers) fleet.push_back(s.spec);
  return bestfit_place(loads, fleet, job);
}

std::size_t random_place(std::size_t act_dim, Rng& rng) {
  if (act_dim == 0) throw std::invalid_argument("random_place: empty action space");
  return std::uniform_int_distribution<std::size_t>(0, act_dim - 1)(rng);
}

std::vector<std::size_t> HeuristicPolicy::place_step(const env::ClusterState& state,
                                                     const env::ActionResolver& resolver) {
  const auto& jobs = state.global_buffer;
  if (kind_ == HeuristicKind::Random) {
    std::vector<std::size_t> actions(jobs.size());
    for (auto& a : actions) a = random_place(resolver.act_dim(), rng_);
    return resolver.resolve(state, actions);
  }
  std::vector<std::size_t> out(jobs.size());
  if (jobs.empty()) return out;
  auto loads = env::committed_loads(state);
  const auto fleet = resolver.fleet();
  for (std::size_t a = 0; a < jobs.size(); ++a) {
    const std::size_t j = bestfit_place(loads, fleet, jobs[a]);
    const auto d = jobs[a].demand();
    for (std::size_t k = 0; k < env::kResourceDims; ++k) loads[j][k] += d[k];
    out[a] = j;
  }
  return out;
}

}  // namespace dgpg::baselines
