#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dgpg/common/rng.hpp"
#include "dgpg/env/cluster.hpp"

namespace dgpg::baselines {

enum class HeuristicKind { BestFit, Random };

// Best-fit over the whole fleet for one job, on running load plus queued demand.
std::size_t bestfit_place(const env::ClusterState& state, const env::Job& job);
// Same rule on explicit loads (used for sequential placement within a step).
std::size_t bestfit_place(std::span<const env::ResourceVec> loads, std::span<const env::ServerSpec> fleet,
                          const env::Job& job);

// Uniform over [0, act_dim).
std::size_t random_place(std::size_t act_dim, Rng& rng);

class HeuristicPolicy {
 public:
  HeuristicPolicy(HeuristicKind kind, std::uint64_t seed) : kind_(kind), rng_(seed) {}

  HeuristicKind kind() const noexcept { return kind_; }

  // Servers for every buffered job of the current step. Best-fit places jobs
  // in buffer order, each seeing the earlier ones; random draws an action per
  // job and lets the resolver map clusters to servers.
  std::vector<std::size_t> place_step(const env::ClusterState& state, const env::ActionResolver& resolver);

 private:
  HeuristicKind kind_;
  Rng rng_;
};

}  // namespace dgpg::baselines
