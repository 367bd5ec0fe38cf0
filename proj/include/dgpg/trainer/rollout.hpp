#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dgpg/baselines/heuristics.hpp"
#include "dgpg/common/rng.hpp"
#include "dgpg/env/observation.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/guidance/guidance.hpp"
#include "dgpg/policy/policy.hpp"

namespace dgpg::trainer {

// One placement decision.
struct AgentRecord {
  std::array<double, env::kAgentSuffixDim> suffix{};
  std::uint32_t group = 0;
  std::uint32_t action = 0;
  double log_prob = 0.0;
  double value = 0.0;     // critic estimate at decision time, reward units
  double guidance = 0.0;  // raw guidance coefficient, filled for DG-PG rollouts
  double advantage = 0.0;
  double ret = 0.0;
};

// A timestep in which at least one agent acted; the agents share one prefix.
struct StepGroup {
  int t = 0;
  std::uint32_t first_agent = 0;
  std::uint32_t n_agents = 0;
};

struct Rollout {
  std::size_t scenario_index = 0;
  std::size_t prefix_dim = 0;
  std::vector<double> rewards;      // one per timestep
  std::vector<double> step_values;  // V_t, reward units
  std::vector<StepGroup> groups;
  std::vector<double> prefixes;     // groups.size() x prefix_dim
  std::vector<AgentRecord> agents;
  double entropy_sum = 0.0;

  const double* prefix(std::size_t g) const noexcept { return prefixes.data() + g * prefix_dim; }
  double mean_reward() const noexcept;
};

// Affine map from critic outputs to reward units.
struct ValueScale {
  double mean = 0.0;
  double std = 1.0;
};

enum class ActionMode { Sample, Greedy };

struct EpisodeOptions {
  ActionMode mode = ActionMode::Sample;
  bool guidance = false;  // compute raw guidance coefficients
  guidance::LoadBasis basis = guidance::LoadBasis::Pressure;
  ValueScale value_scale;
};

struct EpisodeSummary {
  double mean_reward = 0.0;
  std::size_t decisions = 0;
  double mean_entropy = 0.0;
};

// Observation layout for a scale: (prefix, critic prefix) lengths.
struct ObsLayout {
  std::size_t slots = 0;
  std::size_t prefix_dim = 0;
  std::size_t local_prefix_dim = 0;
  std::size_t obs_dim() const noexcept { return prefix_dim + env::kAgentSuffixDim; }
};
ObsLayout obs_layout(const env::ScaleConfig& scale);

// Runs one full episode of `scenario` under the policy. When `record` is
// given it receives everything the update needs.
EpisodeSummary run_policy_episode(const env::Scenario& scenario, const env::ScaleConfig& scale,
                                  const policy::PolicyParams& params, Rng& action_rng,
                                  const EpisodeOptions& options, Rollout* record = nullptr);

EpisodeSummary run_heuristic_episode(const env::Scenario& scenario, const env::ScaleConfig& scale,
                                     baselines::HeuristicPolicy& heuristic);

}  // namespace dgpg::trainer
