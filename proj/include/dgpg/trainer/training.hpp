#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dgpg/baselines/heuristics.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/guidance/guidance.hpp"
#include "dgpg/policy/policy.hpp"
#include "dgpg/trainer/config.hpp"
#include "dgpg/trainer/ppo.hpp"
#include "dgpg/trainer/rollout.hpp"

namespace dgpg::trainer {

struct EpisodeMetrics {
  int episode = 0;
  double mean_reward = 0.0;  // mean per-step reward over the episode's rollouts
  double alpha = 0.0;
  double entropy = 0.0;      // mean policy entropy at decision time
  double lr = 0.0;
  double entropy_coef = 0.0;
  double validation = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  UpdateStats update;
};

using MetricsLog = std::vector<EpisodeMetrics>;

struct TrainOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  std::function<void(const EpisodeMetrics&)> on_episode;
};

struct TrainResult {
  MetricsLog log;
  policy::PolicyParams final_params;
  policy::PolicyParams best_params;
  int best_episode = -1;
  double best_validation = -std::numeric_limits<double>::infinity();
};

// Fills ret and advantage for every agent of the batch: step-level GAE over
// the shared rewards, per-agent baseline, batch standardization, then the
// guidance mix with weight alpha. gnorm == nullptr means no guidance term.
void compute_batch_advantages(std::span<Rollout> batch, const TrainConfig& cfg, double alpha,
                              guidance::RunningNorm* gnorm);

// Policy shape for a (config, scale) pair. IPPO critics see only the local
// server block; the other modes use the full shared prefix.
policy::PolicyConfig policy_config(const TrainConfig& cfg, const env::ScaleConfig& scale);

TrainResult run_training(std::span<const env::Scenario> scenarios, const TrainConfig& cfg,
                         const env::ScaleConfig& scale, const TrainOptions& options);

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_scenario;
};

// Full episodes without guidance. Scenario i draws its actions from
// derive_seed(seed, i), so results do not depend on the thread count.
EvalResult evaluate(const policy::PolicyParams& params, std::span<const env::Scenario> scenarios,
                    const env::ScaleConfig& scale, bool deterministic, std::uint64_t seed = 0, int threads = 1);

EvalResult evaluate_heuristic(baselines::HeuristicKind kind, std::span<const env::Scenario> scenarios,
                              const env::ScaleConfig& scale, std::uint64_t seed = 0, int threads = 1);

}  // namespace dgpg::trainer
