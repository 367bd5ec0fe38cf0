#include "dgpg/trainer/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "dgpg/common/parallel.hpp"
#include "dgpg/common/stats.hpp"
#include "dgpg/guidance/guidance.hpp"
#include "dgpg/trainer/advantage.hpp"

namespace dgpg::trainer {

namespace {

// Seed streams, one per purpose.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kEvalStream = 3;

std::uint64_t rollout_stream(int episode, int rollout, int purpose) {
  return (static_cast<std::uint64_t>(episode) << 32) ^ (static_cast<std::uint64_t>(rollout) << 4) ^
         static_cast<std::uint64_t>(purpose + 16);
}

EvalResult summarize(std::vector<double> per) {
  EvalResult r;
  r.mean = mean_of(per);
  r.std = per.size() > 1 ? stddev_of(per) : 0.0;
  r.per_scenario = std::move(per);
  return r;
}

}  // namespace

void compute_batch_advantages(std::span<Rollout> batch, const TrainConfig& cfg, double alpha,
                              guidance::RunningNorm* gnorm) {
  // Step-level GAE over the shared reward stream, then moved to each agent's
  // own value estimate.
  std::vector<double> adv;
  for (auto& ro : batch) {
    const std::size_t T = ro.rewards.size();
    std::unique_ptr<bool[]> done_flags(new bool[T]());
    if (T) done_flags[T - 1] = true;
    const std::span<const bool> dones(done_flags.get(), T);
    const GaeResult gae = compute_gae(ro.rewards, ro.step_values, dones, 0.0, cfg.gamma, cfg.gae_lambda);
    for (auto& ag : ro.agents) {
      const int t = ro.groups[ag.group].t;
      const double step_ret = gae.advantages[t] + ro.step_values[t];
      ag.ret = step_ret;
      ag.advantage = step_ret - ag.value;
      adv.push_back(ag.advantage);
    }
  }
  if (adv.empty()) return;
  standardize(adv);
  std::size_t i = 0;
  for (auto& ro : batch)
    for (auto& ag : ro.agents) {
      const double g = gnorm ? gnorm->normalize(ag.guidance) : 0.0;
      ag.advantage = augment_advantage(adv[i++], g, alpha);
    }
}

policy::PolicyConfig policy_config(const TrainConfig& cfg, const env::ScaleConfig& scale) {
  const ObsLayout layout = obs_layout(scale);
  policy::PolicyConfig pc;
  pc.arch = cfg.arch;
  pc.prefix_dim = layout.prefix_dim;
  pc.critic_prefix_dim = cfg.algorithm == Algorithm::IPPO ? layout.local_prefix_dim : layout.prefix_dim;
  pc.suffix_dim = env::kAgentSuffixDim;
  pc.act_dim = scale.act_dim();
  pc.hidden = cfg.hidden;
  pc.id_scale = layout.slots;
  return pc;
}

TrainResult run_training(std::span<const env::Scenario> scenarios, const TrainConfig& cfg,
                         const env::ScaleConfig& scale, const TrainOptions& options) {
  if (scenarios.empty()) throw std::invalid_argument("run_training: no training scenarios");
  if (cfg.episodes <= 0 || cfg.rollouts_per_episode <= 0)
    throw std::invalid_argument("run_training: episodes and rollouts must be positive");
  for (const auto& s : scenarios)
    if (s.fleet.size() != scale.n_servers)
      throw std::invalid_argument("run_training: scenario fleet size does not match scale " + scale.name);

  TrainResult result;
  result.final_params = policy::make_policy(policy_config(cfg, scale), derive_seed(options.seed, kInitStream));
  auto& params = result.final_params;
  Optimizers opt(params);
  guidance::RunningNorm gnorm;
  ValueScale value_scale;
  const bool use_guidance = cfg.algorithm == Algorithm::DGPG;
  const int workers = std::max(1, std::min(options.threads, cfg.parallel_envs));

  const std::size_t n_val = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, cfg.eval_scenarios)),
                                                  scenarios.size());
  const auto validation = scenarios.subspan(scenarios.size() - n_val);
  const std::uint64_t eval_seed = derive_seed(options.seed, kEvalStream);

  std::vector<Rollout> batch(static_cast<std::size_t>(cfg.rollouts_per_episode));
  std::vector<EpisodeSummary> summaries(batch.size());

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    const double progress = cfg.episodes > 1 ? static_cast<double>(ep) / (cfg.episodes - 1) : 1.0;
    EpisodeMetrics m;
    m.episode = ep;
    m.alpha = alpha_at(cfg, progress);
    m.lr = learning_rate_at(cfg, progress);
    m.entropy_coef = entropy_coef_at(cfg, progress);

    EpisodeOptions eo;
    eo.mode = ActionMode::Sample;
    eo.guidance = use_guidance;
    eo.basis = cfg.guidance_basis;
    eo.value_scale = value_scale;
    const policy::PolicyParams& snapshot = params;
    parallel_for(batch.size(), workers, [&](std::size_t r) {
      Rng pick(derive_seed(options.seed, rollout_stream(ep, static_cast<int>(r), 0)));
      const std::size_t si = static_cast<std::size_t>(pick() % scenarios.size());
      Rng act(derive_seed(options.seed, rollout_stream(ep, static_cast<int>(r), 1)));
      summaries[r] = run_policy_episode(scenarios[si], scale, snapshot, act, eo, &batch[r]);
      batch[r].scenario_index = si;
    });

    double reward_sum = 0.0, entropy_sum = 0.0;
    std::size_t decisions = 0;
    for (const auto& ro : batch) {
      reward_sum += ro.mean_reward();
      entropy_sum += ro.entropy_sum;
      decisions += ro.agents.size();
    }
    m.mean_reward = reward_sum / static_cast<double>(batch.size());
    m.entropy = decisions ? entropy_sum / static_cast<double>(decisions) : 0.0;

    if (decisions > 0) {
      compute_batch_advantages(batch, cfg, m.alpha, use_guidance ? &gnorm : nullptr);

      UpdateContext ctx;
      ctx.lr = m.lr;
      ctx.entropy_coef = m.entropy_coef;
      ctx.shuffle_seed = derive_seed(options.seed, rollout_stream(ep, 0, kShuffleStream));
      try {
        m.update = ppo_update(params, opt, batch, cfg, ctx);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at episode " + std::to_string(ep));
      }

      if (cfg.return_normalization) {
        MomentAccumulator acc;
        for (const auto& ro : batch)
          for (const auto& ag : ro.agents) acc.add(ag.ret);
        value_scale.mean = acc.mean;
        value_scale.std = std::sqrt(acc.m2 / static_cast<double>(std::max<std::size_t>(1, acc.count))) + 1e-8;
      }
    }

    if (cfg.eval_every > 0 && n_val > 0 && ((ep + 1) % cfg.eval_every == 0 || ep + 1 == cfg.episodes)) {
      m.validation = evaluate(params, validation, scale, false, eval_seed, options.threads).mean;
      if (m.validation > result.best_validation) {
        result.best_validation = m.validation;
        result.best_episode = ep;
        result.best_params = params;
      }
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(m);
    if (options.on_episode) options.on_episode(m);
  }
  if (result.best_episode < 0) {
    result.best_params = params;
    result.best_episode = cfg.episodes - 1;
  }
  return result;
}

EvalResult evaluate(const policy::PolicyParams& params, std::span<const env::Scenario> scenarios,
                    const env::ScaleConfig& scale, bool deterministic, std::uint64_t seed, int threads) {
  if (scenarios.empty()) throw std::invalid_argument("evaluate: empty scenario set");
  const ObsLayout layout = obs_layout(scale);
  if (params.obs_dim != layout.obs_dim())
    throw std::invalid_argument("evaluate: checkpoint observation size " + std::to_string(params.obs_dim) +
                                " does not match scale " + scale.name + " (" +
                                std::to_string(layout.obs_dim()) + ")");
  std::vector<double> per(scenarios.size());
  EpisodeOptions eo;
  eo.mode = deterministic ? ActionMode::Greedy : ActionMode::Sample;
  parallel_for(scenarios.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    per[i] = run_policy_episode(scenarios[i], scale, params, rng, eo).mean_reward;
  });
  return summarize(std::move(per));
}

EvalResult evaluate_heuristic(baselines::HeuristicKind kind, std::span<const env::Scenario> scenarios,
                              const env::ScaleConfig& scale, std::uint64_t seed, int threads) {
  if (scenarios.empty()) throw std::invalid_argument("evaluate: empty scenario set");
  std::vector<double> per(scenarios.size());
  parallel_for(scenarios.size(), threads, [&](std::size_t i) {
    baselines::HeuristicPolicy h(kind, derive_seed(seed, i));
    per[i] = run_heuristic_episode(scenarios[i], scale, h).mean_reward;
  });
  return summarize(std::move(per));
}

}  // namespace dgpg::trainer
