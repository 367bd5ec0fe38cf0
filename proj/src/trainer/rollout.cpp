#include "dgpg/trainer/rollout.hpp"

#include <cmath>
#include <stdexcept>

#include "dgpg/guidance/guidance.hpp"

namespace dgpg::trainer {

double Rollout::mean_reward() const noexcept {
  if (rewards.empty()) return 0.0;
  double s = 0.0;
  for (double r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

ObsLayout obs_layout(const env::ScaleConfig& scale) {
  ObsLayout l;
  l.slots = static_cast<std::size_t>(env::concurrent_slots(scale));
  if (scale.obs_mode == env::ObsMode::Raw) {
    l.local_prefix_dim = env::kServerFeatures * scale.n_servers;
    l.prefix_dim = l.local_prefix_dim + 2 * l.slots;
  } else {
    l.local_prefix_dim = env::kClusterFeatures * scale.n_clusters;
    l.prefix_dim = l.local_prefix_dim + env::kTaskStatFeatures;
  }
  return l;
}

EpisodeSummary run_policy_episode(const env::Scenario& scenario, const env::ScaleConfig& scale,
                                  const policy::PolicyParams& params, Rng& action_rng,
                                  const EpisodeOptions& options, Rollout* record) {
  const ObsLayout layout = obs_layout(scale);
  if (params.obs_dim != layout.obs_dim() || params.prefix_dim != layout.prefix_dim)
    throw std::invalid_argument("policy expects observations of size " + std::to_string(params.obs_dim) +
                                ", scale " + scale.name + " produces " + std::to_string(layout.obs_dim()));
  if (params.act_dim != scale.act_dim())
    throw std::invalid_argument("policy action count does not match scale " + scale.name);

  env::Simulator sim(scenario, scale.episode_len, scale.arrivals_end);
  const env::ActionResolver resolver(scenario.fleet, scale);
  const env::ObservationBuilder builder(scenario.fleet, scale, layout.slots);
  const Matrix capacity = guidance::capacity_matrix(scenario.fleet);

  const auto& actor = params.actor;
  const auto& critic = params.critic;
  std::vector<double> prefix(layout.prefix_dim);
  std::vector<double> z_actor(actor.spec().first_dim()), z_critic(critic.spec().first_dim());
  std::vector<double> probs(params.act_dim);
  std::array<double, env::kAgentSuffixDim> suffix{};
  policy::Workspace ws_a, ws_c;
  std::vector<std::size_t> actions;

  if (record) {
    *record = Rollout{};
    record->prefix_dim = layout.prefix_dim;
    record->rewards.reserve(static_cast<std::size_t>(scale.episode_len));
    record->step_values.reserve(static_cast<std::size_t>(scale.episode_len));
  }

  EpisodeSummary summary;
  double reward_sum = 0.0;
  double entropy_sum = 0.0;
  int steps = 0;
  const double vs = options.value_scale.std, vm = options.value_scale.mean;

  while (!sim.done()) {
    const auto& state = sim.state();
    const auto& jobs = state.global_buffer;
    builder.build_prefix(state, prefix);
    actions.resize(jobs.size());

    double step_value = 0.0;
    const std::uint32_t first = record ? static_cast<std::uint32_t>(record->agents.size()) : 0;
    if (!jobs.empty()) actor.preact_prefix(prefix.data(), z_actor.data());
    if (record) critic.preact_prefix(prefix.data(), z_critic.data());

    for (std::size_t a = 0; a < jobs.size(); ++a) {
      builder.build_suffix(state, jobs[a], a, suffix);
      actor.forward_suffix(z_actor.data(), suffix.data(), ws_a);
      policy::softmax(ws_a.out, probs);
      const std::size_t act = options.mode == ActionMode::Greedy ? policy::argmax(probs)
                                                                : policy::sample_categorical(probs, action_rng);
      actions[a] = act;
      const double h = policy::entropy_of(probs);
      entropy_sum += h;
      if (record) {
        critic.forward_suffix(z_critic.data(), suffix.data(), ws_c);
        AgentRecord rec;
        rec.suffix = suffix;
        rec.group = static_cast<std::uint32_t>(record->groups.size());
        rec.action = static_cast<std::uint32_t>(act);
        rec.log_prob = std::log(probs[act]);
        rec.value = ws_c.out[0] * vs + vm;
        step_value += rec.value;
        record->agents.push_back(rec);
        record->entropy_sum += h;
      }
    }
    summary.decisions += jobs.size();

    if (record) {
      if (!jobs.empty()) {
        step_value /= static_cast<double>(jobs.size());
        record->groups.push_back({state.t, first, static_cast<std::uint32_t>(jobs.size())});
        record->prefixes.insert(record->prefixes.end(), prefix.begin(), prefix.end());
      } else {
        // Nobody acts: critic on the shared state with a neutral agent part.
        suffix = {0.0, 0.0, static_cast<double>(state.t) / state.episode_len, 0.0};
        critic.forward_suffix(z_critic.data(), suffix.data(), ws_c);
        step_value = ws_c.out[0] * vs + vm;
      }
      record->step_values.push_back(step_value);
    }

    const auto servers = resolver.resolve(state, actions);
    const auto result = sim.step(servers);
    reward_sum += result.reward;
    ++steps;
    if (record) {
      record->rewards.push_back(result.reward);
      if (options.guidance && !servers.empty()) {
        const auto g = guidance::step_coefficients(result.info, capacity, options.basis);
        for (std::size_t a = 0; a < g.size(); ++a) record->agents[first + a].guidance = g[a];
      }
    }
  }
  summary.mean_reward = steps ? reward_sum / steps : 0.0;
  summary.mean_entropy = summary.decisions ? entropy_sum / static_cast<double>(summary.decisions) : 0.0;
  return summary;
}

EpisodeSummary run_heuristic_episode(const env::Scenario& scenario, const env::ScaleConfig& scale,
                                     baselines::HeuristicPolicy& heuristic) {
  env::Simulator sim(scenario, scale.episode_len, scale.arrivals_end);
  const env::ActionResolver resolver(scenario.fleet, scale);
  EpisodeSummary summary;
  double reward_sum = 0.0;
  int steps = 0;
  while (!sim.done()) {
    const auto servers = heuristic.place_step(sim.state(), resolver);
    summary.decisions += servers.size();
    reward_sum += sim.step(servers).reward;
    ++steps;
  }
  summary.mean_reward = steps ? reward_sum / steps : 0.0;
  return summary;
}

}  // namespace dgpg::trainer
