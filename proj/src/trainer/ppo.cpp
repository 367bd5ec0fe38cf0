#include "dgpg/trainer/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace dgpg::trainer {

namespace {

struct GroupRef {
  std::uint32_t rollout;
  std::uint32_t group;
};

using Minibatch = std::vector<GroupRef>;

// Shuffled timestep groups, cut whenever the agent count reaches the target
// size. Agents of one timestep always land in the same minibatch so their
// shared prefix is pushed through the first layer once.
std::vector<Minibatch> make_minibatches(std::vector<GroupRef>& groups, std::span<const Rollout> batch,
                                        std::size_t target, Rng& rng) {
  std::shuffle(groups.begin(), groups.end(), rng);
  std::vector<Minibatch> out;
  Minibatch cur;
  std::size_t count = 0;
  for (const auto& g : groups) {
    cur.push_back(g);
    count += batch[g.rollout].groups[g.group].n_agents;
    if (count >= target) {
      out.push_back(std::move(cur));
      cur.clear();
      count = 0;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t agent_count(const Minibatch& mb, std::span<const Rollout> batch) {
  std::size_t n = 0;
  for (const auto& g : mb) n += batch[g.rollout].groups[g.group].n_agents;
  return n;
}

struct Scratch {
  std::vector<double> z, dz, dz_sum, probs, d_logits, grad;
  policy::Workspace ws;
};

struct ActorTally {
  double kl = 0.0, clipped = 0.0, entropy = 0.0;
  std::size_t n = 0;
};

void actor_step(policy::PolicyParams& params, policy::Adam& adam, const Minibatch& mb,
                std::span<const Rollout> batch, const TrainConfig& cfg, const UpdateContext& ctx, Scratch& s,
                ActorTally& tally) {
  auto& net = params.actor;
  const std::size_t n_mb = agent_count(mb, batch);
  if (n_mb == 0) return;
  const double scale = 1.0 / static_cast<double>(n_mb);
  s.grad.assign(net.size(), 0.0);
  s.z.resize(net.spec().first_dim());
  s.dz.resize(s.z.size());
  s.dz_sum.resize(s.z.size());
  s.probs.resize(params.act_dim);
  s.d_logits.resize(params.act_dim);
  double loss = 0.0;

  for (const auto& ref : mb) {
    const Rollout& ro = batch[ref.rollout];
    const StepGroup& grp = ro.groups[ref.group];
    const double* prefix = ro.prefix(ref.group);
    net.preact_prefix(prefix, s.z.data());
    std::fill(s.dz_sum.begin(), s.dz_sum.end(), 0.0);
    for (std::uint32_t k = 0; k < grp.n_agents; ++k) {
      const AgentRecord& ag = ro.agents[grp.first_agent + k];
      net.forward_suffix(s.z.data(), ag.suffix.data(), s.ws);
      policy::softmax(s.ws.out, s.probs);
      const double lp = std::log(s.probs[ag.action]);
      const double ratio = std::exp(lp - ag.log_prob);
      const double h = policy::entropy_of(s.probs);
      const double A = ag.advantage;
      loss -= clipped_surrogate(ratio, A, cfg.clip_eps) + ctx.entropy_coef * h;
      tally.kl += ag.log_prob - lp;
      tally.entropy += h;
      ++tally.n;

      // d(-surrogate - c H)/d logits.
      const bool clipped = surrogate_clipped(ratio, A, cfg.clip_eps);
      if (clipped) tally.clipped += 1.0;
      const double coef = clipped ? 0.0 : ratio * A;
      for (std::size_t j = 0; j < params.act_dim; ++j) {
        const double onehot = j == ag.action ? 1.0 : 0.0;
        const double d_lp = onehot - s.probs[j];
        const double d_h = s.probs[j] > 0.0 ? -s.probs[j] * (std::log(s.probs[j]) + h) : 0.0;
        s.d_logits[j] = -(coef * d_lp + ctx.entropy_coef * d_h) * scale;
      }
      net.backward_suffix(ag.suffix.data(), s.ws, s.d_logits.data(), s.grad.data(), s.dz.data());
      for (std::size_t j = 0; j < s.dz.size(); ++j) s.dz_sum[j] += s.dz[j];
    }
    net.backward_prefix(prefix, s.dz_sum.data(), s.grad.data());
  }
  if (!std::isfinite(loss)) throw TrainingError("non-finite actor loss");
  for (double g : s.grad)
    if (!std::isfinite(g)) throw TrainingError("non-finite actor gradient");
  policy::clip_grad_norm(s.grad, cfg.grad_clip_norm);
  adam.step(net.params(), s.grad, ctx.lr);
}

double critic_step(policy::PolicyParams& params, policy::Adam& adam, const Minibatch& mb,
                   std::span<const Rollout> batch, const TrainConfig& cfg, const UpdateContext& ctx, Scratch& s) {
  auto& net = params.critic;
  const std::size_t n_mb = agent_count(mb, batch);
  if (n_mb == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(n_mb);

  double t_mean = 0.0, t_std = 1.0;
  if (cfg.return_normalization) {
    double sum = 0.0, sq = 0.0;
    for (const auto& ref : mb) {
      const Rollout& ro = batch[ref.rollout];
      const StepGroup& grp = ro.groups[ref.group];
      for (std::uint32_t k = 0; k < grp.n_agents; ++k) sum += ro.agents[grp.first_agent + k].ret;
    }
    t_mean = sum * scale;
    for (const auto& ref : mb) {
      const Rollout& ro = batch[ref.rollout];
      const StepGroup& grp = ro.groups[ref.group];
      for (std::uint32_t k = 0; k < grp.n_agents; ++k) {
        const double d = ro.agents[grp.first_agent + k].ret - t_mean;
        sq += d * d;
      }
    }
    t_std = std::sqrt(sq * scale) + 1e-8;
  }

  s.grad.assign(net.size(), 0.0);
  s.z.resize(net.spec().first_dim());
  s.dz.resize(s.z.size());
  s.dz_sum.resize(s.z.size());
  double d_out[1];
  double loss = 0.0;
  for (const auto& ref : mb) {
    const Rollout& ro = batch[ref.rollout];
    const StepGroup& grp = ro.groups[ref.group];
    const double* prefix = ro.prefix(ref.group);
    net.preact_prefix(prefix, s.z.data());
    std::fill(s.dz_sum.begin(), s.dz_sum.end(), 0.0);
    for (std::uint32_t k = 0; k < grp.n_agents; ++k) {
      const AgentRecord& ag = ro.agents[grp.first_agent + k];
      net.forward_suffix(s.z.data(), ag.suffix.data(), s.ws);
      const double err = s.ws.out[0] - (ag.ret - t_mean) / t_std;
      loss += policy::huber_loss(err, cfg.huber_delta);
      d_out[0] = policy::huber_grad(err, cfg.huber_delta) * scale;
      net.backward_suffix(ag.suffix.data(), s.ws, d_out, s.grad.data(), s.dz.data());
      for (std::size_t j = 0; j < s.dz.size(); ++j) s.dz_sum[j] += s.dz[j];
    }
    net.backward_prefix(prefix, s.dz_sum.data(), s.grad.data());
  }
  loss *= scale;
  if (!std::isfinite(loss)) throw TrainingError("non-finite value loss");
  for (double g : s.grad)
    if (!std::isfinite(g)) throw TrainingError("non-finite critic gradient");
  policy::clip_grad_norm(s.grad, cfg.grad_clip_norm);
  adam.step(net.params(), s.grad, ctx.lr);
  return loss;
}

double explained_variance(std::span<const Rollout> batch) {
  double n = 0.0, sr = 0.0, srr = 0.0, se = 0.0, see = 0.0;
  for (const auto& ro : batch)
    for (const auto& ag : ro.agents) {
      const double e = ag.ret - ag.value;
      n += 1.0;
      sr += ag.ret;
      srr += ag.ret * ag.ret;
      se += e;
      see += e * e;
    }
  if (n < 2.0) return 0.0;
  const double var_r = srr / n - (sr / n) * (sr / n);
  const double var_e = see / n - (se / n) * (se / n);
  return var_r > 0.0 ? 1.0 - var_e / var_r : 0.0;
}

}  // namespace

UpdateStats ppo_update(policy::PolicyParams& params, Optimizers& opt, std::span<const Rollout> batch,
                       const TrainConfig& cfg, const UpdateContext& ctx) {
  std::vector<GroupRef> groups;
  std::size_t n_agents = 0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (std::size_t g = 0; g < batch[r].groups.size(); ++g)
      groups.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(g)});
    n_agents += batch[r].agents.size();
  }
  if (n_agents == 0) throw std::invalid_argument("ppo_update: empty batch");

  UpdateStats stats;
  stats.samples = n_agents;
  stats.explained_variance = explained_variance(batch);
  Rng rng(ctx.shuffle_seed);
  Scratch s;
  ActorTally tally;
  double vloss = 0.0;
  int vcount = 0;
  const std::size_t mb_size = std::max<std::size_t>(1, cfg.minibatch_size);

  if (cfg.unified_epochs) {
    const int epochs = std::max(cfg.actor_epochs, cfg.critic_epochs);
    for (int e = 0; e < epochs; ++e)
      for (const auto& mb : make_minibatches(groups, batch, mb_size, rng)) {
        actor_step(params, opt.actor, mb, batch, cfg, ctx, s, tally);
        vloss += critic_step(params, opt.critic, mb, batch, cfg, ctx, s);
        ++vcount;
        ++stats.actor_steps;
        ++stats.critic_steps;
      }
  } else {
    for (int e = 0; e < cfg.critic_epochs; ++e)
      for (const auto& mb : make_minibatches(groups, batch, mb_size, rng)) {
        vloss += critic_step(params, opt.critic, mb, batch, cfg, ctx, s);
        ++vcount;
        ++stats.critic_steps;
      }
    for (int e = 0; e < cfg.actor_epochs; ++e)
      for (const auto& mb : make_minibatches(groups, batch, mb_size, rng)) {
        actor_step(params, opt.actor, mb, batch, cfg, ctx, s, tally);
        ++stats.actor_steps;
      }
  }
  if (tally.n) {
    const double n = static_cast<double>(tally.n);
    stats.approx_kl = tally.kl / n;
    stats.clip_fraction = tally.clipped / n;
    stats.entropy = tally.entropy / n;
  }
  if (vcount) stats.value_loss = vloss / vcount;
  return stats;
}

}  // namespace dgpg::trainer
