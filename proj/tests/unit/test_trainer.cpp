#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "dgpg/trainer/advantage.hpp"
#include "dgpg/trainer/config.hpp"
#include "dgpg/trainer/ppo.hpp"
#include "dgpg/trainer/training.hpp"

using namespace dgpg;
using namespace dgpg::trainer;

namespace {

// N=5 with short episodes so a training run takes well under a second.
env::ScaleConfig short_scale(int len = 60) {
  env::ScaleConfig s = env::scale_by_servers(5);
  s.episode_len = len;
  s.arrivals_end = len * 2 / 3;
  return s;
}

std::vector<env::Scenario> scenarios(const env::ScaleConfig& s, int n, std::uint64_t base = 500) {
  std::vector<env::Scenario> v;
  for (int i = 0; i < n; ++i) v.push_back(env::make_scenario(env::scale_by_servers(s.n_servers), base + i));
  return v;
}

TrainConfig small_config(Algorithm algo) {
  TrainConfig c = linear_preset(algo);
  c.episodes = 3;
  c.rollouts_per_episode = 3;
  c.parallel_envs = 2;
  c.minibatch_size = 64;
  c.critic_epochs = 2;
  c.actor_epochs = 2;
  c.eval_every = 0;
  return c;
}

// One rollout recorded from a fresh policy, with hand-set advantages.
Rollout recorded_rollout(const policy::PolicyParams& p, const env::ScaleConfig& s, const env::Scenario& sc) {
  Rng rng(3);
  Rollout ro;
  run_policy_episode(sc, s, p, rng, EpisodeOptions{}, &ro);
  return ro;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("gae examples") {
  SUBCASE("single terminal step") {
    const double r[] = {3.0}, v[] = {1.25};
    const bool d[] = {true};
    const auto g = compute_gae(r, v, d, 99.0, 0.99, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(1.75));
    CHECK(g.returns[0] == doctest::Approx(3.0));
  }
  SUBCASE("two steps, gamma = lambda = 1") {
    const double r[] = {1.0, 1.0}, v[] = {0.5, 0.5};
    const bool d[] = {false, true};
    const auto g = compute_gae(r, v, d, 0.0, 1.0, 1.0);
    CHECK(g.advantages[0] == doctest::Approx(1.5));
    CHECK(g.advantages[1] == doctest::Approx(0.5));
  }
  SUBCASE("lambda = 0 gives the TD error") {
    const double r[] = {1.0, -2.0, 0.5}, v[] = {0.2, 0.7, -0.1};
    const bool d[] = {false, false, false};
    const auto g = compute_gae(r, v, d, 0.4, 0.9, 0.0);
    CHECK(g.advantages[0] == doctest::Approx(1.0 + 0.9 * 0.7 - 0.2));
    CHECK(g.advantages[1] == doctest::Approx(-2.0 + 0.9 * -0.1 - 0.7));
    CHECK(g.advantages[2] == doctest::Approx(0.5 + 0.9 * 0.4 + 0.1));
  }
  SUBCASE("length mismatch") {
    const double r[] = {1.0, 2.0}, v[] = {0.0};
    const bool d[] = {true};
    CHECK_THROWS_AS(compute_gae(r, v, d, 0.0, 1.0, 1.0), std::invalid_argument);
  }
}

TEST_CASE("advantage augmentation") {
  CHECK(augment_advantage(2.0, 5.0, 0.0) == 2.0);
  CHECK(augment_advantage(2.0, 5.0, 1.0) == -5.0);
  CHECK(augment_advantage(2.0, 5.0, 0.2) == doctest::Approx(0.6));
  // zero guidance leaves (1 - alpha) A
  CHECK(augment_advantage(-1.5, 0.0, 0.3) == doctest::Approx(0.7 * -1.5));
}

TEST_CASE("alpha schedule") {
  CHECK(alpha_schedule(0.0) == 0.9);
  CHECK(alpha_schedule(0.1) == 0.9);
  CHECK(alpha_schedule(0.3) == doctest::Approx(0.55));
  CHECK(alpha_schedule(0.5) == doctest::Approx(0.2));
  CHECK(alpha_schedule(0.7) == 0.2);
  CHECK(alpha_schedule(1.0) == 0.2);
  TrainConfig c = linear_preset(Algorithm::MAPPO);
  CHECK(alpha_at(c, 0.0) == 0.0);
  c = linear_preset(Algorithm::DGPG);
  c.alpha_mode = AlphaMode::Constant;
  c.alpha_value = 0.4;
  CHECK(alpha_at(c, 0.05) == 0.4);
}

TEST_CASE("learning-rate and entropy schedules") {
  TrainConfig c = linear_preset(Algorithm::DGPG);
  CHECK(learning_rate_at(c, 0.0) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(c, 1.0) == doctest::Approx(1e-5));
  CHECK(learning_rate_at(c, 0.45) == doctest::Approx(1e-3 * (1 - 0.99 * 0.5)));
  c.lr_decay = LrDecay::Exponential;
  CHECK(learning_rate_at(c, 1.0) == doctest::Approx(1e-5));
  CHECK(learning_rate_at(c, 0.5) == doctest::Approx(1e-4));
  CHECK(entropy_coef_at(c, 0.0) == doctest::Approx(0.01));
  CHECK(entropy_coef_at(c, 1.0) == doctest::Approx(1e-4));
  CHECK(entropy_coef_at(c, 0.5) == doctest::Approx(1e-3));
  const TrainConfig m = linear_preset(Algorithm::MAPPO);
  CHECK(entropy_coef_at(m, 0.9) == 0.005);
}

TEST_CASE("linear presets") {
  for (auto a : {Algorithm::DGPG, Algorithm::MAPPO, Algorithm::IPPO}) {
    const TrainConfig c = linear_preset(a);
    CHECK(c.lr == 1e-3);
    CHECK(c.critic_epochs == 20);
    CHECK(c.actor_epochs == 3);
    CHECK(c.minibatch_size == 10000);
    CHECK(c.grad_clip_norm == 10.0);
    CHECK(c.parallel_envs == 4);
    CHECK(c.rollouts_per_episode == 24);
    CHECK(c.huber_delta == 10.0);
    CHECK(c.gamma == 0.99);
    CHECK(c.gae_lambda == 0.95);
  }
  CHECK(linear_preset(Algorithm::DGPG).episodes == 200);
  CHECK(linear_preset(Algorithm::MAPPO).episodes == 500);
  CHECK_FALSE(linear_preset(Algorithm::DGPG).return_normalization);
  CHECK(linear_preset(Algorithm::IPPO).return_normalization);
  const TrainConfig m = mlp_preset(Algorithm::DGPG, env::scale_by_servers(20));
  CHECK(m.unified_epochs);
  CHECK(m.entropy_coef == 0.02);
}

TEST_CASE("config files") {
  TrainConfig c = linear_preset(Algorithm::DGPG);
  const auto doc = KvDocument::parse(
      "# comment\n[train]\nlr = 5e-4\nepisodes = 7\n[dgpg]\nalpha_schedule = constant\nalpha_value = 0.3\n"
      "[mappo]\nlr = 1\n[dgpg.linear]\nclip_eps = 0.4\n");
  apply_document(c, doc);
  CHECK(c.lr == 5e-4);
  CHECK(c.episodes == 7);
  CHECK(c.alpha_mode == AlphaMode::Constant);
  CHECK(c.alpha_value == 0.3);
  CHECK(c.clip_eps == 0.4);
  CHECK(c.guidance_basis == guidance::LoadBasis::Pressure);
  apply_document(c, KvDocument::parse("[dgpg]\nguidance_basis = running\n"));
  CHECK(c.guidance_basis == guidance::LoadBasis::Running);

  TrainConfig d = linear_preset(Algorithm::DGPG);
  CHECK_THROWS_AS(apply_document(d, KvDocument::parse("[train]\nlearning_rate = 1\n")), std::invalid_argument);
  CHECK_THROWS_AS(apply_document(d, KvDocument::parse("[trian]\nlr = 1\n")), std::invalid_argument);
  CHECK_THROWS_AS(apply_document(d, KvDocument::parse("[train]\ngamma = 1.5\n")), std::invalid_argument);
  CHECK_THROWS_AS(apply_document(d, KvDocument::parse("[train]\nguidance_basis = queued\n")), std::invalid_argument);
  CHECK_THROWS_AS(apply_document(d, KvDocument::parse("[train]\nalgorithm = mappo\n")), std::invalid_argument);

  // to_text round trip
  TrainConfig e = linear_preset(Algorithm::IPPO);
  e.lr = 0.000123456789;
  e.entropy_decay = EntropyDecay::Exponential;
  TrainConfig f = linear_preset(Algorithm::IPPO);
  apply_document(f, KvDocument::parse(to_text(e)));
  CHECK(f == e);
}

TEST_CASE("clip rule") {
  CHECK(clipped_surrogate(1.5, 2.0, 0.2) == doctest::Approx(1.2 * 2.0));
  CHECK(surrogate_clipped(1.5, 2.0, 0.2));
  CHECK(clipped_surrogate(1.5, -2.0, 0.2) == doctest::Approx(-3.0));
  CHECK_FALSE(surrogate_clipped(1.5, -2.0, 0.2));
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK(surrogate_clipped(0.5, -1.0, 0.2));
  CHECK(clipped_surrogate(1.0, 3.0, 0.2) == 3.0);
  CHECK_FALSE(surrogate_clipped(1.0, 3.0, 0.2));
}

TEST_CASE("zero advantages and no entropy bonus leave the actor unchanged") {
  const auto s = short_scale();
  TrainConfig c = small_config(Algorithm::MAPPO);
  auto pc = policy_config(c, s);
  pc.arch = policy::Arch::Mlp;
  pc.hidden = 8;
  auto p = policy::make_policy(pc, 4);
  std::vector<Rollout> batch{recorded_rollout(p, s, scenarios(s, 1)[0])};
  REQUIRE(!batch[0].agents.empty());
  for (auto& a : batch[0].agents) {
    a.advantage = 0.0;
    a.ret = 1.0;
  }
  const auto before = p;
  Optimizers opt(p);
  ppo_update(p, opt, batch, c, UpdateContext{1e-2, 0.0, 9});
  CHECK(p.actor == before.actor);
  CHECK_FALSE(p.critic == before.critic);
}

TEST_CASE("first actor step follows the vanilla policy gradient") {
  // At ratio 1 the clip is inactive, so the surrogate gradient is
  // sum_i A_i grad log pi(a_i). Adam's first step moves each parameter by
  // -lr * sign(loss gradient).
  const auto s = short_scale(30);
  TrainConfig c = small_config(Algorithm::MAPPO);
  c.critic_epochs = 0;
  c.actor_epochs = 1;
  c.minibatch_size = 1000000;
  c.grad_clip_norm = 1e12;
  auto pc = policy_config(c, s);
  pc.arch = policy::Arch::Mlp;
  pc.hidden = 6;
  auto p = policy::make_policy(pc, 11);
  std::vector<Rollout> batch{recorded_rollout(p, s, scenarios(s, 1)[0])};
  Rng rng(5);
  std::vector<double> expect(p.actor.size(), 0.0);
  const auto& ro = batch[0];
  for (auto& a : batch[0].agents) a.advantage = uniform01(rng) - 0.5;
  for (const auto& a : ro.agents) {
    std::vector<double> obs(ro.prefix(a.group), ro.prefix(a.group) + ro.prefix_dim);
    obs.insert(obs.end(), a.suffix.begin(), a.suffix.end());
    const auto g = policy::grad_log_prob_and_value(p, obs, a.action, 0.0);
    for (std::size_t j = 0; j < expect.size(); ++j) expect[j] += a.advantage * g.actor[j];
  }
  const auto before = p;
  Optimizers opt(p);
  const double lr = 1e-3;
  ppo_update(p, opt, batch, c, UpdateContext{lr, 0.0, 1});
  int checked = 0;
  for (std::size_t j = 0; j < expect.size(); ++j) {
    if (std::abs(expect[j]) < 1e-6) continue;
    const double step = p.actor.params()[j] - before.actor.params()[j];
    CHECK(step == doctest::Approx(expect[j] > 0 ? lr : -lr).epsilon(1e-3));
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto s = short_scale();
  const auto sv = scenarios(s, 4);
  const auto c = small_config(Algorithm::DGPG);
  TrainOptions o1{42, 1, {}}, o2{42, 3, {}};
  const auto a = run_training(sv, c, s, o1);
  const auto b = run_training(sv, c, s, o2);
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
    CHECK(a.log[i].update == b.log[i].update);
    CHECK(a.log[i].entropy <= std::log(static_cast<double>(s.act_dim())) + 1e-12);
  }
  CHECK(a.final_params == b.final_params);
  TrainOptions o3{43, 1, {}};
  CHECK_FALSE(run_training(sv, c, s, o3).final_params == a.final_params);
}

TEST_CASE("alpha = 0 reproduces the baseline run") {
  const auto s = short_scale();
  const auto sv = scenarios(s, 4);
  TrainConfig base = small_config(Algorithm::MAPPO);
  TrainConfig zero = base;
  zero.algorithm = Algorithm::DGPG;
  zero.alpha_mode = AlphaMode::Constant;
  zero.alpha_value = 0.0;
  TrainOptions o{9, 1, {}};
  const auto a = run_training(sv, base, s, o);
  const auto b = run_training(sv, zero, s, o);
  CHECK(a.final_params.actor == b.final_params.actor);
  CHECK(a.final_params.critic == b.final_params.critic);
}

TEST_CASE("ippo critic sees only the server block") {
  const auto s = env::scale_by_servers(5);
  const auto pi = policy_config(linear_preset(Algorithm::IPPO), s);
  const auto pm = policy_config(linear_preset(Algorithm::MAPPO), s);
  CHECK(pi.critic_prefix_dim == 7 * 5);
  CHECK(pm.critic_prefix_dim == pm.prefix_dim);
  CHECK(pi.prefix_dim == pm.prefix_dim);
}

TEST_CASE("best checkpoint tracking") {
  const auto s = short_scale();
  const auto sv = scenarios(s, 4);
  TrainConfig c = small_config(Algorithm::DGPG);
  c.eval_every = 1;
  c.eval_scenarios = 2;
  int seen = 0;
  TrainOptions o{1, 1, [&](const EpisodeMetrics& m) {
                   CHECK(std::isfinite(m.validation));
                   ++seen;
                 }};
  const auto r = run_training(sv, c, s, o);
  CHECK(seen == 3);
  double best = -1e300;
  for (const auto& m : r.log) best = std::max(best, m.validation);
  CHECK(r.best_validation == best);
  CHECK(r.log[static_cast<std::size_t>(r.best_episode)].validation == best);
}

TEST_CASE("training rejects bad inputs") {
  const auto s = short_scale();
  const auto c = small_config(Algorithm::DGPG);
  CHECK_THROWS_AS(run_training({}, c, s, TrainOptions{}), std::invalid_argument);
  const auto wrong = scenarios(env::scale_by_servers(10), 1);
  CHECK_THROWS_AS(run_training(wrong, c, s, TrainOptions{}), std::invalid_argument);
}

TEST_CASE("evaluation") {
  const auto s = short_scale();
  const auto sv = scenarios(s, 3);
  const auto p = policy::make_policy(policy_config(linear_preset(Algorithm::DGPG), s), 2);
  CHECK_THROWS_AS(evaluate(p, {}, s, true), std::invalid_argument);
  const auto a = evaluate(p, sv, s, true, 5);
  const auto b = evaluate(p, sv, s, true, 6, 2);
  CHECK(a.per_scenario == b.per_scenario);
  CHECK(a.per_scenario.size() == 3);
  const auto big = env::scale_by_servers(10);
  CHECK_THROWS_AS(evaluate(p, scenarios(big, 1), big, true), std::invalid_argument);
}

}  // TEST_SUITE
