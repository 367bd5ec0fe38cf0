#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "dgpg/policy/adam.hpp"
#include "dgpg/policy/policy.hpp"
#include "dgpg/trainer/config.hpp"
#include "dgpg/trainer/rollout.hpp"

namespace dgpg::trainer {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UpdateStats {
  double approx_kl = 0.0;      // mean of log pi_old - log pi_new over actor samples
  double clip_fraction = 0.0;
  double entropy = 0.0;        // mean policy entropy seen by the actor passes
  double value_loss = 0.0;     // mean Huber loss over critic passes
  double explained_variance = 0.0;
  std::size_t samples = 0;
  int actor_steps = 0;
  int critic_steps = 0;
  friend bool operator==(const UpdateStats&, const UpdateStats&) = default;
};

// Optimizer state that lives across episodes.
struct Optimizers {
  policy::Adam actor;
  policy::Adam critic;
  Optimizers() = default;
  explicit Optimizers(const policy::PolicyParams& p) : actor(p.actor.size()), critic(p.critic.size()) {}
};

struct UpdateContext {
  double lr = 0.0;
  double entropy_coef = 0.0;
  std::uint64_t shuffle_seed = 0;
};

// Clipped PPO objective for one sample, as a function of the ratio.
inline double clipped_surrogate(double ratio, double advantage, double eps) noexcept {
  const double lo = 1.0 - eps, hi = 1.0 + eps;
  const double clipped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
  const double a = ratio * advantage, b = clipped * advantage;
  return a < b ? a : b;
}

// True when the clipped branch is active, i.e. the sample contributes no
// surrogate gradient.
inline bool surrogate_clipped(double ratio, double advantage, double eps) noexcept {
  return (advantage > 0.0 && ratio > 1.0 + eps) || (advantage < 0.0 && ratio < 1.0 - eps);
}

// Updates params in place. Agent records must carry final advantages and
// returns (reward units). Throws TrainingError on a non-finite loss.
UpdateStats ppo_update(policy::PolicyParams& params, Optimizers& opt, std::span<const Rollout> batch,
                       const TrainConfig& cfg, const UpdateContext& ctx);

}  // namespace dgpg::trainer
