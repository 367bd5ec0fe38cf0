#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dgpg/common/rng.hpp"
#include "dgpg/policy/network.hpp"

namespace dgpg::policy {

inline constexpr std::size_t kEmbedDim = 16;
inline constexpr double kHuberDelta = 10.0;

struct PolicyConfig {
  Arch arch = Arch::Linear;
  std::size_t prefix_dim = 0;         // shared observation prefix
  std::size_t critic_prefix_dim = 0;  // leading slice of the prefix the critic sees
  std::size_t suffix_dim = 4;
  std::size_t act_dim = 0;
  std::size_t hidden = 0;
  std::size_t embed = kEmbedDim;
  std::size_t id_scale = 1;
};

// One parameter set shared by all agents: a categorical actor over act_dim
// actions and a scalar critic.
struct PolicyParams {
  Arch arch = Arch::Linear;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t prefix_dim = 0;
  std::size_t critic_prefix_dim = 0;
  Network actor;
  Network critic;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

PolicyParams make_policy(const PolicyConfig& config, std::uint64_t seed);

// Numerically stable softmax; writes into probs.
void softmax(std::span<const double> logits, std::span<double> probs);
double entropy_of(std::span<const double> probs);
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);
std::size_t argmax(std::span<const double> probs);

// Critic input ([critic prefix | suffix]) sliced out of a full observation.
std::vector<double> critic_input(const PolicyParams& params, std::span<const double> obs);

// Throws std::invalid_argument on a wrong length or non-finite entries.
std::vector<double> actor_forward(const PolicyParams& params, std::span<const double> obs);
double critic_value(const PolicyParams& params, std::span<const double> obs);

struct ActionSample {
  std::size_t action = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
  double value = 0.0;
};

ActionSample sample_and_score(const PolicyParams& params, std::span<const double> obs, Rng& rng);

double huber_loss(double err, double delta = kHuberDelta) noexcept;
double huber_grad(double err, double delta = kHuberDelta) noexcept;

// Scalar objectives whose gradients are provided below.
double log_prob(const PolicyParams& params, std::span<const double> obs, std::size_t action);
double policy_entropy(const PolicyParams& params, std::span<const double> obs);
double value_loss(const PolicyParams& params, std::span<const double> obs, double target,
                  double delta = kHuberDelta);

struct PolicyGradient {
  std::vector<double> actor;   // d ln pi(action | obs) / d actor params
  std::vector<double> critic;  // d huber(V(obs) - target) / d critic params
};

PolicyGradient grad_log_prob_and_value(const PolicyParams& params, std::span<const double> obs,
                                       std::size_t action, double target, double delta = kHuberDelta);

// d H(pi(.|obs)) / d actor params.
std::vector<double> grad_entropy(const PolicyParams& params, std::span<const double> obs);

// Logit-space derivatives.
void grad_log_prob_logits(std::span<const double> probs, std::size_t action, std::span<double> out);
void grad_entropy_logits(std::span<const double> probs, std::span<double> out);

// Text checkpoint with a version tag; weights are written as hexadecimal
// floating point so a save/load round trip is exact.
std::string serialize(const PolicyParams& params);
PolicyParams deserialize(const std::string& text);
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dgpg::policy
