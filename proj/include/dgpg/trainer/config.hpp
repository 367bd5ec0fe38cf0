#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dgpg/common/kvconfig.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/guidance/guidance.hpp"
#include "dgpg/policy/network.hpp"

namespace dgpg::trainer {

enum class Algorithm { DGPG, MAPPO, IPPO };
enum class LrDecay { Constant, Linear, Exponential };
enum class EntropyDecay { Fixed, Exponential };
enum class AlphaMode { Dynamic, Constant };

struct TrainConfig {
  Algorithm algorithm = Algorithm::DGPG;
  policy::Arch arch = policy::Arch::Linear;
  std::size_t hidden = 0;

  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;

  double lr = 1e-3;
  LrDecay lr_decay = LrDecay::Linear;
  double lr_final_frac = 0.01;
  double lr_decay_end = 0.9;  // linear decay reaches its floor at this progress

  double entropy_coef = 0.01;
  EntropyDecay entropy_decay = EntropyDecay::Exponential;
  double entropy_final = 1e-4;

  int critic_epochs = 20;
  int actor_epochs = 3;
  bool unified_epochs = false;  // one pass updates actor and critic together
  std::size_t minibatch_size = 10000;
  int rollouts_per_episode = 24;
  int parallel_envs = 4;
  int episodes = 200;

  AlphaMode alpha_mode = AlphaMode::Dynamic;
  double alpha_value = 0.0;  // used when alpha_mode is Constant

  guidance::LoadBasis guidance_basis = guidance::LoadBasis::Pressure;
  double huber_delta = 10.0;
  double grad_clip_norm = 10.0;
  bool return_normalization = false;

  int eval_every = 10;       // episodes between validation checks, 0 disables
  int eval_scenarios = 8;    // taken from the end of the training set

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);
std::string_view to_string(policy::Arch a);
policy::Arch parse_arch(std::string_view s);

// Linear-model comparison preset and the per-scale neural preset.
TrainConfig linear_preset(Algorithm algo);
TrainConfig mlp_preset(Algorithm algo, const env::ScaleConfig& scale);
TrainConfig preset(Algorithm algo, policy::Arch arch, const env::ScaleConfig& scale);

// Applies one section's entries; unknown keys and bad values throw
// std::invalid_argument.
void apply_entries(TrainConfig& cfg, const KvSection& section);

// Applies the sections of a config document that match the run, from least
// to most specific: [train], [<algo>], [<algo>.<arch>]. Any other section
// name is an error unless listed in `ignored`.
void apply_document(TrainConfig& cfg, const KvDocument& doc,
                    std::initializer_list<std::string_view> ignored = {});

// Writes cfg in the same key = value format (single [train] section).
std::string to_text(const TrainConfig& cfg);

}  // namespace dgpg::trainer
