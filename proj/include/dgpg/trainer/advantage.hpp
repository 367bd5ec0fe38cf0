#pragma once

#include <span>
#include <vector>

#include "dgpg/trainer/config.hpp"

namespace dgpg::trainer {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// GAE over one trajectory. dones[t] marks t as terminal (no bootstrap past
// it); bootstrap_value is V after the last step when it is not terminal.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const bool> dones, double bootstrap_value, double gamma, double lambda);

// (1 - alpha) * a_gae - alpha * guidance.
inline double augment_advantage(double a_gae, double guidance, double alpha) noexcept {
  return (1.0 - alpha) * a_gae - alpha * guidance;
}

// 0.9 up to progress 0.1, linear to 0.2 at 0.5, then 0.2.
double alpha_schedule(double progress);
double alpha_at(const TrainConfig& cfg, double progress);
double learning_rate_at(const TrainConfig& cfg, double progress);
double entropy_coef_at(const TrainConfig& cfg, double progress);

// In-place (x - mean) / (std + 1e-8) with the population std.
void standardize(std::span<double> xs);

}  // namespace dgpg::trainer
