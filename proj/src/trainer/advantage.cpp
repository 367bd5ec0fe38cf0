#include "dgpg/trainer/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgpg::trainer {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const bool> dones, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_value = bootstrap_value;
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double keep = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * keep - values[i];
    next_adv = delta + gamma * lambda * keep * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
    next_value = values[i];
  }
  return out;
}

double alpha_schedule(double progress) {
  if (progress <= 0.1) return 0.9;
  if (progress >= 0.5) return 0.2;
  return 0.9 + (0.2 - 0.9) * (progress - 0.1) / 0.4;
}

double alpha_at(const TrainConfig& cfg, double progress) {
  if (cfg.algorithm != Algorithm::DGPG) return 0.0;
  return cfg.alpha_mode == AlphaMode::Constant ? cfg.alpha_value : alpha_schedule(progress);
}

double learning_rate_at(const TrainConfig& cfg, double progress) {
  progress = std::clamp(progress, 0.0, 1.0);
  switch (cfg.lr_decay) {
    case LrDecay::Constant: return cfg.lr;
    case LrDecay::Linear: {
      const double f = std::min(1.0, progress / cfg.lr_decay_end);
      return cfg.lr * (1.0 - (1.0 - cfg.lr_final_frac) * f);
    }
    case LrDecay::Exponential: return cfg.lr * std::exp(std::log(cfg.lr_final_frac) * progress);
  }
  return cfg.lr;
}

double entropy_coef_at(const TrainConfig& cfg, double progress) {
  if (cfg.entropy_decay == EntropyDecay::Fixed || cfg.entropy_coef <= 0.0) return cfg.entropy_coef;
  progress = std::clamp(progress, 0.0, 1.0);
  return cfg.entropy_coef * std::exp(std::log(cfg.entropy_final / cfg.entropy_coef) * progress);
}

void standardize(std::span<double> xs) {
  if (xs.empty()) return;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(xs.size()));
  for (double& x : xs) x = (x - mean) / (sd + 1e-8);
}

}  // namespace dgpg::trainer
