#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dgpg/env/scale.hpp"
#include "dgpg/policy/policy.hpp"

namespace dgpg::variance {

// Variance of (1 - alpha) g_J - alpha g_G when corr(g_J, g_G) = rho.
double combined_variance(double alpha, double sigma_j_sq, double sigma_g_sq, double rho);

// Minimizer of combined_variance over alpha. Throws std::domain_error when
// sigma_j^2 + sigma_g^2 + 2 rho sigma_j sigma_g <= 0.
double optimal_alpha(double sigma_j_sq, double sigma_g_sq, double rho);
double min_variance(double sigma_j_sq, double sigma_g_sq, double rho);

struct EstimatorStats {
  double sigma_j_sq = 0.0;  // trace of the covariance of the return-weighted score
  double sigma_g_sq = 0.0;  // same for the guidance-weighted score
  double rho = 0.0;         // correlation of the projections on the mean g_J direction
  std::size_t n_samples = 0;
  std::size_t n_agents = 0;
  bool degenerate = false;  // a variance (or the mean direction) vanished; rho is 0
};

// Per-sample scalars kept for resampling: squared distance of each estimator
// to its sample mean, and both projections on the unit mean-g_J direction.
struct SampleSet {
  std::size_t n_agents = 0;
  std::vector<double> dist_j, dist_g, proj_j, proj_g;
  bool zero_direction = false;
};

// Draws gradient sample `index` into (g_j, g_g). Must be a pure function of
// the index so the two passes of `collect` see the same samples.
using GradientSampler = std::function<void(std::size_t index, std::vector<double>& g_j, std::vector<double>& g_g)>;

SampleSet collect(const GradientSampler& sampler, std::size_t dim, std::size_t n_samples, std::size_t n_agents,
                  int threads = 1);
EstimatorStats summarize(const SampleSet& set);
// Stats of a resample given by sample indices.
EstimatorStats summarize(const SampleSet& set, std::span<const std::size_t> indices);

// One-step additive game: every agent plays a = +-1 from a two-logit softmax
// (uniform at the default logits), r = sum_l m_l a_l with m_l = c + eta_l and
// eta_l ~ N(0, tau^2) drawn per sample. Agent i's guidance coefficient is a
// noisy reading of the cost of its own contribution, -(m_i + xi_i) a_i with
// xi_i ~ N(0, kappa^2). kappa = 0 makes g_G an exact slice of g_J (alpha* = 1).
struct SyntheticGame {
  std::size_t n_agents = 2;
  double tau = 0.5;
  double c = 1.0;
  double kappa = 0.5;
};

// Closed forms at the uniform policy (score of agent 0 is a/2 (1, -1)).
double synthetic_sigma_j_sq(const SyntheticGame& g);
double synthetic_sigma_g_sq(const SyntheticGame& g);
double synthetic_rho(const SyntheticGame& g);
// Exact policy gradient for agent 0's two logits: c/2 (1, -1).
std::vector<double> synthetic_true_gradient(const SyntheticGame& g);

GradientSampler synthetic_sampler(const SyntheticGame& game, std::uint64_t seed);
EstimatorStats measure_synthetic(const SyntheticGame& game, std::size_t n_samples, std::uint64_t seed,
                                 int threads = 1);

// Cloud environment: start states are snapshots of episodes run under the
// frozen policy; each sample replays one start state with fresh action noise,
// scores the first buffered agent and accumulates the discounted reward over
// `horizon` steps. Only the actor's parameters enter the score.
struct CloudSetup {
  env::ScaleConfig scale;
  std::size_t n_start_states = 64;
  int warmup_min = 100;
  int warmup_max = 1500;
  int horizon = 32;
  double gamma = 0.99;
};

GradientSampler cloud_sampler(const CloudSetup& setup, const policy::PolicyParams& params, std::uint64_t seed,
                              std::size_t* dim_out = nullptr);
EstimatorStats measure_cloud(const CloudSetup& setup, const policy::PolicyParams& params, std::size_t n_samples,
                             std::uint64_t seed, int threads = 1);

struct SlopeCI {
  double slope = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool excludes_zero() const noexcept { return lo > 0.0 || hi < 0.0; }
};

struct ScalingRow {
  std::size_t n = 0;
  EstimatorStats stats;
  double alpha_star = 0.0;  // NaN when undefined
  double min_var = 0.0;
  double oracle_sigma_j_sq = 0.0;  // synthetic only, NaN otherwise
  double oracle_sigma_g_sq = 0.0;
};

struct ScalingReport {
  std::string env;
  std::vector<ScalingRow> rows;
  SlopeCI slope_j;
  SlopeCI slope_g;
};

struct ScalingOptions {
  std::string env = "synthetic";  // or "cloud"
  std::size_t samples = 20000;
  std::size_t bootstrap = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;
  SyntheticGame game;  // n_agents is overwritten per N
  int horizon = 32;
};

// Measures every N (at least four distinct values), fits Var vs N by least
// squares and bootstraps the slopes by resampling within each N. Cloud runs
// use a uniform-random frozen policy (zero linear weights) at the built-in
// scale with N servers.
ScalingReport scaling_experiment(std::span<const std::size_t> ns, const ScalingOptions& options);

// Columns: N, sigma_j_sq, sigma_g_sq, rho, alpha_star, min_variance,
// oracle_sigma_j_sq, oracle_sigma_g_sq, n_samples, degenerate.
void write_scaling_csv(const ScalingReport& report, const std::filesystem::path& path);
std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path);

}  // namespace dgpg::variance
