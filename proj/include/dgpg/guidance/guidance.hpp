#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dgpg/common/matrix.hpp"
#include "dgpg/env/cluster.hpp"
#include "dgpg/env/server_spec.hpp"

namespace dgpg::guidance {

// Capacity-weighted load-balancing equilibrium. `values` has the shape of the
// utilization matrix (N x K); `total_load` is C^k.
struct ReferenceState {
  Matrix values;
  std::vector<double> total_load;
};

// mu[i][k]: per-server capacity (vcpus, mem_gb) as an N x 2 matrix.
Matrix capacity_matrix(std::span<const env::ServerSpec> fleet);

// x~[i][k] = mu[i][k] / sum_j mu[j][k] * C^k. Throws if some dimension has zero
// total capacity or if C has a negative entry.
ReferenceState reference_state(const Matrix& capacity, std::span<const double> total_load);
ReferenceState reference_state(std::span<const env::ServerSpec> fleet, std::span<const double> total_load);

// 1/2 * ||x - x~||^2. Throws on a shape mismatch.
double deviation(const Matrix& x, const ReferenceState& ref);

// sum_k w_k (x[j][k] - x~[j][k]).
double guidance_coefficient(const Matrix& x, const ReferenceState& ref, std::span<const double> demand,
                            std::size_t server);

// Dense local influence vector: w at row j, zero elsewhere.
Matrix influence_vector(std::size_t n_servers, std::span<const double> demand, std::size_t server);

// J = sum_{i,k} x[i][k]^2 / mu[i][k].
double load_imbalance(const Matrix& x, const Matrix& capacity);

// <grad J(x), x~ - x>. Throws if column sums of x and x~ differ by more than 1e-9.
double alignment_inner_product(const Matrix& x, const Matrix& ref, const Matrix& capacity);

// Which total C^k the per-step reference is built from. Pressure (default) is
// running load plus queued and buffered demand. Running keeps the reference
// workload-conserving (sum x = sum x~); under sustained queueing Pressure pushes
// x~ past capacity everywhere and the coefficient turns into "prefer the
// largest host".
enum class LoadBasis { Pressure, Running };

// Raw coefficient of every agent that acted in a step; x is the pre-placement
// running load.
std::vector<double> step_coefficients(const env::StepInfo& info, const Matrix& capacity,
                                      LoadBasis basis = LoadBasis::Pressure);

// Exponential-moving normalizer for the guidance signal.
class RunningNorm {
 public:
  static constexpr double kMomentum = 0.99;
  static constexpr double kClip = 3.0;
  static constexpr double kEps = 1e-8;

  double mean() const noexcept { return mean_; }
  double var() const noexcept { return var_; }

  // Updates the statistics with `raw` and returns the clipped standardized value.
  double normalize(double raw) noexcept;

 private:
  double mean_ = 0.0;
  double var_ = 1.0;
};

inline double normalize_signal(double raw, RunningNorm& stats) noexcept { return stats.normalize(raw); }

}  // namespace dgpg::guidance
