#include "dgpg/guidance/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgpg::guidance {

Matrix capacity_matrix(std::span<const env::ServerSpec> fleet) {
  Matrix mu(fleet.size(), env::kResourceDims);
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const auto cap = fleet[i].capacity();
    for (std::size_t k = 0; k < env::kResourceDims; ++k) mu(i, k) = cap[k];
  }
  return mu;
}

ReferenceState reference_state(const Matrix& capacity, std::span<const double> total_load) {
  if (total_load.size() != capacity.cols())
    throw std::invalid_argument("reference_state: load has the wrong number of dimensions");
  ReferenceState ref{Matrix(capacity.rows(), capacity.cols()), {total_load.begin(), total_load.end()}};
  for (std::size_t k = 0; k < capacity.cols(); ++k) {
    if (total_load[k] < 0.0) throw std::invalid_argument("reference_state: negative total load");
    double total = 0.0;
    for (std::size_t i = 0; i < capacity.rows(); ++i) total += capacity(i, k);
    if (!(total > 0.0)) throw std::invalid_argument("reference_state: zero total capacity");
    for (std::size_t i = 0; i < capacity.rows(); ++i) ref.values(i, k) = capacity(i, k) / total * total_load[k];
  }
  return ref;
}

ReferenceState reference_state(std::span<const env::ServerSpec> fleet, std::span<const double> total_load) {
  return reference_state(capacity_matrix(fleet), total_load);
}

double deviation(const Matrix& x, const ReferenceState& ref) {
  if (!x.same_shape(ref.values)) throw std::invalid_argument("deviation: shape mismatch");
  double d = 0.0;
  const auto a = x.flat();
  const auto b = ref.values.flat();
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return 0.5 * d;
}

double guidance_coefficient(const Matrix& x, const ReferenceState& ref, std::span<const double> demand,
                            std::size_t server) {
  if (!x.same_shape(ref.values) || demand.size() != x.cols() || server >= x.rows())
    throw std::invalid_argument("guidance_coefficient: shape mismatch");
  double g = 0.0;
  for (std::size_t k = 0; k < demand.size(); ++k) g += demand[k] * (x(server, k) - ref.values(server, k));
  return g;
}

Matrix influence_vector(std::size_t n_servers, std::span<const double> demand, std::size_t server) {
  if (server >= n_servers) throw std::invalid_argument("influence_vector: server out of range");
  Matrix z(n_servers, demand.size());
  for (std::size_t k = 0; k < demand.size(); ++k) z(server, k) = demand[k];
  return z;
}

double load_imbalance(const Matrix& x, const Matrix& capacity) {
  if (!x.same_shape(capacity)) throw std::invalid_argument("load_imbalance: shape mismatch");
  double j = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      if (!(capacity(i, k) > 0.0)) throw std::invalid_argument("load_imbalance: non-positive capacity");
      j += x(i, k) * x(i, k) / capacity(i, k);
    }
  return j;
}

double alignment_inner_product(const Matrix& x, const Matrix& ref, const Matrix& capacity) {
  if (!x.same_shape(ref) || !x.same_shape(capacity))
    throw std::invalid_argument("alignment_inner_product: shape mismatch");
  for (std::size_t k = 0; k < x.cols(); ++k) {
    double sx = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      sx += x(i, k);
      sr += ref(i, k);
    }
    if (std::abs(sx - sr) > 1e-9 * std::max(1.0, std::abs(sr)))
      throw std::invalid_argument("alignment_inner_product: states do not carry the same total load");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k) s += 2.0 * x(i, k) / capacity(i, k) * (ref(i, k) - x(i, k));
  return s;
}

std::vector<double> step_coefficients(const env::StepInfo& info, const Matrix& capacity, LoadBasis basis) {
  std::vector<double> total(info.pressure.begin(), info.pressure.end());
  if (basis == LoadBasis::Running) {
    std::fill(total.begin(), total.end(), 0.0);
    for (std::size_t i = 0; i < info.util_before.rows(); ++i)
      for (std::size_t k = 0; k < total.size(); ++k) total[k] += info.util_before(i, k);
  }
  const ReferenceState ref = reference_state(capacity, total);
  std::vector<double> g(info.servers.size());
  for (std::size_t a = 0; a < g.size(); ++a)
    g[a] = guidance_coefficient(info.util_before, ref, info.demands[a], info.servers[a]);
  return g;
}

double RunningNorm::normalize(double raw) noexcept {
  mean_ = kMomentum * mean_ + (1.0 - kMomentum) * raw;
  const double dev = raw - mean_;
  var_ = kMomentum * var_ + (1.0 - kMomentum) * dev * dev;
  return std::clamp((raw - mean_) / std::sqrt(var_ + kEps), -kClip, kClip);
}

}  // namespace dgpg::guidance
