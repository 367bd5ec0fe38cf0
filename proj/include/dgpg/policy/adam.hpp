#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace dgpg::policy {

// Adam on a flat parameter vector; step() descends along `grad`.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Adam() = default;
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr);
  long steps() const noexcept { return t_; }

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

// Scales grad in place so that its L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

}  // namespace dgpg::policy
