#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace dgpg {

// Streaming count/mean/M2 accumulator (Welford). merge() is the pairwise
// Chan et al. combination, so partial accumulators from independent workers
// can be folded in any order.
struct MomentAccumulator {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) noexcept {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const MomentAccumulator& o) noexcept {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.count) / n;
    m2 += o.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  // Unbiased sample variance.
  double variance() const noexcept {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
};

double mean_of(std::span<const double> xs);
double sample_variance(std::span<const double> xs);
double stddev_of(std::span<const double> xs);
double pearson(std::span<const double> xs, std::span<const double> ys);
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> ranks(std::span<const double> xs);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit least_squares(std::span<const double> xs, std::span<const double> ys);

// Linear-interpolated quantile of an already sorted sample, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace dgpg
