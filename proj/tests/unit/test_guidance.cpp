#include <cmath>
#include <random>

#include "doctest.h"
#include "dgpg/env/scale.hpp"
#include "dgpg/guidance/guidance.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dgpg;
using namespace dgpg::guidance;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  std::size_t i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix random_capacity(Rng& rng, std::size_t n) {
  Matrix mu(n, 2);
  std::uniform_int_distribution<int> pick(0, 11);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = env::builtin_server_types()[pick(rng)];
    mu(i, 0) = t.vcpus;
    mu(i, 1) = t.mem_gb;
  }
  return mu;
}

Matrix random_load(Rng& rng, const Matrix& mu) {
  Matrix x(mu.rows(), mu.cols());
  for (std::size_t i = 0; i < mu.rows(); ++i)
    for (std::size_t k = 0; k < mu.cols(); ++k) x(i, k) = uniform01(rng) * mu(i, k);
  return x;
}

std::vector<double> column_sums(const Matrix& x) {
  std::vector<double> s(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k) s[k] += x(i, k);
  return s;
}

// Random zero-sum perturbation per column.
Matrix conserving_perturbation(Rng& rng, const Matrix& base, double scale) {
  Matrix p(base.rows(), base.cols());
  for (std::size_t k = 0; k < base.cols(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < base.rows(); ++i) {
      p(i, k) = std::normal_distribution<double>(0.0, scale)(rng);
      mean += p(i, k);
    }
    mean /= static_cast<double>(base.rows());
    for (std::size_t i = 0; i < base.rows(); ++i) p(i, k) = base(i, k) + p(i, k) - mean;
  }
  return p;
}

}  // namespace

TEST_SUITE("guidance") {

TEST_CASE("reference state examples") {
  const std::vector<double> c40{40.0};
  auto r = reference_state(column({32, 32}), c40);
  CHECK(r.values(0, 0) == 20.0);
  CHECK(r.values(1, 0) == 20.0);

  const std::vector<double> c48{48.0};
  r = reference_state(column({32, 64}), c48);
  CHECK(r.values(0, 0) == doctest::Approx(16.0));
  CHECK(r.values(1, 0) == doctest::Approx(32.0));
  const Matrix qp = oracles::qp_reference(column({32, 64}), c48);
  CHECK(std::abs(qp(0, 0) - 16.0) < 1e-8);
  CHECK(std::abs(qp(1, 0) - 32.0) < 1e-8);

  const std::vector<double> zero{0.0};
  r = reference_state(column({32, 64}), zero);
  CHECK(r.values(0, 0) == 0.0);
  CHECK(r.values(1, 0) == 0.0);

  CHECK_THROWS_AS(reference_state(column({0, 0}), c40), std::invalid_argument);
  const std::vector<double> neg{-1.0};
  CHECK_THROWS_AS(reference_state(column({1, 1}), neg), std::invalid_argument);
}

TEST_CASE("reference state conserves load and balances utilization") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix mu = random_capacity(rng, 1 + trial % 20);
    const std::vector<double> c{uniform01(rng) * 500, uniform01(rng) * 2000};
    const auto ref = reference_state(mu, c);
    const auto sums = column_sums(ref.values);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(sums[k] == doctest::Approx(c[k]).epsilon(1e-12));
      for (std::size_t i = 1; i < mu.rows(); ++i)
        CHECK(ref.values(i, k) / mu(i, k) == doctest::Approx(ref.values(0, k) / mu(0, k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("reference state is exogenous") {
  const auto& scale = env::scale_by_servers(10);
  const auto scn = env::make_scenario(scale, 3);
  const std::vector<double> c{100.0, 300.0};
  const auto a = reference_state(scn.fleet, c);
  const auto b = reference_state(scn.fleet, c);
  CHECK(a.values == b.values);
}

TEST_CASE("deviation examples") {
  const std::vector<double> c{0.0};
  const auto ref = reference_state(column({1, 1, 1}), c);
  CHECK(deviation(Matrix(3, 1), ref) == 0.0);
  CHECK(deviation(column({3, 4, 0}), ref) == doctest::Approx(12.5));
  CHECK_THROWS_AS(deviation(Matrix(2, 1), ref), std::invalid_argument);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    Matrix x(3, 1);
    for (auto& v : x.flat()) v = std::normal_distribution<double>(0.0, 10.0)(rng);
    CHECK(deviation(x, ref) >= 0.0);
  }
}

TEST_CASE("guidance coefficient examples") {
  Matrix x(2, 2), xref(2, 2);
  x(1, 0) = 10;
  x(1, 1) = 20;
  xref(1, 0) = 8;
  xref(1, 1) = 16;
  ReferenceState ref{xref, {8.0, 16.0}};
  const std::vector<double> w{2.0, 4.0};
  CHECK(guidance_coefficient(x, ref, w, 1) == doctest::Approx(20.0));

  const double eps = 1e-6;
  Matrix moved = x;
  const Matrix z = influence_vector(2, w, 1);
  for (std::size_t i = 0; i < moved.size(); ++i) moved.flat()[i] += eps * z.flat()[i];
  CHECK((deviation(moved, ref) - deviation(x, ref)) / eps == doctest::Approx(20.0).epsilon(1e-5));

  ReferenceState same{x, {10.0, 20.0}};
  CHECK(guidance_coefficient(x, same, w, 0) == 0.0);
  CHECK(guidance_coefficient(x, same, w, 1) == 0.0);
  CHECK(guidance_coefficient(x, ref, w, 1) > 0.0);
  CHECK_THROWS(guidance_coefficient(x, ref, w, 2));
}

TEST_CASE("guidance coefficient matches finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 15;
    const Matrix mu = random_capacity(rng, n);
    const Matrix x = random_load(rng, mu);
    const auto ref = reference_state(mu, column_sums(x));
    const std::vector<double> w{0.5 + uniform01(rng) * 10, 1 + uniform01(rng) * 60};
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const double g = guidance_coefficient(x, ref, w, j);
    const double eps = 1e-6;
    const Matrix z = influence_vector(n, w, j);
    Matrix moved = x;
    for (std::size_t i = 0; i < moved.size(); ++i) moved.flat()[i] += eps * z.flat()[i];
    const double fd = (deviation(moved, ref) - deviation(x, ref)) / eps;
    CHECK(std::abs(fd - g) <= 1e-4 * std::max(1.0, std::abs(g)));
  }
}

TEST_CASE("step coefficients use the pre-placement load") {
  env::StepInfo info;
  info.util_before = Matrix(2, 2);
  info.util_before(0, 0) = 10;
  info.util_before(0, 1) = 10;
  info.pressure = {10.0, 10.0};
  info.servers = {0, 1};
  info.demands = {{1.0, 1.0}, {1.0, 1.0}};
  Matrix mu(2, 2, 20.0);
  // Nothing queued: both bases agree.
  const auto g = step_coefficients(info, mu);
  CHECK(g[0] == doctest::Approx(10.0));
  CHECK(g[1] == doctest::Approx(-10.0));
  CHECK(step_coefficients(info, mu, LoadBasis::Running) == g);

  // 30 units queued: the default pressure basis sees them, running does not.
  info.pressure = {40.0, 40.0};
  const auto pres = step_coefficients(info, mu);
  CHECK(pres[0] == doctest::Approx(-20.0));
  CHECK(pres[1] == doctest::Approx(-40.0));
  CHECK(step_coefficients(info, mu, LoadBasis::Running) == g);
}

TEST_CASE("load imbalance examples") {
  const Matrix mu = column({2, 2});
  CHECK(load_imbalance(column({1, 1}), mu) == doctest::Approx(1.0));
  CHECK(load_imbalance(column({2, 0}), mu) == doctest::Approx(2.0));
  CHECK(load_imbalance(column({0, 0}), mu) == 0.0);
}

TEST_CASE("alignment examples") {
  const Matrix mu = column({2, 2});
  CHECK(alignment_inner_product(column({1, 1}), column({1, 1}), mu) == 0.0);
  CHECK(alignment_inner_product(column({2, 0}), column({1, 1}), mu) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(alignment_inner_product(column({2, 1}), column({1, 1}), mu), std::invalid_argument);
}

TEST_CASE("alignment is strictly negative away from the reference") {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 19;
    const Matrix mu = random_capacity(rng, n);
    const Matrix x = random_load(rng, mu);
    const auto ref = reference_state(mu, column_sums(x));
    CHECK(alignment_inner_product(x, ref.values, mu) < 0.0);
    CHECK(std::abs(alignment_inner_product(ref.values, ref.values, mu)) <= 1e-12);
  }
}

TEST_CASE("reference minimizes the load imbalance") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix mu = random_capacity(rng, 2 + trial % 10);
    const auto ref = reference_state(mu, std::vector<double>{100.0 + trial, 300.0});
    const double j_ref = load_imbalance(ref.values, mu);
    for (int p = 0; p < 100; ++p) {
      const Matrix x = conserving_perturbation(rng, ref.values, 5.0);
      CHECK(load_imbalance(x, mu) >= j_ref - 1e-9);
    }
    CHECK(load_imbalance(ref.values, mu) == j_ref);
  }
}

TEST_CASE("running norm") {
  RunningNorm fresh;
  const double first = normalize_signal(3.0, fresh);
  CHECK(first >= -3.0);
  CHECK(first <= 3.0);

  RunningNorm constant;
  double out = 1.0;
  for (int i = 0; i < 3000; ++i) out = normalize_signal(5.0, constant);
  CHECK(std::abs(out) < 1e-3);

  RunningNorm noisy;
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = normalize_signal(n(rng), noisy);
    worst = std::max(worst, std::abs(v));
  }
  CHECK(worst <= 3.0);
  CHECK(noisy.var() == doctest::Approx(4.0).epsilon(0.15));
}

}  // TEST_SUITE
