#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "dgpg/env/arrivals.hpp"
#include "dgpg/env/cluster.hpp"
#include "dgpg/env/job.hpp"
#include "dgpg/env/observation.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/env/server_spec.hpp"
#include "helpers.hpp"

using namespace dgpg;
using namespace dgpg::env;
using testing_support::make_server;
using testing_support::make_test_job;
using testing_support::quiet_scenario;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Mean of LogNormal(mu, sigma) clipped to [a, b], in closed form.
double clipped_lognormal_mean(double mu, double sigma, double a, double b) {
  const double za = (std::log(a) - mu) / sigma;
  const double zb = (std::log(b) - mu) / sigma;
  const double body = std::exp(mu + sigma * sigma / 2) * (normal_cdf(zb - sigma) - normal_cdf(za - sigma));
  return a * normal_cdf(za) + b * (1.0 - normal_cdf(zb)) + body;
}

std::uint64_t jobs_in_system(const Simulator& sim) {
  const auto& st = sim.state();
  return st.global_buffer.size() + st.total_queued() + st.total_running() + sim.jobs_completed();
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("catalog has twelve instance types with unit mass") {
  const auto types = builtin_server_types();
  REQUIRE(types.size() == 12);
  double mass = 0.0;
  for (const auto& t : types) {
    mass += t.sample_weight;
    CHECK(t.vcpus > 0);
    CHECK(t.mem_gb > 0);
    CHECK(t.eta_cpu > 0);
    CHECK(t.eta_cpu <= 1.08);
    CHECK(t.eta_mem <= 0.96);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  const auto& m5 = server_type("m5.8xlarge");
  CHECK(m5.vcpus == 32);
  CHECK(m5.mem_gb == 128.0);
  CHECK(m5.eta_cpu == 0.95);
  CHECK(server_type("c6i.32xlarge").eta_mem == 0.96);
  CHECK_THROWS_AS(server_type("nope"), std::out_of_range);
}

TEST_CASE("sample_fleet with all mass on one type") {
  std::vector<ServerSpec> cat(builtin_server_types().begin(), builtin_server_types().end());
  for (auto& t : cat) t.sample_weight = t.instance_name == "m5.8xlarge" ? 1.0 : 0.0;
  Rng rng(3);
  const auto fleet = sample_fleet(1, rng, cat);
  REQUIRE(fleet.size() == 1);
  CHECK(fleet[0].vcpus == 32);
  CHECK(fleet[0].mem_gb == 128.0);
  CHECK(fleet[0].eta_cpu == 0.95);
}

TEST_CASE("sample_fleet rejects n = 0 and is uniform over equal weights") {
  Rng rng(5);
  CHECK_THROWS_AS(sample_fleet(0, rng), std::invalid_argument);
  std::vector<ServerSpec> cat(builtin_server_types().begin(), builtin_server_types().end());
  for (auto& t : cat) t.sample_weight = 1.0;
  std::map<std::string, int> freq;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) freq[sample_fleet(1, rng, cat)[0].instance_name]++;
  CHECK(freq.size() == 12);
  for (const auto& [name, n] : freq) CHECK(n / double(draws) == doctest::Approx(1.0 / 12).epsilon(0.08));
}

TEST_CASE("Gen-2 share of a large fleet") {
  Rng rng(11);
  const auto fleet = sample_fleet(10000, rng);
  const auto gen2 = std::count_if(fleet.begin(), fleet.end(),
                                  [](const ServerSpec& s) { return s.generation == Generation::Gen2; });
  CHECK(std::abs(gen2 / 10000.0 - 0.60) <= 0.02);
}

TEST_CASE("job clipping rules") {
  const Job big = make_job(JobKind::CpuIntensive, 25.0, 2.0, 30.0, 7);
  CHECK(big.cpu_req == 20.0);
  CHECK(big.mem_req == 40.0);
  CHECK(big.arrival_t == 7);
  const Job mem = make_job(JobKind::MemIntensive, 2.0, 8.0, 30.0, 0);
  CHECK(mem.mem_req == 16.0);
  const Job tiny = make_job(JobKind::MemIntensive, 0.05, 6.0, 1.0, 0);
  CHECK(tiny.cpu_req == 0.2);
  CHECK(tiny.mem_req == doctest::Approx(1.2));
  CHECK(tiny.duration_base == 5.0);
  CHECK(make_job(JobKind::CpuIntensive, 1.0, 2.0, 400.0, 0).duration_base == 150.0);
}

TEST_CASE("sampled jobs respect their kind's bounds") {
  Rng rng(17);
  for (int i = 0; i < 20000; ++i) {
    const Job j = sample_job(rng, i);
    if (j.kind == JobKind::CpuIntensive) {
      CHECK(j.cpu_req >= 0.5);
      CHECK(j.cpu_req <= 20.0);
      CHECK(j.mem_req >= 0.5);
      CHECK(j.mem_req <= 64.0);
    } else {
      CHECK(j.cpu_req >= 0.2);
      CHECK(j.cpu_req <= 8.0);
      CHECK(j.mem_req >= 1.0);
      CHECK(j.mem_req <= 128.0);
    }
    CHECK(j.duration_base >= 5.0);
    CHECK(j.duration_base <= 150.0);
  }
}

TEST_CASE("duration distribution matches the clipped log-normal") {
  Rng rng(23);
  std::vector<double> d;
  for (int i = 0; i < 100000; ++i) d.push_back(sample_job(rng, 0).duration_base);
  const double oracle = clipped_lognormal_mean(3.0, 0.5, 5.0, 150.0);
  CHECK(oracle == doctest::Approx(22.76).epsilon(0.01));
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  CHECK(std::abs(mean - oracle) < 0.2);
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  CHECK(d[d.size() / 2] == doctest::Approx(std::exp(3.0)).epsilon(0.02));
}

TEST_CASE("arrival rate shape") {
  CHECK(arrival_rate(0, 2.0, 0.0) == doctest::Approx(2.0));
  CHECK(arrival_rate(250, 1.0, 0.0) == doctest::Approx(1.3));
  CHECK(arrival_rate(750, 1.0, -0.5) == doctest::Approx(0.2));
  CHECK(arrival_rate(750, 1.0, -2.0) == doctest::Approx(0.1));
  CHECK_THROWS(arrival_rate(0, 0.0, 0.0));
}

TEST_CASE("base-rate calibration") {
  const std::vector<ServerSpec> one{make_server(10, 40.0, 1.0)};
  const WorkloadStats stats{2.0, 10.0};
  CHECK(calibrate_base_rate(one, 0.8, stats) == doctest::Approx(0.4));
  CHECK(calibrate_base_rate(one, 1e-9, stats) < 1e-9);
  const std::vector<ServerSpec> two{make_server(20, 40.0, 1.0)};
  CHECK(calibrate_base_rate(two, 0.8, stats) == doctest::Approx(0.8));
  CHECK_THROWS(calibrate_base_rate({}, 0.8, stats));
  CHECK_THROWS(calibrate_base_rate(one, 1.0, stats));
}

TEST_CASE("poisson quantile") {
  CHECK(poisson_quantile(1.0, 0.5) == 1);
  CHECK(poisson_quantile(1e-6, 0.999) == 0);
  // P(X <= 9 | mean 3) = 0.99890, P(X <= 10) = 0.99971
  CHECK(poisson_quantile(3.0, 0.999) == 10);
}

TEST_CASE("scale table") {
  const auto scales = builtin_scales();
  REQUIRE(scales.size() == 7);
  const std::size_t expect[7][3] = {{2, 2, 1}, {5, 5, 1}, {10, 10, 1}, {20, 20, 1},
                                    {50, 25, 2}, {100, 25, 4}, {200, 40, 5}};
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(scales[i].n_servers == expect[i][0]);
    CHECK(scales[i].n_clusters == expect[i][1]);
    CHECK(scales[i].servers_per_cluster == expect[i][2]);
    CHECK(scales[i].n_servers == scales[i].n_clusters * scales[i].servers_per_cluster);
    CHECK((scales[i].obs_mode == ObsMode::Compressed) == (scales[i].n_servers >= 200));
    CHECK(concurrent_slots(scales[i]) >= 1);
  }
  CHECK(scale_by_servers(50).name == scale_by_name("medium").name);
  CHECK_THROWS(scale_by_name("galactic"));
}

TEST_CASE("scenario generation is a pure function of the seed") {
  const auto& sc = scale_by_servers(20);
  const Scenario a = make_scenario(sc, 99);
  const Scenario b = make_scenario(sc, 99);
  const Scenario c = make_scenario(sc, 100);
  CHECK(a.fleet == b.fleet);
  CHECK(a.base_rate == b.base_rate);
  CHECK(a.fleet.size() == 20);
  CHECK(a.base_rate > 0);
  CHECK((a.fleet != c.fleet || a.base_rate != c.base_rate));
}

TEST_CASE("step on an empty system") {
  Simulator sim(quiet_scenario({make_server(8, 32.0)}));
  const auto r = sim.step({});
  CHECK(sim.state().t == 1);
  CHECK(r.reward == 0.0);
  CHECK(sim.state().empty());
}

TEST_CASE("completion time scales with 1/eta") {
  for (double eta : {1.0, 0.5}) {
    Simulator sim(quiet_scenario({make_server(8, 32.0, eta)}));
    sim.inject(make_test_job(2.0, 4.0, 10.0));
    const std::vector<std::size_t> place{0};
    sim.step(place);
    const int expected = static_cast<int>(10.0 / eta);
    int t_done = -1;
    for (int t = 1; t <= 40; ++t) {
      const auto& u = sim.state().servers[0].util;
      if (t < expected) {
        CHECK(u[kCpu] == 2.0);
        CHECK(u[kMem] == 4.0);
      } else if (t_done < 0) {
        CHECK(u[kCpu] == 0.0);
        t_done = t;
      }
      sim.step({});
    }
    CHECK(t_done == expected);
    CHECK(sim.jobs_completed() == 1);
  }
}

TEST_CASE("step validates placements") {
  Simulator sim(quiet_scenario({make_server(8, 32.0), make_server(8, 32.0)}));
  sim.inject(make_test_job(1.0, 1.0, 5.0));
  const std::vector<std::size_t> bad{2};
  CHECK_THROWS_AS(sim.step(bad), std::invalid_argument);
  CHECK_THROWS_AS(sim.step({}), std::invalid_argument);
}

TEST_CASE("FIFO admission blocks on the head job") {
  Simulator sim(quiet_scenario({make_server(4, 16.0)}));
  sim.inject(make_test_job(3.0, 2.0, 5.0));
  sim.inject(make_test_job(3.0, 2.0, 5.0));
  sim.inject(make_test_job(1.0, 1.0, 5.0));
  const std::vector<std::size_t> place{0, 0, 0};
  sim.step(place);
  const auto& s = sim.state().servers[0];
  CHECK(s.running.size() == 1);
  CHECK(s.local_queue.size() == 2);
  CHECK(s.queued_demand[kCpu] == doctest::Approx(4.0));
}

TEST_CASE("a job too large for its host is stranded but counted") {
  Simulator sim(quiet_scenario({make_server(4, 16.0), make_server(32, 128.0)}));
  sim.inject(make_test_job(8.0, 8.0, 5.0));
  sim.inject(make_test_job(1.0, 1.0, 5.0));
  const std::vector<std::size_t> place{0, 0};
  sim.step(place);
  const auto& s = sim.state().servers[0];
  CHECK(s.stranded.size() == 1);
  CHECK(s.running.size() == 1);
  CHECK(s.queue_len() == 1);
}

TEST_CASE("reward examples") {
  ClusterState st;
  st.servers.resize(2);
  st.servers[0].spec = make_server(8, 32.0);
  st.servers[1].spec = make_server(8, 32.0);
  CHECK(reward(st) == 0.0);
  st.global_buffer.resize(2);
  CHECK(reward(st) == doctest::Approx(-1.0));

  ClusterState one;
  one.servers.resize(1);
  one.servers[0].spec = make_server(32, 128.0, 0.8);
  one.servers[0].util = {8.0, 8.0};
  CHECK(reward(one) == doctest::Approx(-2.5));
}

TEST_CASE("cluster partition") {
  const std::vector<ServerSpec> fleet{make_server(32, 128), make_server(96, 384), make_server(32, 64),
                                      make_server(64, 256)};
  const auto g = cluster_partition(fleet, 2);
  REQUIRE(g.size() == 2);
  CHECK(g[0] == std::vector<std::size_t>{1, 3});
  CHECK(g[1] == std::vector<std::size_t>{0, 2});
  const auto singles = cluster_partition(fleet, 4);
  CHECK(singles[0] == std::vector<std::size_t>{1});
  CHECK(singles[3] == std::vector<std::size_t>{2});
  CHECK_THROWS_AS(cluster_partition(fleet, 3), std::invalid_argument);
}

TEST_CASE("within-cluster best fit") {
  const std::vector<ServerSpec> fleet{make_server(10, 100), make_server(10, 100)};
  const std::vector<std::size_t> all{0, 1};
  std::vector<ResourceVec> loads{{7.0, 70.0}, {5.0, 50.0}};
  CHECK(within_cluster_bestfit(loads, fleet, all, {1.0, 1.0}) == 0);
  CHECK(within_cluster_bestfit(loads, fleet, all, {6.0, 6.0}) == 1);
  CHECK(within_cluster_bestfit(loads, fleet, all, {9.0, 9.0}) == 1);
  std::vector<ResourceVec> equal{{5.0, 50.0}, {5.0, 50.0}};
  CHECK(within_cluster_bestfit(equal, fleet, all, {1.0, 1.0}) == 0);
  CHECK_THROWS(within_cluster_bestfit(loads, fleet, std::vector<std::size_t>{}, {1.0, 1.0}));
}

TEST_CASE("action resolver in cluster mode spreads a step's jobs") {
  const auto& scale = scale_by_servers(50);
  const Scenario scn = make_scenario(scale, 4);
  Simulator sim(quiet_scenario(scn.fleet));
  ActionResolver res(scn.fleet, scale);
  CHECK(res.act_dim() == 25);
  for (int i = 0; i < 3; ++i) sim.inject(make_test_job(14.0, 20.0, 30.0));
  const std::vector<std::size_t> act{0, 0, 0};
  const auto servers = res.resolve(sim.state(), act);
  for (auto s : servers) CHECK(res.cluster_of(s) == 0);
  // Each cluster has 2 servers; the third 14-core job must not double up on a
  // server that cannot hold two of them.
  std::map<std::size_t, int> count;
  for (auto s : servers) count[s]++;
  for (auto [s, n] : count) CHECK(n * 14.0 <= scn.fleet[s].vcpus + (n > 1 ? 0.0 : 1e9));
}

TEST_CASE("observation dimensions") {
  CHECK(raw_obs_dim(5, 8) == 55);
  CHECK(compressed_obs_dim(40) == 1130);
  const auto& s5 = scale_by_servers(5);
  const Scenario scn = make_scenario(s5, 1);
  ObservationBuilder ob(scn.fleet, s5, 8);
  CHECK(ob.obs_dim() == 55);
  CHECK(ob.local_prefix_dim() == 35);
  const auto& s200 = scale_by_servers(200);
  const Scenario big = make_scenario(s200, 1);
  ObservationBuilder ob2(big.fleet, s200, 50);
  CHECK(ob2.obs_dim() == 1130);
  Simulator sim(big);
  CHECK(ob2.build(sim.state(), make_test_job(1, 1, 5), 0).size() == 1130);
  CHECK_THROWS_AS(build_observation(sim.state(), big.fleet, s200, make_test_job(1, 1, 5), 0, 50, ObsMode::Raw),
                  std::invalid_argument);
}

TEST_CASE("idle raw observation") {
  const auto& s5 = scale_by_servers(5);
  const Scenario scn = make_scenario(s5, 2);
  Simulator sim(quiet_scenario(scn.fleet));
  const auto obs = build_observation(sim.state(), scn.fleet, s5, make_test_job(4, 32, 5), 0, 8, ObsMode::Raw);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(obs[7 * i + 0] == 0.0);
    CHECK(obs[7 * i + 1] == 0.0);
    CHECK(obs[7 * i + 2] == 0.0);
    for (std::size_t f = 3; f < 7; ++f) CHECK(obs[7 * i + f] > 0.0);
  }
  CHECK(obs[51] == doctest::Approx(0.2));
  CHECK(obs[52] == doctest::Approx(0.25));
}

TEST_CASE("simulator invariants under random placement") {
  for (std::size_t n : {5u, 20u}) {
    const auto& scale = scale_by_servers(n);
    const Scenario scn = make_scenario(scale, 1234 + n);
    Simulator a(scn), b(scn);
    ActionResolver res(scn.fleet, scale);
    ObservationBuilder ob(scn.fleet, scale, static_cast<std::size_t>(concurrent_slots(scale)));
    Rng ra(9), rb(9);
    for (int t = 0; t < 600; ++t) {
      auto pick = [&](Simulator& s, Rng& r) {
        std::vector<std::size_t> act(s.state().global_buffer.size());
        for (auto& x : act) x = std::uniform_int_distribution<std::size_t>(0, res.act_dim() - 1)(r);
        return res.resolve(s.state(), act);
      };
      const auto ra_res = a.step(pick(a, ra));
      const auto rb_res = b.step(pick(b, rb));
      REQUIRE(ra_res.reward == rb_res.reward);
      CHECK(ra_res.reward <= 0.0);
      CHECK(jobs_in_system(a) == a.jobs_generated());
      for (const auto& s : a.state().servers)
        for (std::size_t k = 0; k < kResourceDims; ++k) CHECK(s.util[k] <= s.spec.capacity()[k] + 1e-9);
      if (t % 50 == 0 && !a.state().global_buffer.empty()) {
        const auto obs = ob.build(a.state(), a.state().global_buffer[0], 0);
        for (double v : obs) {
          CHECK(std::isfinite(v));
          CHECK(v >= 0.0);
          CHECK(v <= 1.1);
        }
      }
    }
    CHECK(a.state().util_matrix() == b.state().util_matrix());
  }
}

}  // TEST_SUITE

// Kept in its own suite so that its outcome is reported separately.
TEST_SUITE("env-calibration") {

TEST_CASE("random placement lands near the target utilization at N=20") {
  const auto& scale = scale_by_servers(20);
  const Scenario scn = make_scenario(scale, 77);
  Simulator sim(scn);
  Rng rng(1);
  double util_sum = 0.0;
  int samples = 0;
  double cap = 0.0;
  for (const auto& s : scn.fleet) cap += s.vcpus;
  while (sim.state().t < sim.state().arrivals_end) {
    std::vector<std::size_t> place(sim.state().global_buffer.size());
    for (auto& p : place) p = std::uniform_int_distribution<std::size_t>(0, 19)(rng);
    sim.step(place);
    if (sim.state().t >= 200) {
      double used = 0.0;
      for (const auto& s : sim.state().servers) used += s.util[kCpu];
      util_sum += used / cap;
      ++samples;
    }
  }
  const double u = util_sum / samples;
  MESSAGE("time-averaged CPU utilization " << u);
  CHECK(u >= 0.70);
  CHECK(u <= 0.90);
}

}  // TEST_SUITE
