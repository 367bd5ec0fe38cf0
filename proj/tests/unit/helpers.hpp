#pragma once

#include <string>
#include <vector>

#include "dgpg/env/cluster.hpp"
#include "dgpg/env/server_spec.hpp"

namespace testing_support {

inline dgpg::env::ServerSpec make_server(int vcpus, double mem, double eta_cpu = 1.0, double eta_mem = 0.9) {
  dgpg::env::ServerSpec s;
  s.instance_name = "test." + std::to_string(vcpus) + "x" + std::to_string(static_cast<int>(mem));
  s.vcpus = vcpus;
  s.mem_gb = mem;
  s.eta_cpu = eta_cpu;
  s.eta_mem = eta_mem;
  s.sample_weight = 1.0;
  return s;
}

// Scenario with no arrivals; jobs enter only through Simulator::inject.
inline dgpg::env::Scenario quiet_scenario(std::vector<dgpg::env::ServerSpec> fleet, std::uint64_t seed = 1) {
  dgpg::env::Scenario sc;
  sc.seed = seed;
  sc.scale_name = "custom";
  sc.fleet = std::move(fleet);
  sc.base_rate = 0.0;
  return sc;
}

inline dgpg::env::Job make_test_job(double cpu, double mem, double duration) {
  dgpg::env::Job j;
  j.cpu_req = cpu;
  j.mem_req = mem;
  j.duration_base = duration;
  return j;
}

}  // namespace testing_support
