#include "dgpg/variance/variance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "dgpg/common/parallel.hpp"
#include "dgpg/common/rng.hpp"
#include "dgpg/common/stats.hpp"
#include "dgpg/env/cluster.hpp"
#include "dgpg/env/observation.hpp"
#include "dgpg/guidance/guidance.hpp"

namespace dgpg::variance {

namespace {

double denominator(double sj, double sg, double rho) {
  return sj + sg + 2.0 * rho * std::sqrt(sj) * std::sqrt(sg);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double combined_variance(double alpha, double sj, double sg, double rho) {
  const double b = 1.0 - alpha;
  return b * b * sj + alpha * alpha * sg - 2.0 * alpha * b * rho * std::sqrt(sj) * std::sqrt(sg);
}

double optimal_alpha(double sj, double sg, double rho) {
  const double d = denominator(sj, sg, rho);
  if (!(d > 0.0)) throw std::domain_error("optimal_alpha: sigma_j^2 + sigma_g^2 + 2 rho sigma_j sigma_g <= 0");
  return (sj + rho * std::sqrt(sj) * std::sqrt(sg)) / d;
}

double min_variance(double sj, double sg, double rho) {
  const double d = denominator(sj, sg, rho);
  if (!(d > 0.0)) throw std::domain_error("min_variance: sigma_j^2 + sigma_g^2 + 2 rho sigma_j sigma_g <= 0");
  return sj * sg * (1.0 - rho * rho) / d;
}

// ---------------------------------------------------------------- sampling

SampleSet collect(const GradientSampler& sampler, std::size_t dim, std::size_t n, std::size_t n_agents,
                  int threads) {
  if (n < 2) throw std::invalid_argument("collect: need at least two samples");
  // Pass 1: means. Fixed chunking keeps the sums independent of the thread count.
  const std::size_t chunks = std::min<std::size_t>(64, n);
  std::vector<std::vector<double>> part_j(chunks, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> part_g(chunks, std::vector<double>(dim, 0.0));
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<double> gj(dim), gg(dim);
    for (std::size_t i = c * n / chunks; i < (c + 1) * n / chunks; ++i) {
      sampler(i, gj, gg);
      for (std::size_t d = 0; d < dim; ++d) {
        part_j[c][d] += gj[d];
        part_g[c][d] += gg[d];
      }
    }
  });
  std::vector<double> mean_j(dim, 0.0), mean_g(dim, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t d = 0; d < dim; ++d) {
      mean_j[d] += part_j[c][d];
      mean_g[d] += part_g[c][d];
    }
  double norm = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    mean_j[d] /= static_cast<double>(n);
    mean_g[d] /= static_cast<double>(n);
    norm += mean_j[d] * mean_j[d];
  }
  norm = std::sqrt(norm);

  SampleSet set;
  set.n_agents = n_agents;
  set.zero_direction = !(norm > 1e-300);
  set.dist_j.resize(n);
  set.dist_g.resize(n);
  set.proj_j.resize(n);
  set.proj_g.resize(n);
  // Pass 2: per-sample scalars.
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<double> gj(dim), gg(dim);
    for (std::size_t i = c * n / chunks; i < (c + 1) * n / chunks; ++i) {
      sampler(i, gj, gg);
      double dj = 0.0, dg = 0.0, pj = 0.0, pg = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        dj += (gj[d] - mean_j[d]) * (gj[d] - mean_j[d]);
        dg += (gg[d] - mean_g[d]) * (gg[d] - mean_g[d]);
        if (!set.zero_direction) {
          pj += gj[d] * mean_j[d] / norm;
          pg += gg[d] * mean_j[d] / norm;
        }
      }
      set.dist_j[i] = dj;
      set.dist_g[i] = dg;
      set.proj_j[i] = pj;
      set.proj_g[i] = pg;
    }
  });
  return set;
}

EstimatorStats summarize(const SampleSet& set, std::span<const std::size_t> idx) {
  EstimatorStats s;
  s.n_samples = idx.size();
  s.n_agents = set.n_agents;
  if (idx.size() < 2) {
    s.degenerate = true;
    return s;
  }
  // Distances are to the full-sample mean; for a resample this overstates the
  // trace by the squared mean shift, O(trace / n).
  double dj = 0.0, dg = 0.0;
  MomentAccumulator aj, ag;
  double cross = 0.0;
  for (std::size_t i : idx) {
    dj += set.dist_j[i];
    dg += set.dist_g[i];
  }
  const double m = static_cast<double>(idx.size());
  s.sigma_j_sq = dj / (m - 1.0);
  s.sigma_g_sq = dg / (m - 1.0);
  for (std::size_t i : idx) {
    aj.add(set.proj_j[i]);
    ag.add(set.proj_g[i]);
  }
  for (std::size_t i : idx) cross += (set.proj_j[i] - aj.mean) * (set.proj_g[i] - ag.mean);
  const double vj = aj.m2, vg = ag.m2;
  const double tiny = 1e-24;
  s.degenerate = set.zero_direction || !(s.sigma_j_sq > tiny) || !(s.sigma_g_sq > tiny) || !(vj > 0.0) ||
                 !(vg > 0.0);
  s.rho = s.degenerate ? 0.0 : std::clamp(cross / std::sqrt(vj * vg), -1.0, 1.0);
  return s;
}

EstimatorStats summarize(const SampleSet& set) {
  std::vector<std::size_t> all(set.dist_j.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return summarize(set, all);
}

// ---------------------------------------------------------------- synthetic game

double synthetic_sigma_j_sq(const SyntheticGame& g) {
  const double n = static_cast<double>(g.n_agents);
  const double t2 = g.tau * g.tau;
  return 0.5 * (t2 + (n - 1.0) * (g.c * g.c + t2));
}

double synthetic_sigma_g_sq(const SyntheticGame& g) { return 0.5 * (g.tau * g.tau + g.kappa * g.kappa); }

// Projections on the mean direction are r a_0 / sqrt 2 and -(m_0 + xi_0) / sqrt 2;
// their covariance is -tau^2 / 2.
double synthetic_rho(const SyntheticGame& g) {
  const double n = static_cast<double>(g.n_agents);
  const double t2 = g.tau * g.tau;
  const double s = t2 + (n - 1.0) * (g.c * g.c + t2);
  return -t2 / std::sqrt(s * (t2 + g.kappa * g.kappa));
}

std::vector<double> synthetic_true_gradient(const SyntheticGame& g) { return {0.5 * g.c, -0.5 * g.c}; }

GradientSampler synthetic_sampler(const SyntheticGame& game, std::uint64_t seed) {
  if (game.n_agents == 0) throw std::invalid_argument("synthetic game needs at least one agent");
  return [game, seed](std::size_t index, std::vector<double>& gj, std::vector<double>& gg) {
    Rng rng(derive_seed(seed, index));
    std::normal_distribution<double> noise(0.0, 1.0);
    double r = 0.0, a0 = 0.0, m0 = 0.0;
    for (std::size_t l = 0; l < game.n_agents; ++l) {
      const double a = uniform01(rng) < 0.5 ? 1.0 : -1.0;
      const double m = game.c + game.tau * noise(rng);
      r += m * a;
      if (l == 0) {
        a0 = a;
        m0 = m;
      }
    }
    const double g = -(m0 + game.kappa * noise(rng)) * a0;
    // d log pi(a) / d (theta_plus, theta_minus) at p = 1/2.
    const double s0 = 0.5 * a0, s1 = -0.5 * a0;
    gj.assign({r * s0, r * s1});
    gg.assign({g * s0, g * s1});
  };
}

EstimatorStats measure_synthetic(const SyntheticGame& game, std::size_t n_samples, std::uint64_t seed,
                                 int threads) {
  return summarize(collect(synthetic_sampler(game, seed), 2, n_samples, game.n_agents, threads));
}

// ---------------------------------------------------------------- cloud

namespace {

class PolicyStepper {
 public:
  PolicyStepper(const policy::PolicyParams& p, const env::ObservationBuilder& b) : p_(p), b_(b) {
    prefix_.resize(b.prefix_dim());
    z_.resize(p.actor.spec().first_dim());
    probs_.resize(p.act_dim);
  }

  // Samples actions for every buffered job.
  void act(const env::ClusterState& state, Rng& rng, std::vector<std::size_t>& actions) {
    actions.resize(state.global_buffer.size());
    if (actions.empty()) return;
    b_.build_prefix(state, prefix_);
    p_.actor.preact_prefix(prefix_.data(), z_.data());
    std::array<double, env::kAgentSuffixDim> suffix{};
    for (std::size_t a = 0; a < actions.size(); ++a) {
      b_.build_suffix(state, state.global_buffer[a], a, suffix);
      p_.actor.forward_suffix(z_.data(), suffix.data(), ws_);
      policy::softmax(ws_.out, probs_);
      actions[a] = policy::sample_categorical(probs_, rng);
    }
  }

 private:
  const policy::PolicyParams& p_;
  const env::ObservationBuilder& b_;
  std::vector<double> prefix_, z_, probs_;
  policy::Workspace ws_;
};

}  // namespace

GradientSampler cloud_sampler(const CloudSetup& setup, const policy::PolicyParams& params, std::uint64_t seed,
                              std::size_t* dim_out) {
  if (setup.n_start_states == 0 || setup.horizon <= 0 || setup.warmup_min < 0 ||
      setup.warmup_max < setup.warmup_min)
    throw std::invalid_argument("cloud_sampler: bad setup");
  const auto& scale = setup.scale;
  const std::size_t slots = static_cast<std::size_t>(env::concurrent_slots(scale));
  const std::size_t obs_dim = scale.obs_mode == env::ObsMode::Raw
                                  ? env::raw_obs_dim(scale.n_servers, slots)
                                  : env::compressed_obs_dim(scale.n_clusters);
  if (params.obs_dim != obs_dim || params.act_dim != scale.act_dim())
    throw std::invalid_argument("cloud_sampler: policy shape does not match scale " + scale.name);

  // Start states: episodes under the frozen policy, stopped after a random
  // warm-up at a step with at least one buffered job.
  auto starts = std::make_shared<std::vector<env::Simulator>>();
  auto fleets = std::make_shared<std::vector<env::Scenario>>();
  for (std::size_t s = 0; s < setup.n_start_states; ++s) {
    Rng rng(derive_seed(seed, 0x5747 + s));
    fleets->push_back(env::make_scenario(scale, derive_seed(seed, 0x8000 + s)));
    const auto& sc = fleets->back();
    env::Simulator sim(sc, scale.episode_len, scale.arrivals_end);
    const env::ActionResolver resolver(sc.fleet, scale);
    const env::ObservationBuilder builder(sc.fleet, scale, slots);
    PolicyStepper stepper(params, builder);
    std::vector<std::size_t> actions;
    const int warm = std::uniform_int_distribution<int>(setup.warmup_min, setup.warmup_max)(rng);
    while (!sim.done() && (sim.state().t < warm || sim.state().global_buffer.empty())) {
      stepper.act(sim.state(), rng, actions);
      sim.step(resolver.resolve(sim.state(), actions));
    }
    if (sim.done() || sim.state().global_buffer.empty())
      throw std::runtime_error("cloud_sampler: no start state with a buffered job");
    starts->push_back(sim);
  }
  if (dim_out) *dim_out = params.actor.size();

  auto frozen = std::make_shared<const policy::PolicyParams>(params);
  return [starts, fleets, setup, frozen, seed, slots](std::size_t index, std::vector<double>& gj,
                                                      std::vector<double>& gg) {
    const auto& params = *frozen;
    const std::size_t s = index % starts->size();
    const auto& sc = (*fleets)[s];
    env::Simulator sim = (*starts)[s];
    const env::ActionResolver resolver(sc.fleet, setup.scale);
    const env::ObservationBuilder builder(sc.fleet, setup.scale, slots);
    const Matrix capacity = guidance::capacity_matrix(sc.fleet);
    PolicyStepper stepper(params, builder);
    Rng rng(derive_seed(seed ^ 0xa5a5a5a5ULL, index));
    std::vector<std::size_t> actions;

    stepper.act(sim.state(), rng, actions);
    const auto obs = builder.build(sim.state(), sim.state().global_buffer[0], 0);
    const auto grad = policy::grad_log_prob_and_value(params, obs, actions[0], 0.0);
    auto first = sim.step(resolver.resolve(sim.state(), actions));
    const double g = guidance::step_coefficients(first.info, capacity)[0];
    double ret = first.reward, disc = 1.0;
    for (int h = 1; h < setup.horizon && !sim.done(); ++h) {
      stepper.act(sim.state(), rng, actions);
      disc *= setup.gamma;
      ret += disc * sim.step(resolver.resolve(sim.state(), actions)).reward;
    }
    gj.resize(grad.actor.size());
    gg.resize(grad.actor.size());
    for (std::size_t d = 0; d < grad.actor.size(); ++d) {
      gj[d] = ret * grad.actor[d];
      gg[d] = g * grad.actor[d];
    }
  };
}

EstimatorStats measure_cloud(const CloudSetup& setup, const policy::PolicyParams& params, std::size_t n_samples,
                             std::uint64_t seed, int threads) {
  std::size_t dim = 0;
  const auto sampler = cloud_sampler(setup, params, seed, &dim);
  return summarize(collect(sampler, dim, n_samples, setup.scale.n_servers, threads));
}

// ---------------------------------------------------------------- scaling

namespace {

SlopeCI bootstrap_slope(const std::vector<double>& xs, const std::vector<SampleSet>& sets, bool use_j,
                        const ScalingOptions& o) {
  auto pick = [&](const EstimatorStats& s) { return use_j ? s.sigma_j_sq : s.sigma_g_sq; };
  std::vector<double> ys;
  for (const auto& set : sets) ys.push_back(pick(summarize(set)));
  SlopeCI ci;
  ci.slope = least_squares(xs, ys).slope;
  if (o.bootstrap == 0) {
    ci.lo = ci.hi = ci.slope;
    return ci;
  }
  Rng rng(derive_seed(o.seed, use_j ? 0xb0b1 : 0xb0b2));
  std::vector<double> slopes;
  slopes.reserve(o.bootstrap);
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < o.bootstrap; ++b) {
    for (std::size_t k = 0; k < sets.size(); ++k) {
      const std::size_t n = sets[k].dist_j.size();
      std::uniform_int_distribution<std::size_t> u(0, n - 1);
      idx.resize(n);
      for (auto& i : idx) i = u(rng);
      ys[k] = pick(summarize(sets[k], idx));
    }
    slopes.push_back(least_squares(xs, ys).slope);
  }
  std::sort(slopes.begin(), slopes.end());
  const double tail = (1.0 - o.confidence) / 2.0;
  ci.lo = sorted_quantile(slopes, tail);
  ci.hi = sorted_quantile(slopes, 1.0 - tail);
  return ci;
}

}  // namespace

ScalingReport scaling_experiment(std::span<const std::size_t> ns, const ScalingOptions& o) {
  std::vector<std::size_t> distinct(ns.begin(), ns.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw std::invalid_argument("scaling_experiment: need at least four distinct N");
  if (o.env != "synthetic" && o.env != "cloud")
    throw std::invalid_argument("scaling_experiment: unknown environment " + o.env);

  ScalingReport report;
  report.env = o.env;
  std::vector<SampleSet> sets;
  std::vector<double> xs;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const std::size_t n = ns[k];
    const std::uint64_t seed = derive_seed(o.seed, n);
    ScalingRow row;
    row.n = n;
    if (o.env == "synthetic") {
      SyntheticGame game = o.game;
      game.n_agents = n;
      sets.push_back(collect(synthetic_sampler(game, seed), 2, o.samples, n, o.threads));
      row.oracle_sigma_j_sq = synthetic_sigma_j_sq(game);
      row.oracle_sigma_g_sq = synthetic_sigma_g_sq(game);
    } else {
      CloudSetup setup;
      setup.scale = env::scale_by_servers(n);
      setup.horizon = o.horizon;
      policy::PolicyConfig pc;
      pc.arch = policy::Arch::Linear;
      const std::size_t slots = static_cast<std::size_t>(env::concurrent_slots(setup.scale));
      pc.prefix_dim = (setup.scale.obs_mode == env::ObsMode::Raw
                           ? env::raw_obs_dim(n, slots)
                           : env::compressed_obs_dim(setup.scale.n_clusters)) -
                      env::kAgentSuffixDim;
      pc.critic_prefix_dim = pc.prefix_dim;
      pc.act_dim = setup.scale.act_dim();
      pc.id_scale = slots;
      const auto params = policy::make_policy(pc, seed);  // linear heads start at zero: uniform policy
      std::size_t dim = 0;
      const auto sampler = cloud_sampler(setup, params, seed, &dim);
      sets.push_back(collect(sampler, dim, o.samples, n, o.threads));
      row.oracle_sigma_j_sq = row.oracle_sigma_g_sq = kNaN;
    }
    row.stats = summarize(sets.back());
    try {
      row.alpha_star = optimal_alpha(row.stats.sigma_j_sq, row.stats.sigma_g_sq, row.stats.rho);
      row.min_var = min_variance(row.stats.sigma_j_sq, row.stats.sigma_g_sq, row.stats.rho);
    } catch (const std::domain_error&) {
      row.alpha_star = row.min_var = kNaN;
    }
    report.rows.push_back(row);
    xs.push_back(static_cast<double>(n));
  }
  report.slope_j = bootstrap_slope(xs, sets, true, o);
  report.slope_g = bootstrap_slope(xs, sets, false, o);
  return report;
}

void write_scaling_csv(const ScalingReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "N,sigma_j_sq,sigma_g_sq,rho,alpha_star,min_variance,oracle_sigma_j_sq,oracle_sigma_g_sq,n_samples,"
         "degenerate\n";
  for (const auto& r : report.rows)
    out << r.n << ',' << r.stats.sigma_j_sq << ',' << r.stats.sigma_g_sq << ',' << r.stats.rho << ','
        << r.alpha_star << ',' << r.min_var << ',' << r.oracle_sigma_j_sq << ',' << r.oracle_sigma_g_sq << ','
        << r.stats.n_samples << ',' << (r.stats.degenerate ? 1 : 0) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ScalingRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 10) throw std::runtime_error(path.string() + ": malformed row");
    ScalingRow r;
    r.n = std::stoul(fields[0]);
    r.stats.sigma_j_sq = std::stod(fields[1]);
    r.stats.sigma_g_sq = std::stod(fields[2]);
    r.stats.rho = std::stod(fields[3]);
    r.alpha_star = std::stod(fields[4]);
    r.min_var = std::stod(fields[5]);
    r.oracle_sigma_j_sq = std::stod(fields[6]);
    r.oracle_sigma_g_sq = std::stod(fields[7]);
    r.stats.n_samples = std::stoul(fields[8]);
    r.stats.degenerate = fields[9] == "1";
    r.stats.n_agents = r.n;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dgpg::variance
