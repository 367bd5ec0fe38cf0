// Command-line front end: scenario generation, training, evaluation,
// variance experiments, experiment plans and plot-data export.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/harness/csv.hpp"
#include "dgpg/harness/plan.hpp"
#include "dgpg/harness/scenarios.hpp"
#include "dgpg/policy/policy.hpp"
#include "dgpg/trainer/training.hpp"
#include "dgpg/variance/variance.hpp"

namespace fs = std::filesystem;
using namespace dgpg;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRunFailure = 2;

// Bad flags or inputs the user can fix; exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  int threads = 1;
};

const env::ScaleConfig& scale_arg(const std::string& name) {
  try {
    return env::scale_by_name(name);
  } catch (const std::out_of_range&) {
    // numeric server counts are accepted too
    try {
      std::size_t pos = 0;
      const auto n = std::stoul(name, &pos);
      if (pos == name.size()) return env::scale_by_servers(n);
    } catch (const std::exception&) {
    }
    std::string names;
    for (const auto& s : env::builtin_scales()) names += " " + s.name;
    throw UsageError("unknown scale '" + name + "'; choose one of:" + names);
  }
}

template <class F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const std::out_of_range& e) {
    throw UsageError(e.what());
  }
}

void print_eval(const std::string& what, const trainer::EvalResult& r) {
  std::printf("%s: mean %.3f std %.3f over %zu scenarios\n", what.c_str(), r.mean, r.std, r.per_scenario.size());
}

// --- gen-scenarios ---------------------------------------------------------

struct GenArgs {
  std::vector<std::string> scales{"small"};
  std::size_t n_train = 200;
  std::size_t n_test = 40;
  bool force = false;
};

int cmd_gen(const Globals& g, const GenArgs& a) {
  const fs::path root = g.out.empty() ? fs::path("scenarios") : fs::path(g.out);
  std::vector<const env::ScaleConfig*> scales;
  for (const auto& s : a.scales) {
    if (s == "all") {
      for (const auto& b : env::builtin_scales()) scales.push_back(&b);
    } else {
      scales.push_back(&scale_arg(s));
    }
  }
  harness::GenOptions opt;
  opt.n_train = a.n_train;
  opt.n_test = a.n_test;
  opt.master_seed = g.seed;
  opt.force = a.force;
  opt.threads = g.threads;
  for (const auto* s : scales)
    if (!a.force && fs::exists(root / s->name) && !fs::is_empty(root / s->name))
      throw UsageError((root / s->name).string() + " is not empty; pass --force to overwrite");
  for (const auto* s : scales) {
    const auto files = harness::gen_scenarios(*s, root, opt);
    std::printf("%s: wrote %zu scenarios under %s\n", s->name.c_str(), files.size(), (root / s->name).c_str());
  }
  return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string algo = "dgpg";
  std::string scale = "small";
  std::string arch = "linear";
  std::optional<int> episodes;
  std::string scenarios = "scenarios";
  bool greedy = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  harness::ExperimentPlan plan = as_usage([&] {
    harness::ExperimentPlan p;
    p.name = "train";
    p.scales = {scale_arg(a.scale).name};
    const auto algo = harness::parse_algo(a.algo);
    if (algo.kind != harness::AlgoSpec::Kind::Learner)
      throw UsageError("train needs a learning algorithm (dgpg, dgpg@<alpha>, mappo, ippo)");
    p.algorithms = {algo.label};
    p.seeds = {g.seed};
    p.arch = trainer::parse_arch(a.arch);
    p.episodes = a.episodes;
    p.greedy_eval = a.greedy;
    p.threads = g.threads;
    p.scenario_dir = a.scenarios;
    p.output_dir = g.out.empty() ? fs::path("runs") / "train" : fs::path(g.out);
    if (!g.config.empty()) p.overrides = KvDocument::load(g.config);
    harness::cell_config(p, algo, scale_arg(a.scale));  // surface config errors as usage errors
    return p;
  });
  harness::PlanHooks hooks;
  hooks.log = [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); };
  const auto rep = harness::run_plan(plan, hooks);
  const auto& cell = rep.cells.at(0);
  if (!cell.ok) {
    std::fprintf(stderr, "training failed: %s\n", cell.message.c_str());
    return kRunFailure;
  }
  std::printf("checkpoint: %s\n", (harness::cell_dir(plan, plan.scales[0], plan.algorithms[0], g.seed) / "best.ckpt").c_str());
  std::printf("test reward: %s\n", rep.summary.rows.at(0).at(1).c_str());
  return kOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string algo;
  std::string scale = "small";
  std::string split = "test";
  std::string scenarios = "scenarios";
  bool greedy = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  if (a.checkpoint.empty() == a.algo.empty()) throw UsageError("eval needs exactly one of --checkpoint or --algo");
  const auto& scale = scale_arg(a.scale);
  const auto split = as_usage([&] { return harness::parse_split(a.split); });
  const auto scns = harness::load_split(a.scenarios, scale.name, split);
  trainer::EvalResult r;
  std::string what;
  if (!a.checkpoint.empty()) {
    const auto params = policy::load_checkpoint(a.checkpoint);
    r = as_usage([&] { return trainer::evaluate(params, scns, scale, a.greedy, g.seed, g.threads); });
    what = a.checkpoint;
  } else {
    const auto kind = as_usage([&] {
      if (a.algo == "bestfit") return baselines::HeuristicKind::BestFit;
      if (a.algo == "random") return baselines::HeuristicKind::Random;
      throw UsageError("--algo must be bestfit or random");
    });
    r = trainer::evaluate_heuristic(kind, scns, scale, g.seed, g.threads);
    what = a.algo;
  }
  print_eval(what + " on " + scale.name + "/" + a.split, r);
  if (!g.out.empty()) {
    harness::CsvTable t;
    t.header = {"scenario", "seed", "reward"};
    for (std::size_t i = 0; i < r.per_scenario.size(); ++i)
      t.rows.push_back({std::to_string(i), std::to_string(scns[i].seed), harness::format_number(r.per_scenario[i])});
    harness::write_csv(g.out, t);
  }
  return kOk;
}

// --- variance --------------------------------------------------------------

struct VarianceArgs {
  std::string env = "synthetic";
  std::vector<std::string> scales{"2", "4", "8", "16", "32"};
  std::size_t samples = 20000;
  std::size_t bootstrap = 1000;
  double tau = 0.5;
  double kappa = 0.5;
};

int cmd_variance(const Globals& g, const VarianceArgs& a) {
  variance::ScalingOptions opt;
  opt.env = a.env;
  if (opt.env != "synthetic" && opt.env != "cloud") throw UsageError("--env must be synthetic or cloud");
  opt.samples = a.samples;
  opt.bootstrap = a.bootstrap;
  opt.seed = g.seed;
  opt.threads = g.threads;
  opt.game.tau = a.tau;
  opt.game.kappa = a.kappa;
  std::vector<std::size_t> ns;
  for (const auto& s : a.scales) {
    if (opt.env == "cloud") {
      ns.push_back(scale_arg(s).n_servers);
    } else {
      ns.push_back(as_usage([&] {
        const long v = parse_long("scales", s);
        if (v < 1) throw std::invalid_argument("agent counts must be positive");
        return static_cast<std::size_t>(v);
      }));
    }
  }
  const auto rep = as_usage([&] { return variance::scaling_experiment(ns, opt); });
  std::printf("%6s %14s %14s %9s %9s\n", "N", "sigma_J^2", "sigma_G^2", "rho", "alpha*");
  for (const auto& r : rep.rows)
    std::printf("%6zu %14.6g %14.6g %9.4f %9.4f\n", r.n, r.stats.sigma_j_sq, r.stats.sigma_g_sq, r.stats.rho,
                r.alpha_star);
  std::printf("slope J %.5g [%.5g, %.5g]\n", rep.slope_j.slope, rep.slope_j.lo, rep.slope_j.hi);
  std::printf("slope G %.5g [%.5g, %.5g]\n", rep.slope_g.slope, rep.slope_g.lo, rep.slope_g.hi);
  if (!g.out.empty()) {
    variance::write_scaling_csv(rep, g.out);
    std::printf("wrote %s\n", g.out.c_str());
  }
  return kOk;
}

// --- run-plan --------------------------------------------------------------

struct PlanArgs {
  std::optional<int> workers;
};

int cmd_run_plan(const Globals& g, const PlanArgs& a) {
  if (g.config.empty()) throw UsageError("run-plan needs --config <plan file>");
  auto plan = as_usage([&] { return harness::load_plan(g.config); });
  if (!g.out.empty()) plan.output_dir = g.out;
  if (g.threads != 1) plan.threads = g.threads;
  if (a.workers) plan.workers = *a.workers;
  harness::PlanHooks hooks;
  hooks.log = [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); };
  const auto rep = harness::run_plan(plan, hooks);
  std::cout << harness::to_csv_text(rep.summary);
  for (const auto& m : rep.missing_series) std::fprintf(stderr, "missing series %s\n", m.c_str());
  if (rep.failures() > 0) {
    std::fprintf(stderr, "%zu of %zu cells failed; see %s\n", rep.failures(), rep.cells.size(),
                 (plan.output_dir / "results.csv").c_str());
    return kRunFailure;
  }
  return kOk;
}

// --- export-plot -----------------------------------------------------------

struct ExportArgs {
  std::string figure = "convergence";
  std::string metrics = "runs";
};

int cmd_export(const Globals& g, const ExportArgs& a) {
  const auto fig = as_usage([&] { return harness::parse_figure(a.figure); });
  const auto pd = harness::export_plotdata(a.metrics, fig);
  for (const auto& m : pd.missing) std::fprintf(stderr, "missing series %s\n", m.c_str());
  if (g.out.empty()) std::cout << harness::to_csv_text(pd.table);
  else harness::write_csv(g.out, pd.table);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DG-PG cluster scheduling experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output path (directory or file, per command)");
  app.add_option("--config", g.config, "key = value config or plan file");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 1024));

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-scenarios", "write train/test scenario files");
  c_gen->add_option("--scale", gen.scales, "scale names, or 'all'")->delimiter(',');
  c_gen->add_option("--n-train", gen.n_train);
  c_gen->add_option("--n-test", gen.n_test);
  c_gen->add_flag("--force", gen.force, "overwrite a non-empty scale directory");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train one policy and evaluate its best checkpoint");
  c_train->add_option("--algo", tr.algo, "dgpg, dgpg@<alpha>, mappo or ippo");
  c_train->add_option("--scale", tr.scale);
  c_train->add_option("--arch", tr.arch, "linear or mlp");
  c_train->add_option("--episodes", tr.episodes)->check(CLI::PositiveNumber);
  c_train->add_option("--scenarios", tr.scenarios, "scenario root directory");
  c_train->add_flag("--greedy", tr.greedy, "greedy actions in the test evaluation");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint or a heuristic");
  c_eval->add_option("--checkpoint", ev.checkpoint);
  c_eval->add_option("--algo", ev.algo, "bestfit or random");
  c_eval->add_option("--scale", ev.scale);
  c_eval->add_option("--split", ev.split, "train or test");
  c_eval->add_option("--scenarios", ev.scenarios, "scenario root directory");
  c_eval->add_flag("--greedy", ev.greedy);

  VarianceArgs va;
  auto* c_var = app.add_subcommand("variance", "estimator variance versus agent count");
  c_var->add_option("--env", va.env, "synthetic or cloud");
  c_var->add_option("--scales", va.scales, "agent counts (synthetic) or scales (cloud)")->delimiter(',');
  c_var->add_option("--samples", va.samples)->check(CLI::PositiveNumber);
  c_var->add_option("--bootstrap", va.bootstrap)->check(CLI::PositiveNumber);
  c_var->add_option("--tau", va.tau, "synthetic reward noise")->check(CLI::NonNegativeNumber);
  c_var->add_option("--kappa", va.kappa, "synthetic guidance noise")->check(CLI::NonNegativeNumber);

  PlanArgs pa;
  auto* c_plan = app.add_subcommand("run-plan", "run every cell of an experiment plan");
  c_plan->add_option("--workers", pa.workers, "cells run at once")->check(CLI::Range(1, 1024));

  ExportArgs ex;
  auto* c_export = app.add_subcommand("export-plot", "write one figure's plot data");
  c_export->add_option("--figure", ex.figure, "convergence, comparison, alpha or scalability");
  c_export->add_option("--metrics", ex.metrics, "output directory of a plan");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*c_gen) return cmd_gen(g, gen);
    if (*c_train) return cmd_train(g, tr);
    if (*c_eval) return cmd_eval(g, ev);
    if (*c_var) return cmd_variance(g, va);
    if (*c_plan) return cmd_run_plan(g, pa);
    if (*c_export) return cmd_export(g, ex);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return kRunFailure;
  }
  return kUsage;
}
