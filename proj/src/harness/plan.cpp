#include "dgpg/harness/plan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dgpg/common/parallel.hpp"
#include "dgpg/common/rng.hpp"
#include "dgpg/common/stats.hpp"
#include "dgpg/harness/scenarios.hpp"
#include "dgpg/policy/policy.hpp"
#include "dgpg/trainer/training.hpp"

namespace dgpg::harness {

namespace fs = std::filesystem;

AlgoSpec parse_algo(std::string_view label) {
  AlgoSpec a;
  a.label = std::string(label);
  if (label == "bestfit") {
    a.kind = AlgoSpec::Kind::BestFit;
    return a;
  }
  if (label == "random") {
    a.kind = AlgoSpec::Kind::Random;
    return a;
  }
  const auto at = label.find('@');
  a.algorithm = trainer::parse_algorithm(label.substr(0, at));
  if (at != std::string_view::npos) {
    if (a.algorithm != trainer::Algorithm::DGPG)
      throw std::invalid_argument("constant alpha only applies to dgpg: " + a.label);
    const double v = parse_double("alpha", std::string(label.substr(at + 1)));
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("alpha outside [0, 1]: " + a.label);
    a.constant_alpha = v;
    a.label = "dgpg@" + format_number(v);
  }
  return a;
}

ExperimentPlan parse_plan(const KvDocument& doc) {
  ExperimentPlan p;
  const KvSection* s = doc.find("plan");
  if (!s) throw std::invalid_argument(doc.source() + ": missing [plan] section");
  bool seen_scales = false, seen_algos = false;
  for (const auto& e : s->entries) {
    const auto where = doc.source() + ":" + std::to_string(e.line) + ": ";
    try {
      if (e.key == "name") {
        p.name = e.value;
      } else if (e.key == "scales") {
        p.scales = split_list(e.value);
        seen_scales = true;
      } else if (e.key == "algorithms") {
        p.algorithms.clear();
        for (const auto& a : split_list(e.value)) p.algorithms.push_back(parse_algo(a).label);
        seen_algos = true;
      } else if (e.key == "seeds") {
        p.seeds.clear();
        for (const auto& v : split_list(e.value)) {
          const long x = parse_long(e.key, v);
          if (x < 0) throw std::invalid_argument("seeds must be non-negative");
          p.seeds.push_back(static_cast<std::uint64_t>(x));
        }
      } else if (e.key == "scenario_dir") {
        p.scenario_dir = e.value;
      } else if (e.key == "output_dir") {
        p.output_dir = e.value;
      } else if (e.key == "arch") {
        p.arch = trainer::parse_arch(e.value);
      } else if (e.key == "episodes") {
        const long x = parse_long(e.key, e.value);
        if (x < 1) throw std::invalid_argument("episodes must be >= 1");
        p.episodes = static_cast<int>(x);
      } else if (e.key == "eval") {
        if (e.value != "greedy" && e.value != "sample") throw std::invalid_argument("eval: expected greedy or sample");
        p.greedy_eval = e.value == "greedy";
      } else if (e.key == "workers" || e.key == "threads") {
        const long x = parse_long(e.key, e.value);
        if (x < 1) throw std::invalid_argument(e.key + " must be >= 1");
        (e.key == "workers" ? p.workers : p.threads) = static_cast<int>(x);
      } else {
        throw std::invalid_argument("unknown key " + e.key);
      }
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument(where + ex.what());
    }
  }
  if (!seen_scales) throw std::invalid_argument(doc.source() + ": [plan] needs scales");
  if (!seen_algos) throw std::invalid_argument(doc.source() + ": [plan] needs algorithms");
  for (const auto& sc : p.scales) env::scale_by_name(sc);
  std::set<std::uint64_t> uniq(p.seeds.begin(), p.seeds.end());
  if (uniq.size() != p.seeds.size()) throw std::invalid_argument(doc.source() + ": duplicate seeds");
  p.overrides = doc;
  return p;
}

ExperimentPlan load_plan(const fs::path& path) { return parse_plan(KvDocument::load(path)); }

trainer::TrainConfig cell_config(const ExperimentPlan& plan, const AlgoSpec& algo, const env::ScaleConfig& scale) {
  if (algo.kind != AlgoSpec::Kind::Learner) throw std::invalid_argument(algo.label + " is not a learner");
  auto cfg = trainer::preset(algo.algorithm, plan.arch, scale);
  trainer::apply_document(cfg, plan.overrides, {"plan", ""});
  if (plan.episodes) cfg.episodes = *plan.episodes;
  if (algo.constant_alpha) {
    cfg.alpha_mode = trainer::AlphaMode::Constant;
    cfg.alpha_value = *algo.constant_alpha;
  }
  return cfg;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::string dir_name(std::string_view label) {
  std::string s(label);
  std::replace(s.begin(), s.end(), '@', '-');
  return s;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t seed, const env::ScaleConfig& scale, std::string_view label) {
  return derive_seed(derive_seed(seed, scale.n_servers), fnv1a(label));
}

fs::path cell_dir(const ExperimentPlan& plan, std::string_view scale, std::string_view label, std::uint64_t seed) {
  return plan.output_dir / "cells" / std::string(scale) / dir_name(label) / ("seed-" + std::to_string(seed));
}

std::size_t PlanReport::failures() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok; }));
}

std::string format_summary_cell(double mean, double std) { return format_number(mean) + " ± " + format_number(std); }

std::pair<double, double> parse_summary_cell(const std::string& cell) {
  const auto pos = cell.find(" ± ");
  if (pos == std::string::npos) throw std::invalid_argument("summary cell without ±: " + cell);
  return {parse_number(cell.substr(0, pos)), parse_number(cell.substr(pos + std::string(" ± ").size()))};
}

std::vector<double> moving_average(const std::vector<double>& y, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: zero window");
  std::vector<double> out(y.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += y[i];
    if (i >= window) sum -= y[i - window];
    out[i] = sum / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

namespace {

struct Cell {
  std::string scale;
  AlgoSpec algo;
  std::uint64_t seed = 0;
};

const std::vector<std::string> kEpisodeHeader{"episode", "scale",   "algorithm", "seed",
                                              "mean_reward", "alpha", "entropy", "wall_ms"};

// Text that identifies a cell's inputs; a finished cell is reused only when
// this matches exactly.
std::string cell_fingerprint(const ExperimentPlan& plan, const Cell& c, const env::ScaleConfig& scale,
                             std::span<const env::Scenario> train, std::span<const env::Scenario> test) {
  std::ostringstream o;
  o << "# cell " << c.scale << " " << c.algo.label << " seed " << c.seed << "\n";
  o << "# stream " << cell_seed(c.seed, scale, c.algo.label) << "\n";
  o << "# eval " << (plan.greedy_eval ? "greedy" : "sample") << " threads-independent\n";
  auto seeds = [&](const char* tag, std::span<const env::Scenario> s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& x : s) h = derive_seed(h, x.seed);
    o << "# " << tag << " " << s.size() << " " << h << "\n";
  };
  seeds("train", train);
  seeds("test", test);
  if (c.algo.kind == AlgoSpec::Kind::Learner)
    o << trainer::to_text(cell_config(plan, c.algo, scale));
  else
    o << "heuristic = " << c.algo.label << "\n";
  return o.str();
}

CsvTable test_table(const std::vector<double>& rewards) {
  CsvTable t;
  t.header = {"scenario", "reward"};
  for (std::size_t i = 0; i < rewards.size(); ++i) t.rows.push_back({std::to_string(i), format_number(rewards[i])});
  return t;
}

std::vector<double> read_test_rewards(const fs::path& p) {
  const auto t = read_csv(p);
  std::vector<double> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) out.push_back(t.number(i, "reward"));
  return out;
}

CellOutcome run_cell(const ExperimentPlan& plan, const Cell& c, const PlanHooks& hooks) {
  CellOutcome out;
  out.scale = c.scale;
  out.algorithm = c.algo.label;
  out.seed = c.seed;
  const fs::path dir = cell_dir(plan, c.scale, c.algo.label, c.seed);
  try {
    const auto& scale = env::scale_by_name(c.scale);
    const auto test = load_split(plan.scenario_dir, c.scale, Split::Test);
    std::vector<env::Scenario> train;
    if (c.algo.kind == AlgoSpec::Kind::Learner) train = load_split(plan.scenario_dir, c.scale, Split::Train);
    const std::string fingerprint = cell_fingerprint(plan, c, scale, train, test);

    const fs::path status = dir / "status.txt";
    if (fs::exists(status) && read_text(status) == "ok\n" && fs::exists(dir / "config.txt") &&
        read_text(dir / "config.txt") == fingerprint) {
      out.ok = true;
      out.reused = true;
      out.test_rewards = read_test_rewards(dir / "test.csv");
      return out;
    }
    fs::create_directories(dir);
    fs::remove(status);
    write_text_atomic(dir / "config.txt", fingerprint);
    if (hooks.before_cell) hooks.before_cell(c.scale, c.algo.label, c.seed);

    const std::uint64_t stream = cell_seed(c.seed, scale, c.algo.label);
    trainer::EvalResult res;
    if (c.algo.kind == AlgoSpec::Kind::Learner) {
      const auto cfg = cell_config(plan, c.algo, scale);
      trainer::TrainOptions opt;
      opt.seed = stream;
      opt.threads = plan.threads;
      const auto tr = trainer::run_training(train, cfg, scale, opt);
      CsvTable ep, val;
      ep.header = kEpisodeHeader;
      val.header = {"episode", "validation"};
      for (const auto& m : tr.log) {
        ep.rows.push_back({std::to_string(m.episode), c.scale, c.algo.label, std::to_string(c.seed),
                           format_number(m.mean_reward), format_number(m.alpha), format_number(m.entropy),
                           format_number(m.wall_ms)});
        if (!std::isnan(m.validation)) val.rows.push_back({std::to_string(m.episode), format_number(m.validation)});
      }
      write_csv(dir / "episodes.csv", ep);
      write_csv(dir / "validation.csv", val);
      const auto& best = tr.best_episode >= 0 ? tr.best_params : tr.final_params;
      policy::save_checkpoint(best, dir / "best.ckpt");
      policy::save_checkpoint(tr.final_params, dir / "final.ckpt");
      res = trainer::evaluate(best, test, scale, plan.greedy_eval, derive_seed(stream, 7), plan.threads);
    } else {
      const auto kind =
          c.algo.kind == AlgoSpec::Kind::BestFit ? baselines::HeuristicKind::BestFit : baselines::HeuristicKind::Random;
      res = trainer::evaluate_heuristic(kind, test, scale, derive_seed(stream, 7), plan.threads);
    }
    write_csv(dir / "test.csv", test_table(res.per_scenario));
    write_text_atomic(status, "ok\n");
    out.ok = true;
    out.test_rewards = res.per_scenario;
  } catch (const std::exception& e) {
    out.ok = false;
    out.message = e.what();
    try {
      write_text_atomic(dir / "status.txt", "failed: " + out.message + "\n");
    } catch (...) {
    }
  }
  return out;
}

}  // namespace

PlanReport run_plan(const ExperimentPlan& plan, const PlanHooks& hooks) {
  auto log = [&](const std::string& s) {
    if (hooks.log) hooks.log(s);
  };
  // Everything that can be checked up front is checked before any cell runs.
  std::vector<Cell> cells;
  for (const auto& sc : plan.scales) {
    const auto& scale = env::scale_by_name(sc);
    for (const auto& label : plan.algorithms) {
      const auto algo = parse_algo(label);
      if (algo.kind == AlgoSpec::Kind::Learner) cell_config(plan, algo, scale);
      for (auto seed : plan.seeds) cells.push_back({sc, algo, seed});
    }
    if (!plan.algorithms.empty()) {
      if (!fs::is_directory(split_dir(plan.scenario_dir, sc, Split::Test)))
        throw std::runtime_error("missing test scenarios for " + sc + " under " + plan.scenario_dir.string());
      const bool learners = std::any_of(plan.algorithms.begin(), plan.algorithms.end(), [](const auto& l) {
        return parse_algo(l).kind == AlgoSpec::Kind::Learner;
      });
      if (learners && !fs::is_directory(split_dir(plan.scenario_dir, sc, Split::Train)))
        throw std::runtime_error("missing training scenarios for " + sc + " under " + plan.scenario_dir.string());
    }
  }
  fs::create_directories(plan.output_dir / "cells");
  fs::create_directories(plan.output_dir / "plots");

  PlanReport report;
  report.cells.resize(cells.size());
  std::mutex log_mu;
  parallel_for(cells.size(), plan.workers, [&](std::size_t i) {
    const auto& c = cells[i];
    {
      std::lock_guard lk(log_mu);
      log("cell " + c.scale + " " + c.algo.label + " seed " + std::to_string(c.seed) + ": start");
    }
    const auto t0 = std::chrono::steady_clock::now();
    report.cells[i] = run_cell(plan, c, hooks);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard lk(log_mu);
    const auto& o = report.cells[i];
    std::ostringstream msg;
    msg << "cell " << c.scale << " " << c.algo.label << " seed " << c.seed << ": ";
    if (!o.ok) msg << "FAILED " << o.message;
    else msg << (o.reused ? "reused" : "done") << " test mean " << mean_of(o.test_rewards) << " (" << sec << " s)";
    log(msg.str());
  });

  // Single aggregator, plan order.
  CsvTable episodes, results, rewards;
  episodes.header = kEpisodeHeader;
  results.header = {"scale", "algorithm", "seed", "status", "test_mean", "test_std", "n_scenarios", "message"};
  rewards.header = {"scale", "algorithm", "seed", "scenario", "reward"};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto& o = report.cells[i];
    const std::string seed = std::to_string(c.seed);
    if (o.ok && c.algo.kind == AlgoSpec::Kind::Learner) {
      const auto ep = read_csv(cell_dir(plan, c.scale, c.algo.label, c.seed) / "episodes.csv");
      for (const auto& r : ep.rows) episodes.rows.push_back(r);
    }
    const double m = o.ok ? mean_of(o.test_rewards) : std::nan("");
    const double s = o.ok && o.test_rewards.size() > 1 ? stddev_of(o.test_rewards) : (o.ok ? 0.0 : std::nan(""));
    results.rows.push_back({c.scale, c.algo.label, seed, o.ok ? "ok" : "failed", format_number(m), format_number(s),
                            std::to_string(o.test_rewards.size()), o.message});
    for (std::size_t k = 0; k < o.test_rewards.size(); ++k)
      rewards.rows.push_back({c.scale, c.algo.label, seed, std::to_string(k), format_number(o.test_rewards[k])});
  }

  // Table-shaped summary: rows are algorithms, columns scales, each cell the
  // mean and std of test rewards pooled over seeds.
  CsvTable& summary = report.summary;
  summary.header = {"algorithm"};
  for (const auto& sc : plan.scales) summary.header.push_back(sc);
  for (const auto& label : plan.algorithms) {
    std::vector<std::string> row{label};
    for (const auto& sc : plan.scales) {
      std::vector<double> pooled;
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].scale == sc && cells[i].algo.label == label && report.cells[i].ok)
          pooled.insert(pooled.end(), report.cells[i].test_rewards.begin(), report.cells[i].test_rewards.end());
      row.push_back(pooled.empty() ? "n/a"
                                   : format_summary_cell(mean_of(pooled), pooled.size() > 1 ? stddev_of(pooled) : 0.0));
    }
    summary.rows.push_back(std::move(row));
  }

  write_csv(plan.output_dir / "episodes.csv", episodes);
  write_csv(plan.output_dir / "results.csv", results);
  write_csv(plan.output_dir / "test_rewards.csv", rewards);
  write_csv(plan.output_dir / "summary.csv", summary);
  for (Figure f : {Figure::Convergence, Figure::Comparison, Figure::AlphaSensitivity, Figure::Scalability}) {
    const auto pd = export_plotdata(plan.output_dir, f);
    write_csv(plan.output_dir / "plots" / (std::string(to_string(f)) + ".csv"), pd.table);
    for (const auto& m : pd.missing) report.missing_series.push_back(std::string(to_string(f)) + ": " + m);
  }
  return report;
}

std::string_view to_string(Figure f) {
  switch (f) {
    case Figure::Convergence: return "convergence";
    case Figure::Comparison: return "comparison";
    case Figure::AlphaSensitivity: return "alpha";
    case Figure::Scalability: return "scalability";
  }
  return "?";
}

Figure parse_figure(std::string_view s) {
  for (Figure f : {Figure::Convergence, Figure::Comparison, Figure::AlphaSensitivity, Figure::Scalability})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown figure: " + std::string(s) + " (convergence, comparison, alpha, scalability)");
}

namespace {

struct Curve {
  std::map<int, std::vector<double>> by_episode;  // episode -> one value per seed
};

void add_curve_rows(CsvTable& out, const std::string& series, const Curve& c) {
  std::vector<int> xs;
  std::vector<double> ys, lo, hi;
  for (const auto& [x, v] : c.by_episode) {
    xs.push_back(x);
    ys.push_back(mean_of(v));
    lo.push_back(*std::min_element(v.begin(), v.end()));
    hi.push_back(*std::max_element(v.begin(), v.end()));
  }
  const auto ma = moving_average(ys, 10);
  for (std::size_t i = 0; i < xs.size(); ++i)
    out.rows.push_back({series, std::to_string(xs[i]), format_number(ys[i]), format_number(lo[i]),
                        format_number(hi[i]), format_number(ma[i])});
}

}  // namespace

PlotData export_plotdata(const fs::path& metrics_dir, Figure figure) {
  const auto results = read_csv(metrics_dir / "results.csv");
  PlotData pd;
  pd.table.header = {"series", "x", "y", "lo", "hi", "ma10"};

  std::vector<std::string> scales, labels;
  for (std::size_t i = 0; i < results.rows.size(); ++i) {
    const auto& sc = results.at(i, "scale");
    const auto& al = results.at(i, "algorithm");
    if (std::find(scales.begin(), scales.end(), sc) == scales.end()) scales.push_back(sc);
    if (std::find(labels.begin(), labels.end(), al) == labels.end()) labels.push_back(al);
  }

  if (figure == Figure::Scalability) {
    const auto rewards = read_csv(metrics_dir / "test_rewards.csv");
    for (const auto& label : labels) {
      // x = server count, sorted
      std::map<std::size_t, std::vector<double>> by_n;
      for (std::size_t i = 0; i < rewards.rows.size(); ++i)
        if (rewards.at(i, "algorithm") == label)
          by_n[env::scale_by_name(rewards.at(i, "scale")).n_servers].push_back(rewards.number(i, "reward"));
      if (by_n.empty()) {
        pd.missing.push_back(label);
        continue;
      }
      for (const auto& [n, v] : by_n) {
        const double m = mean_of(v), s = v.size() > 1 ? stddev_of(v) : 0.0;
        pd.table.rows.push_back({label, std::to_string(n), format_number(m), format_number(m - s),
                                 format_number(m + s), ""});
      }
    }
    return pd;
  }

  // Training curves: series name -> curve.
  std::map<std::string, Curve> curves;
  const fs::path ep_path = metrics_dir / "episodes.csv";
  const auto episodes = read_csv(ep_path);
  for (std::size_t i = 0; i < episodes.rows.size(); ++i) {
    const auto& sc = episodes.at(i, "scale");
    const auto& al = episodes.at(i, "algorithm");
    std::string series;
    if (figure == Figure::Convergence && al == "dgpg") series = sc;
    else if (figure == Figure::Comparison && (al == "dgpg" || al == "mappo" || al == "ippo")) series = sc + "/" + al;
    else if (figure == Figure::AlphaSensitivity && al.rfind("dgpg@", 0) == 0) series = sc + "/alpha=" + al.substr(5);
    if (series.empty()) continue;
    curves[series].by_episode[std::stoi(episodes.at(i, "episode"))].push_back(episodes.number(i, "mean_reward"));
  }

  std::vector<std::string> expected;
  for (const auto& sc : scales) {
    if (figure == Figure::Convergence) expected.push_back(sc);
    if (figure == Figure::Comparison)
      for (const char* a : {"dgpg", "mappo", "ippo"}) expected.push_back(sc + "/" + a);
    if (figure == Figure::AlphaSensitivity)
      for (double a : {0.2, 0.4, 0.6, 0.8}) expected.push_back(sc + "/alpha=" + format_number(a));
  }
  for (const auto& e : expected)
    if (!curves.count(e)) pd.missing.push_back(e);
  // Expected series first in their canonical order, then any extras.
  for (const auto& e : expected)
    if (curves.count(e)) add_curve_rows(pd.table, e, curves.at(e));
  for (const auto& [name, c] : curves)
    if (std::find(expected.begin(), expected.end(), name) == expected.end()) add_curve_rows(pd.table, name, c);
  return pd;
}

}  // namespace dgpg::harness
