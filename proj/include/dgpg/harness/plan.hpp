#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgpg/common/kvconfig.hpp"
#include "dgpg/env/scale.hpp"
#include "dgpg/harness/csv.hpp"
#include "dgpg/trainer/config.hpp"

namespace dgpg::harness {

// An algorithm column of a plan. Labels: dgpg, mappo, ippo, bestfit, random,
// and dgpg@<alpha> for DG-PG with the mixing weight held constant.
struct AlgoSpec {
  enum class Kind { Learner, BestFit, Random };
  std::string label;
  Kind kind = Kind::Learner;
  trainer::Algorithm algorithm = trainer::Algorithm::DGPG;
  std::optional<double> constant_alpha;
};

AlgoSpec parse_algo(std::string_view label);

struct ExperimentPlan {
  std::string name = "plan";
  std::vector<std::string> scales;
  std::vector<std::string> algorithms;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path scenario_dir = "scenarios";
  std::filesystem::path output_dir = "runs";
  policy::Arch arch = policy::Arch::Linear;
  std::optional<int> episodes;  // overrides every learner preset when set
  bool greedy_eval = false;     // test evaluation samples actions unless set
  int workers = 1;              // cells running at once
  int threads = 1;              // threads inside one cell
  KvDocument overrides;         // [train], [<algo>], [<algo>.<arch>] sections
};

// Reads the [plan] section; the remaining sections are preset overrides.
ExperimentPlan parse_plan(const KvDocument& doc);
ExperimentPlan load_plan(const std::filesystem::path& path);

// Complete TrainConfig for a learner cell: preset, then overrides, then the
// plan-wide episode count and the constant alpha of dgpg@x labels.
trainer::TrainConfig cell_config(const ExperimentPlan& plan, const AlgoSpec& algo, const env::ScaleConfig& scale);

// Distinct stream per (seed, scale, algorithm label).
std::uint64_t cell_seed(std::uint64_t seed, const env::ScaleConfig& scale, std::string_view label);

std::filesystem::path cell_dir(const ExperimentPlan& plan, std::string_view scale, std::string_view label,
                               std::uint64_t seed);

struct CellOutcome {
  std::string scale;
  std::string algorithm;
  std::uint64_t seed = 0;
  bool ok = false;
  bool reused = false;  // a finished cell with the same config was found on disk
  std::string message;
  std::vector<double> test_rewards;
};

struct PlanReport {
  std::vector<CellOutcome> cells;
  CsvTable summary;
  std::vector<std::string> missing_series;
  std::size_t failures() const;
};

struct PlanHooks {
  std::function<void(const std::string&)> log;
  // Called at the start of each cell; an exception here fails that cell only.
  std::function<void(const std::string& scale, const std::string& algorithm, std::uint64_t seed)> before_cell;
};

// Runs every (scale, algorithm, seed) cell. Output layout under output_dir:
//   cells/<scale>/<algorithm>/seed-<s>/  per-cell files, status.txt last
//   episodes.csv results.csv test_rewards.csv summary.csv plots/<figure>.csv
// A failing cell is recorded and the rest continue. Cells already finished
// with an identical config are reused, so re-running a plan reproduces its
// CSVs byte for byte.
PlanReport run_plan(const ExperimentPlan& plan, const PlanHooks& hooks = {});

enum class Figure { Convergence, Comparison, AlphaSensitivity, Scalability };
std::string_view to_string(Figure f);
Figure parse_figure(std::string_view s);

struct PlotData {
  CsvTable table;  // series, x, y, lo, hi, ma10
  std::vector<std::string> missing;
};

// Builds one figure's tidy series from a plan's output directory. Training
// curves average the seeds (lo/hi = min/max) and carry a trailing 10-episode
// moving average; the scalability figure uses test mean -/+ one std.
PlotData export_plotdata(const std::filesystem::path& metrics_dir, Figure figure);

// Trailing moving average with a window that is shorter at the start.
std::vector<double> moving_average(const std::vector<double>& y, std::size_t window);

// "mean ± std" cells of summary.csv.
std::string format_summary_cell(double mean, double std);
std::pair<double, double> parse_summary_cell(const std::string& cell);

}  // namespace dgpg::harness
