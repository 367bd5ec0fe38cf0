#include "dgpg/harness/scenarios.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "dgpg/common/parallel.hpp"
#include "dgpg/common/rng.hpp"
#include "dgpg/harness/csv.hpp"
#include "json.hpp"

namespace dgpg::harness {

using nlohmann::json;

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split: " + std::string(s) + " (expected train or test)");
}

std::string scenario_to_json(const env::Scenario& scn) {
  nlohmann::ordered_json fleet = nlohmann::ordered_json::array();
  for (const auto& s : scn.fleet) {
    // only catalog instances can be named in a file
    if (!(env::server_type(s.instance_name) == s))
      throw std::invalid_argument("scenario_to_json: " + s.instance_name + " differs from the catalog entry");
    fleet.push_back(s.instance_name);
  }
  // ordered_json keeps the field order stable and readable
  nlohmann::ordered_json doc;
  doc["format"] = "dgpg-scenario-1";
  doc["scale"] = scn.scale_name;
  doc["seed"] = scn.seed;
  doc["base_rate"] = scn.base_rate;
  doc["n_servers"] = scn.fleet.size();
  doc["fleet"] = fleet;
  return doc.dump(2) + "\n";
}

env::Scenario scenario_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "dgpg-scenario-1") throw std::invalid_argument("unsupported format tag");
    env::Scenario scn;
    scn.scale_name = doc.at("scale").get<std::string>();
    scn.seed = doc.at("seed").get<std::uint64_t>();
    scn.base_rate = doc.at("base_rate").get<double>();
    for (const auto& s : doc.at("fleet")) {
      const auto name = s.get<std::string>();
      try {
        scn.fleet.push_back(env::server_type(name));
      } catch (const std::out_of_range&) {
        throw std::invalid_argument("unknown instance type " + name);
      }
    }
    if (scn.fleet.size() != doc.at("n_servers").get<std::size_t>())
      throw std::invalid_argument("n_servers does not match the fleet length");
    if (!(scn.base_rate >= 0.0)) throw std::invalid_argument("negative base_rate");
    return scn;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("scenario json: ") + e.what());
  }
}

void save_scenario(const env::Scenario& scn, const std::filesystem::path& path) {
  write_text_atomic(path, scenario_to_json(scn));
}

env::Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(read_text(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::uint64_t scenario_seed(std::uint64_t master_seed, const env::ScaleConfig& scale, Split split, std::size_t index) {
  const std::uint64_t per_scale = derive_seed(master_seed, scale.n_servers);
  return derive_seed(per_scale, 2 * static_cast<std::uint64_t>(index) + (split == Split::Test ? 1 : 0));
}

std::filesystem::path split_dir(const std::filesystem::path& root, std::string_view scale_name, Split split) {
  return root / std::string(scale_name) / std::string(to_string(split));
}

std::vector<std::filesystem::path> gen_scenarios(const env::ScaleConfig& scale, const std::filesystem::path& root,
                                                 const GenOptions& options) {
  namespace fs = std::filesystem;
  const fs::path dir = root / scale.name;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!options.force) throw std::runtime_error(dir.string() + " is not empty (use force to overwrite)");
    fs::remove_all(dir);
  }
  struct Job {
    Split split;
    std::size_t index;
    fs::path path;
  };
  std::vector<Job> jobs;
  for (Split s : {Split::Train, Split::Test}) {
    const std::size_t n = s == Split::Train ? options.n_train : options.n_test;
    fs::create_directories(split_dir(root, scale.name, s));
    for (std::size_t i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%03zu.json", i);
      jobs.push_back({s, i, split_dir(root, scale.name, s) / name});
    }
  }
  parallel_for(jobs.size(), options.threads, [&](std::size_t k) {
    const auto& j = jobs[k];
    save_scenario(env::make_scenario(scale, scenario_seed(options.master_seed, scale, j.split, j.index)), j.path);
  });
  std::vector<fs::path> out;
  for (const auto& j : jobs) out.push_back(j.path);
  return out;
}

std::vector<env::Scenario> load_split(const std::filesystem::path& root, std::string_view scale_name, Split split) {
  namespace fs = std::filesystem;
  const fs::path dir = split_dir(root, scale_name, split);
  if (!fs::is_directory(dir)) throw std::runtime_error("no scenario directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no scenarios in " + dir.string());
  std::vector<env::Scenario> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    auto scn = load_scenario(f);
    if (scn.scale_name != scale_name)
      throw std::runtime_error(f.string() + ": scenario is for scale " + scn.scale_name);
    out.push_back(std::move(scn));
  }
  return out;
}

}  // namespace dgpg::harness
