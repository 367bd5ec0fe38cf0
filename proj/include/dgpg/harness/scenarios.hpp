#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dgpg/env/scale.hpp"

namespace dgpg::harness {

enum class Split { Train, Test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

// JSON text of one scenario; the inverse accepts exactly what this writes.
std::string scenario_to_json(const env::Scenario& scn);
env::Scenario scenario_from_json(const std::string& text);

void save_scenario(const env::Scenario& scn, const std::filesystem::path& path);
env::Scenario load_scenario(const std::filesystem::path& path);

// Seeds come from one counter per scale: even slots feed the training set,
// odd slots the test set, so the two ranges can never meet.
std::uint64_t scenario_seed(std::uint64_t master_seed, const env::ScaleConfig& scale, Split split, std::size_t index);

struct GenOptions {
  std::size_t n_train = 200;
  std::size_t n_test = 40;
  std::uint64_t master_seed = 0;
  bool force = false;  // allow writing into a non-empty scale directory
  int threads = 1;
};

// Writes <root>/<scale>/{train,test}/NNN.json and returns the file paths in
// index order, train first.
std::vector<std::filesystem::path> gen_scenarios(const env::ScaleConfig& scale, const std::filesystem::path& root,
                                                 const GenOptions& options);

std::filesystem::path split_dir(const std::filesystem::path& root, std::string_view scale_name, Split split);

// All scenarios of one split, sorted by file name; throws when none exist.
std::vector<env::Scenario> load_split(const std::filesystem::path& root, std::string_view scale_name, Split split);

}  // namespace dgpg::harness
