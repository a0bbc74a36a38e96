#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coevo/coevolution.hpp"
#include "coevo/data.hpp"

#include "json.hpp"

namespace coevo {

// One configured family: either synthetically generated or loaded from CSV.
struct FamilySpec {
  std::string name;
  bool synthetic = true;
  SyntheticFamilyConfig synth;
  std::string csv_path;
  std::string label_column = "label";
  std::size_t mutable_count = 4;  // csv families; synthetic carry their own
};

struct ExperimentConfig {
  std::vector<FamilySpec> families;
  SplitFractions split;
  std::vector<Hyperparameters> grid;
  BanditPolicy policy;
  AttackBudget budget;
  ConvergenceCriterion criterion;
  std::vector<Scenario> scenarios;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
};

ExperimentConfig default_experiment_config();

// Parses a config document, filling every omitted field with its default.
// Throws std::runtime_error naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// The defaults-filled config as written next to the results.
nlohmann::json effective_config_json(const ExperimentConfig& config);

// Invariant check without running anything; returns human-readable issues,
// empty on success.
std::vector<std::string> validate_config(const ExperimentConfig& config);

struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> scenario;  // baseline|advtrain|bilevel|all
  bool serial = false;
};

// Executes every (family, seed, scenario) combination and writes
// results/<family>/<scenario>/seed<k>.json, summary.csv, summary.md,
// iterations.csv and effective_config.json under the output directory.
int run_experiments(const ExperimentConfig& config,
                    const RunOverrides& overrides = {});

}  // namespace coevo
