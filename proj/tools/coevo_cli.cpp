#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "coevo/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ','))
    if (!token.empty()) seeds.push_back(std::stoull(token));
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial co-evolution experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds_csv;
  std::string scenario = "all";
  bool serial = false;

  auto* run = app.add_subcommand("run", "Execute the configured experiments");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides config)");
  run->add_option("--seeds", seeds_csv, "Comma-separated seed list override");
  run->add_option("--scenario", scenario,
                  "baseline|advtrain|bilevel|all (default all)");
  run->add_flag("--serial", serial, "Strictly serial execution");

  auto* validate =
      app.add_subcommand("validate", "Check a config without running");
  validate->add_option("config", config_path, "JSON config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const coevo::ExperimentConfig config = coevo::load_config(config_path);

    if (validate->parsed()) {
      const auto issues = coevo::validate_config(config);
      if (issues.empty()) {
        std::cout << "PASS: " << config_path << " is a valid config\n";
        return 0;
      }
      for (const std::string& issue : issues)
        std::cout << "FAIL: " << issue << '\n';
      return 2;
    }

    coevo::RunOverrides overrides;
    if (!out_dir.empty()) overrides.output_dir = out_dir;
    if (!seeds_csv.empty()) overrides.seeds = parse_seed_list(seeds_csv);
    if (scenario != "all") overrides.scenario = scenario;
    overrides.serial = serial;
    return coevo::run_experiments(config, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
