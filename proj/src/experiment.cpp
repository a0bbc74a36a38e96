#include "coevo/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "coevo/fingerprint.hpp"

namespace fs = std::filesystem;

namespace coevo {

ExperimentConfig default_experiment_config() {
  ExperimentConfig config;
  FamilySpec family;
  family.name = "synthetic";
  family.synthetic = true;
  family.synth = SyntheticFamilyConfig{};
  family.synth.name = family.name;
  config.families.push_back(family);
  config.grid = default_hyperparameter_grid();
  config.scenarios = {Scenario::baseline, Scenario::adversarial_retrain,
                      Scenario::bilevel_ibr};
  config.seeds = {1, 2, 3, 4, 5};
  return config;
}

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config field '") + key + "': " +
                             e.what());
  }
}

FamilySpec parse_family(const nlohmann::json& j) {
  FamilySpec family;
  family.name = get_or<std::string>(j, "name", "synthetic");
  if (j.contains("csv")) {
    family.synthetic = false;
    family.csv_path = j.at("csv").get<std::string>();
    family.label_column = get_or<std::string>(j, "label_column", "label");
    family.mutable_count = get_or<std::size_t>(j, "mutable_count", 4);
  } else {
    family.synthetic = true;
    SyntheticFamilyConfig s;
    s.name = family.name;
    s.d = get_or<std::size_t>(j, "d", s.d);
    s.n_malware = get_or<std::size_t>(j, "n_malware", s.n_malware);
    s.n_benign = get_or<std::size_t>(j, "n_benign", s.n_benign);
    s.separation = get_or<double>(j, "separation", s.separation);
    s.spread = get_or<double>(j, "spread", s.spread);
    s.mutable_count = get_or<std::size_t>(j, "mutable_count", s.mutable_count);
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    family.synth = s;
    family.mutable_count = s.mutable_count;
  }
  return family;
}

Hyperparameters parse_hp(const nlohmann::json& j) {
  Hyperparameters hp;
  hp.n_trees = get_or<int>(j, "n_trees", hp.n_trees);
  hp.max_depth = get_or<int>(j, "max_depth", hp.max_depth);
  hp.min_samples_leaf = get_or<int>(j, "min_samples_leaf", hp.min_samples_leaf);
  hp.features_per_split =
      get_or<int>(j, "features_per_split", hp.features_per_split);
  hp.bootstrap = get_or<bool>(j, "bootstrap", hp.bootstrap);
  return hp;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig config = default_experiment_config();

  if (j.contains("families")) {
    config.families.clear();
    for (const auto& fj : j.at("families"))
      config.families.push_back(parse_family(fj));
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    config.split.train = get_or<double>(s, "train", config.split.train);
    config.split.val = get_or<double>(s, "val", config.split.val);
    config.split.test = get_or<double>(s, "test", config.split.test);
  }
  if (j.contains("grid")) {
    config.grid.clear();
    for (const auto& hj : j.at("grid")) config.grid.push_back(parse_hp(hj));
  }
  if (j.contains("bandit")) {
    const auto& b = j.at("bandit");
    config.policy.kind = policy_kind_from_string(
        get_or<std::string>(b, "kind", to_string(config.policy.kind)));
    config.policy.ucb_constant =
        get_or<double>(b, "ucb_constant", config.policy.ucb_constant);
  }
  if (j.contains("budget")) {
    const auto& b = j.at("budget");
    config.budget.max_actions_per_episode = get_or<int>(
        b, "max_actions_per_episode", config.budget.max_actions_per_episode);
    config.budget.max_queries_per_sample = get_or<int>(
        b, "max_queries_per_sample", config.budget.max_queries_per_sample);
  }
  if (j.contains("convergence")) {
    const auto& c = j.at("convergence");
    config.criterion.max_iter =
        get_or<int>(c, "max_iter", config.criterion.max_iter);
    config.criterion.epsilon_er =
        get_or<double>(c, "epsilon_er", config.criterion.epsilon_er);
    config.criterion.zero_new_adv_stop = get_or<bool>(
        c, "zero_new_adv_stop", config.criterion.zero_new_adv_stop);
    config.criterion.patience =
        get_or<int>(c, "patience", config.criterion.patience);
  }
  if (j.contains("scenarios")) {
    config.scenarios.clear();
    for (const auto& sj : j.at("scenarios"))
      config.scenarios.push_back(
          scenario_from_string(sj.get<std::string>()));
  }
  if (j.contains("seeds"))
    config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  config.output_dir =
      get_or<std::string>(j, "output_dir", config.output_dir);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json effective_config_json(const ExperimentConfig& config) {
  nlohmann::json j;
  nlohmann::json families = nlohmann::json::array();
  for (const FamilySpec& f : config.families) {
    nlohmann::json fj;
    fj["name"] = f.name;
    if (f.synthetic) {
      fj["d"] = f.synth.d;
      fj["n_malware"] = f.synth.n_malware;
      fj["n_benign"] = f.synth.n_benign;
      fj["separation"] = f.synth.separation;
      fj["spread"] = f.synth.spread;
      fj["mutable_count"] = f.synth.mutable_count;
      fj["seed"] = f.synth.seed;
    } else {
      fj["csv"] = f.csv_path;
      fj["label_column"] = f.label_column;
      fj["mutable_count"] = f.mutable_count;
    }
    families.push_back(fj);
  }
  j["families"] = std::move(families);
  j["split"] = {{"train", config.split.train},
                {"val", config.split.val},
                {"test", config.split.test}};
  nlohmann::json grid = nlohmann::json::array();
  for (const Hyperparameters& hp : config.grid)
    grid.push_back({{"n_trees", hp.n_trees},
                    {"max_depth", hp.max_depth},
                    {"min_samples_leaf", hp.min_samples_leaf},
                    {"features_per_split", hp.features_per_split},
                    {"bootstrap", hp.bootstrap}});
  j["grid"] = std::move(grid);
  j["bandit"] = {{"kind", to_string(config.policy.kind)},
                 {"ucb_constant", config.policy.ucb_constant}};
  j["budget"] = {
      {"max_actions_per_episode", config.budget.max_actions_per_episode},
      {"max_queries_per_sample", config.budget.max_queries_per_sample}};
  j["convergence"] = {
      {"max_iter", config.criterion.max_iter},
      {"epsilon_er", config.criterion.epsilon_er},
      {"zero_new_adv_stop", config.criterion.zero_new_adv_stop},
      {"patience", config.criterion.patience}};
  nlohmann::json scenarios = nlohmann::json::array();
  for (Scenario s : config.scenarios) scenarios.push_back(to_string(s));
  j["scenarios"] = std::move(scenarios);
  j["seeds"] = config.seeds;
  j["output_dir"] = config.output_dir;
  return j;
}

std::vector<std::string> validate_config(const ExperimentConfig& config) {
  std::vector<std::string> issues;
  auto check = [&](const auto& fn, const std::string& context) {
    try {
      fn();
    } catch (const std::exception& e) {
      issues.push_back(context + ": " + e.what());
    }
  };

  if (config.families.empty()) issues.push_back("families: none configured");
  for (const FamilySpec& f : config.families) {
    if (f.synthetic)
      check([&] { f.synth.validate(); }, "family '" + f.name + "'");
    else if (f.csv_path.empty())
      issues.push_back("family '" + f.name + "': empty csv path");
  }
  const double sum = config.split.train + config.split.val + config.split.test;
  if (std::abs(sum - 1.0) > 1e-9)
    issues.push_back("split: fractions sum to " + std::to_string(sum) +
                     ", expected 1");
  if (config.split.train <= 0 || config.split.val <= 0 ||
      config.split.test <= 0)
    issues.push_back("split: all fractions must be positive");
  if (config.grid.empty()) issues.push_back("grid: empty hyperparameter grid");
  for (std::size_t i = 0; i < config.grid.size(); ++i)
    check([&] { config.grid[i].validate(); },
          "grid[" + std::to_string(i) + "]");
  check([&] { config.budget.validate(); }, "budget");
  check([&] { config.criterion.validate(); }, "convergence");
  if (config.scenarios.empty()) issues.push_back("scenarios: none configured");
  if (config.seeds.empty()) issues.push_back("seeds: none configured");
  if (config.output_dir.empty()) issues.push_back("output_dir: empty");
  return issues;
}

namespace {

struct RunRow {
  std::string family;
  Scenario scenario;
  std::uint64_t seed;
  ExperimentResult result;
};

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt4_opt(const std::optional<double>& v) {
  return v ? fmt4(*v) : "--";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_summary(const fs::path& out_dir, const std::vector<RunRow>& rows) {
  std::ostringstream csv;
  csv << "family,scenario,seed,clean_acc,clean_prec,clean_rec,adv_acc,"
         "adv_prec,adv_rec,er_pct,avg_q,iterations,termination\n";
  for (const RunRow& row : rows) {
    const MetricsReport& c = row.result.clean;
    const MetricsReport& a = row.result.adversarial;
    csv << row.family << ',' << to_string(row.scenario) << ',' << row.seed
        << ',' << fmt4(c.metrics.accuracy) << ','
        << fmt4_opt(c.metrics.precision) << ',' << fmt4_opt(c.metrics.recall)
        << ',' << fmt4(a.metrics.accuracy) << ','
        << fmt4_opt(a.metrics.precision) << ',' << fmt4_opt(a.metrics.recall)
        << ',' << format_percent(a.evasion_rate_pct) << ','
        << format_ratio(a.avg_queries) << ',' << row.result.records.size()
        << ',' << to_string(row.result.termination) << '\n';
  }
  write_text(out_dir / "summary.csv", csv.str());

  std::ostringstream md;
  md << "# Experiment summary\n";
  std::string family;
  for (const RunRow& row : rows) {
    if (row.family != family) {
      family = row.family;
      md << "\n## " << family << "\n\n"
         << "| Experiment | Seed | Acc | Prec | Rec "
            "| Adv Acc | Adv Prec | Adv Rec | ER (%) | Avg Q |\n"
         << "|---|---|---|---|---|---|---|---|---|---|\n";
    }
    const MetricsReport& c = row.result.clean;
    const MetricsReport& a = row.result.adversarial;
    md << "| " << to_string(row.scenario) << " | " << row.seed << " | "
       << fmt4(c.metrics.accuracy) << " | " << fmt4_opt(c.metrics.precision)
       << " | " << fmt4_opt(c.metrics.recall) << " | "
       << fmt4(a.metrics.accuracy) << " | " << fmt4_opt(a.metrics.precision)
       << " | " << fmt4_opt(a.metrics.recall) << " | "
       << format_percent(a.evasion_rate_pct) << " | "
       << format_ratio(a.avg_queries) << " |\n";
  }

  bool iter_header = false;
  std::ostringstream iters;
  iters << "family,scenario,seed,iteration,new_adv,cumul_adv,train_set_size,"
           "round_er_pct,round_avg_q\n";
  for (const RunRow& row : rows) {
    for (const IterationRecord& rec : row.result.records) {
      if (!iter_header) {
        md << "\n## Iteration records\n\n"
           << "| Family | Scenario | Seed | Iter. | New Adv. | Cumul. Adv. |\n"
           << "|---|---|---|---|---|---|\n";
        iter_header = true;
      }
      md << "| " << row.family << " | " << to_string(row.scenario) << " | "
         << row.seed << " | " << rec.iteration << " | " << rec.new_adv_count
         << " | " << rec.cumulative_adv_count << " |\n";
      iters << row.family << ',' << to_string(row.scenario) << ',' << row.seed
            << ',' << rec.iteration << ',' << rec.new_adv_count << ','
            << rec.cumulative_adv_count << ',' << rec.train_set_size << ','
            << format_percent(rec.round_evasion_rate_pct) << ','
            << format_ratio(rec.round_avg_queries) << '\n';
    }
  }
  write_text(out_dir / "summary.md", md.str());
  write_text(out_dir / "iterations.csv", iters.str());
}

}  // namespace

int run_experiments(const ExperimentConfig& base_config,
                    const RunOverrides& overrides) {
  ExperimentConfig config = base_config;
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  if (overrides.seeds) config.seeds = *overrides.seeds;
  if (overrides.scenario && *overrides.scenario != "all")
    config.scenarios = {scenario_from_string(*overrides.scenario)};

  const auto issues = validate_config(config);
  if (!issues.empty()) {
    for (const std::string& issue : issues)
      std::cerr << "config error: " << issue << '\n';
    return 2;
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir / "results");
  write_text(out_dir / "effective_config.json",
             effective_config_json(config).dump(2) + "\n");

  std::vector<RunRow> rows;
  bool any_failed = false;
  for (const FamilySpec& family : config.families) {
    Dataset data;
    ActionSpace space;
    try {
      data = family.synthetic ? generate_synthetic_family(family.synth)
                              : load_csv(family.csv_path, family.label_column);
      data.family = family.name;
      const std::size_t mutable_count =
          family.synthetic ? family.synth.mutable_count : family.mutable_count;
      space = build_default_action_space(data, mutable_count);
    } catch (const std::exception& e) {
      std::cerr << "family '" << family.name << "': " << e.what() << '\n';
      any_failed = true;
      continue;
    }

    for (std::uint64_t seed : config.seeds) {
      DatasetSplit split;
      try {
        split = split_dataset(data, config.split, seed);
      } catch (const std::exception& e) {
        std::cerr << "family '" << family.name << "' seed " << seed << ": "
                  << e.what() << '\n';
        any_failed = true;
        continue;
      }
      for (Scenario scenario : config.scenarios) {
        RunSettings settings;
        settings.grid = config.grid;
        settings.space = space;
        settings.policy = config.policy;
        settings.budget = config.budget;
        settings.criterion = config.criterion;
        settings.seed = seed;
        try {
          ExperimentResult result;
          switch (scenario) {
            case Scenario::baseline:
              result = run_baseline(split.train, split.val, split.test,
                                    settings);
              break;
            case Scenario::adversarial_retrain:
              result = run_adversarial_retrain(split.train, split.val,
                                               split.test, settings);
              break;
            case Scenario::bilevel_ibr:
              result = run_bilevel(split.train, split.val, split.test,
                                   settings, config.criterion);
              break;
          }
          // the snapshot pins the experiment, not where its files landed
          result.config_snapshot = effective_config_json(config);
          result.config_snapshot.erase("output_dir");

          const fs::path dir =
              out_dir / "results" / family.name / to_string(scenario);
          fs::create_directories(dir);
          write_text(dir / ("seed" + std::to_string(seed) + ".json"),
                     result_to_json(result).dump(2) + "\n");
          rows.push_back({family.name, scenario, seed, std::move(result)});
        } catch (const std::exception& e) {
          std::cerr << "run failed (" << family.name << '/'
                    << to_string(scenario) << "/seed" << seed
                    << "): " << e.what() << '\n';
          any_failed = true;
        }
      }
    }
  }
  write_summary(out_dir, rows);
  return any_failed ? 1 : 0;
}

}  // namespace coevo
