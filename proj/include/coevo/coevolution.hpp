#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coevo/actions.hpp"
#include "coevo/bandit.hpp"
#include "coevo/data.hpp"
#include "coevo/forest.hpp"
#include "coevo/metrics.hpp"

#include "json.hpp"

namespace coevo {

enum class Scenario { baseline, adversarial_retrain, bilevel_ibr };

const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct ConvergenceCriterion {
  int max_iter = 10;
  double epsilon_er = 1.0;  // percentage points of round-ER drift tolerated
  bool zero_new_adv_stop = true;
  int patience = 2;  // consecutive stable iterations required

  void validate() const;
};

enum class ConvergenceStatus { keep_going, converged, budget_exhausted };

const char* to_string(ConvergenceStatus s);

struct IterationRecord {
  int iteration = 0;
  std::size_t new_adv_count = 0;         // deduplicated samples admitted
  std::size_t cumulative_adv_count = 0;  // running total of admitted samples
  std::size_t train_set_size = 0;        // augmented set after this iteration
  double round_evasion_rate_pct = 0.0;   // raw round ER over train malware
  std::optional<double> round_avg_queries;
  std::uint64_t model_fingerprint = 0;  // model trained at this iteration
};

struct ExperimentResult {
  Scenario scenario = Scenario::baseline;
  RandomForestModel final_model;
  Hyperparameters tuned_hp;
  std::vector<IterationRecord> records;
  MetricsReport clean;
  MetricsReport adversarial;
  ConvergenceStatus termination = ConvergenceStatus::converged;
  std::uint64_t seed = 0;
  nlohmann::json config_snapshot;
};

struct RunSettings {
  std::vector<Hyperparameters> grid;  // seeds overwritten per run
  ActionSpace space;
  BanditPolicy policy;
  AttackBudget budget;
  ConvergenceCriterion criterion;
  std::uint64_t seed = 0;
};

// keep_going while neither rule fires; converged on zero-new-adversarials or
// round-ER stability over `patience` iterations; budget_exhausted at
// max_iter without convergence.
ConvergenceStatus check_convergence(const std::vector<IterationRecord>& records,
                                    const ConvergenceCriterion& criterion);

ExperimentResult run_baseline(const Dataset& train, const Dataset& val,
                              const Dataset& test, const RunSettings& settings);

ExperimentResult run_adversarial_retrain(const Dataset& train,
                                         const Dataset& val,
                                         const Dataset& test,
                                         const RunSettings& settings);

ExperimentResult run_bilevel(const Dataset& train, const Dataset& val,
                             const Dataset& test, const RunSettings& settings,
                             const ConvergenceCriterion& criterion);

nlohmann::json iteration_record_to_json(const IterationRecord& r);
nlohmann::json result_to_json(const ExperimentResult& r);

}  // namespace coevo
