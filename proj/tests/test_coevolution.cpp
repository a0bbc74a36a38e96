#include <vector>

#include "coevo/coevolution.hpp"
#include "coevo/fingerprint.hpp"
#include "doctest.h"

using namespace coevo;

namespace {

IterationRecord record(int iteration, std::size_t new_adv, double round_er) {
  IterationRecord r;
  r.iteration = iteration;
  r.new_adv_count = new_adv;
  r.round_evasion_rate_pct = round_er;
  return r;
}

struct Fixture {
  Dataset train, val, test;
  RunSettings settings;

  explicit Fixture(std::uint64_t seed, std::size_t per_class = 60) {
    SyntheticFamilyConfig config;
    config.n_malware = per_class;
    config.n_benign = per_class;
    config.seed = seed;
    const Dataset data = generate_synthetic_family(config);
    const DatasetSplit split = split_dataset(data, {}, seed);
    train = split.train;
    val = split.val;
    test = split.test;
    settings.grid = {[] {
      Hyperparameters hp;
      hp.n_trees = 25;
      return hp;
    }()};
    settings.space = build_default_action_space(data, config.mutable_count);
    settings.budget = {20, 60};
    settings.seed = seed;
  }
};

}  // namespace

TEST_CASE("check_convergence rules") {
  ConvergenceCriterion crit;  // max_iter 10, eps 1.0, patience 2

  SUBCASE("zero new adversarials converges immediately") {
    CHECK(check_convergence({record(1, 0, 0.0)}, crit) ==
          ConvergenceStatus::converged);
  }
  SUBCASE("single record with patience 2 keeps going") {
    CHECK(check_convergence({record(1, 5, 40.0)}, crit) ==
          ConvergenceStatus::keep_going);
  }
  SUBCASE("ER stability over patience consecutive iterations") {
    ConvergenceCriterion c = crit;
    c.epsilon_er = 0.2;
    c.zero_new_adv_stop = false;
    const std::vector<IterationRecord> stable{
        record(1, 5, 40.0), record(2, 4, 39.9), record(3, 3, 39.85)};
    CHECK(check_convergence(stable, c) == ConvergenceStatus::converged);
    const std::vector<IterationRecord> drifting{
        record(1, 5, 40.0), record(2, 4, 39.0), record(3, 3, 39.85)};
    CHECK(check_convergence(drifting, c) == ConvergenceStatus::keep_going);
  }
  SUBCASE("budget exhaustion at max_iter") {
    ConvergenceCriterion c = crit;
    c.max_iter = 3;
    c.epsilon_er = 0.0;
    std::vector<IterationRecord> records{
        record(1, 5, 90.0), record(2, 5, 50.0), record(3, 5, 20.0)};
    CHECK(check_convergence(records, c) == ConvergenceStatus::budget_exhausted);
  }
}

TEST_CASE("run_baseline on the default-style family") {
  Fixture f(1);
  const ExperimentResult r = run_baseline(f.train, f.val, f.test, f.settings);
  CHECK(r.scenario == Scenario::baseline);
  CHECK(r.records.empty());  // zero attack-training rounds
  CHECK(r.clean.metrics.accuracy >= 0.90);
  REQUIRE(r.adversarial.evasion_rate_pct);
  CHECK(*r.adversarial.evasion_rate_pct >= 70.0);
}

TEST_CASE("run_baseline with an empty action space measures the FN rate") {
  Fixture f(2);
  f.settings.space.actions.clear();
  const ExperimentResult r = run_baseline(f.train, f.val, f.test, f.settings);
  const double fn_rate =
      100.0 * static_cast<double>(r.clean.counts.fn) /
      static_cast<double>(r.clean.counts.tp + r.clean.counts.fn);
  REQUIRE(r.adversarial.evasion_rate_pct);
  CHECK(*r.adversarial.evasion_rate_pct == doctest::Approx(fn_rate));
}

TEST_CASE("experiments are deterministic end to end") {
  Fixture f(3);
  const ExperimentResult a = run_baseline(f.train, f.val, f.test, f.settings);
  const ExperimentResult b = run_baseline(f.train, f.val, f.test, f.settings);
  CHECK(model_fingerprint(a.final_model) == model_fingerprint(b.final_model));
  CHECK(a.clean.metrics.accuracy == b.clean.metrics.accuracy);
  CHECK(a.adversarial.evasion_rate_pct == b.adversarial.evasion_rate_pct);
  CHECK(a.adversarial.avg_queries == b.adversarial.avg_queries);

  const ExperimentResult c =
      run_bilevel(f.train, f.val, f.test, f.settings, {});
  const ExperimentResult d =
      run_bilevel(f.train, f.val, f.test, f.settings, {});
  REQUIRE(c.records.size() == d.records.size());
  for (std::size_t i = 0; i < c.records.size(); ++i)
    CHECK(c.records[i].model_fingerprint == d.records[i].model_fingerprint);
}

TEST_CASE("run_adversarial_retrain bookkeeping") {
  Fixture f(4);
  const ExperimentResult r =
      run_adversarial_retrain(f.train, f.val, f.test, f.settings);
  CHECK(r.scenario == Scenario::adversarial_retrain);
  REQUIRE(r.records.size() == 1);
  const IterationRecord& it = r.records[0];
  CHECK(it.iteration == 1);
  CHECK(it.cumulative_adv_count == it.new_adv_count);
  // augmented set size = |train| + |deduplicated evasions|
  CHECK(it.train_set_size == f.train.size() + it.new_adv_count);
}

TEST_CASE("zero evasions leave the retrained model equal to baseline") {
  Fixture f(5);
  // an action space whose single arm never moves the vector
  f.settings.space.actions = {{0, ActionKind::additive, 0, 0.0, "no-op"}};
  const ExperimentResult base =
      run_baseline(f.train, f.val, f.test, f.settings);
  const ExperimentResult retrained =
      run_adversarial_retrain(f.train, f.val, f.test, f.settings);
  REQUIRE(retrained.records.size() == 1);
  CHECK(retrained.records[0].new_adv_count == 0);
  CHECK(retrained.final_model.provenance.train_fingerprint ==
        base.final_model.provenance.train_fingerprint);
  for (const Sample& s : f.test.samples)
    CHECK(predict_label(retrained.final_model, s.features) ==
          predict_label(base.final_model, s.features));
}

TEST_CASE("run_bilevel exits after one round against a no-op attacker") {
  Fixture f(6);
  f.settings.space.actions = {{0, ActionKind::additive, 0, 0.0, "no-op"}};
  ConvergenceCriterion crit;
  const ExperimentResult r =
      run_bilevel(f.train, f.val, f.test, f.settings, crit);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].new_adv_count == 0);
  CHECK(r.termination == ConvergenceStatus::converged);
}

TEST_CASE("run_bilevel invariants on a real run") {
  Fixture f(7);
  ConvergenceCriterion crit;
  const ExperimentResult r =
      run_bilevel(f.train, f.val, f.test, f.settings, crit);
  CHECK(r.scenario == Scenario::bilevel_ibr);
  REQUIRE_FALSE(r.records.empty());
  CHECK(r.records.size() <= static_cast<std::size_t>(crit.max_iter));

  std::size_t cumulative = 0;
  for (const IterationRecord& it : r.records) {
    CHECK(it.cumulative_adv_count >= cumulative);  // Table 4 monotonicity
    CHECK(it.cumulative_adv_count == cumulative + it.new_adv_count);
    cumulative = it.cumulative_adv_count;
    CHECK(it.train_set_size == f.train.size() + cumulative);
  }
}

TEST_CASE("scenario nesting: one capped bilevel round equals advtrain") {
  Fixture f(8);
  ConvergenceCriterion one_round;
  one_round.max_iter = 1;
  one_round.zero_new_adv_stop = false;
  one_round.patience = 100;  // ER-stability cannot fire either

  const ExperimentResult advtrain =
      run_adversarial_retrain(f.train, f.val, f.test, f.settings);
  const ExperimentResult bilevel =
      run_bilevel(f.train, f.val, f.test, f.settings, one_round);

  // identical trees; only the provenance scenario tag may differ
  CHECK(model_to_json(bilevel.final_model).at("trees") ==
        model_to_json(advtrain.final_model).at("trees"));
  CHECK(bilevel.final_model.provenance.train_fingerprint ==
        advtrain.final_model.provenance.train_fingerprint);
  for (const Sample& s : f.test.samples)
    CHECK(predict_label(bilevel.final_model, s.features) ==
          predict_label(advtrain.final_model, s.features));
}

TEST_CASE("adversarial training data stays labeled malware everywhere") {
  Fixture f(9);
  const ExperimentResult r =
      run_bilevel(f.train, f.val, f.test, f.settings, {});
  // reconstructed from the result JSON to cover the serialization too
  const nlohmann::json j = result_to_json(r);
  CHECK(j.at("scenario") == "bilevel");
  CHECK(j.at("iterations").size() == r.records.size());
}

TEST_CASE("scenario and status names round-trip") {
  CHECK(scenario_from_string("baseline") == Scenario::baseline);
  CHECK(scenario_from_string("advtrain") == Scenario::adversarial_retrain);
  CHECK(scenario_from_string("bilevel") == Scenario::bilevel_ibr);
  CHECK_THROWS_AS(scenario_from_string("nope"), std::invalid_argument);
}
