#include "coevo/coevolution.hpp"

#include <cmath>
#include <stdexcept>

#include "coevo/fingerprint.hpp"

namespace coevo {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::baseline:
      return "baseline";
    case Scenario::adversarial_retrain:
      return "advtrain";
    case Scenario::bilevel_ibr:
      return "bilevel";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "baseline") return Scenario::baseline;
  if (s == "advtrain" || s == "adversarial_retrain")
    return Scenario::adversarial_retrain;
  if (s == "bilevel" || s == "bilevel_ibr") return Scenario::bilevel_ibr;
  throw std::invalid_argument("unknown scenario: '" + s + "'");
}

void ConvergenceCriterion::validate() const {
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (epsilon_er < 0.0) throw std::invalid_argument("epsilon_er must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

const char* to_string(ConvergenceStatus s) {
  switch (s) {
    case ConvergenceStatus::keep_going:
      return "continue";
    case ConvergenceStatus::converged:
      return "converged";
    case ConvergenceStatus::budget_exhausted:
      return "budget_exhausted";
  }
  return "?";
}

ConvergenceStatus check_convergence(const std::vector<IterationRecord>& records,
                                    const ConvergenceCriterion& criterion) {
  criterion.validate();
  if (records.empty())
    throw std::invalid_argument("check_convergence: no records");

  if (criterion.zero_new_adv_stop && records.back().new_adv_count == 0)
    return ConvergenceStatus::converged;

  if (records.size() >= static_cast<std::size_t>(criterion.patience) + 1) {
    bool stable = true;
    for (int k = 0; k < criterion.patience; ++k) {
      const auto i = records.size() - 1 - static_cast<std::size_t>(k);
      const double diff = std::abs(records[i].round_evasion_rate_pct -
                                   records[i - 1].round_evasion_rate_pct);
      if (diff > criterion.epsilon_er) {
        stable = false;
        break;
      }
    }
    if (stable) return ConvergenceStatus::converged;
  }

  if (records.size() >= static_cast<std::size_t>(criterion.max_iter))
    return ConvergenceStatus::budget_exhausted;
  return ConvergenceStatus::keep_going;
}

namespace {

// Seed stream indices, one namespace per purpose so scenarios that share a
// prefix of the schedule produce identical models.
constexpr std::uint64_t kTuneStream = 1;
constexpr std::uint64_t kModelStream = 100;   // + iteration
constexpr std::uint64_t kRoundStream = 1000;  // + iteration
constexpr std::uint64_t kPolicyStream = 2000;
constexpr std::uint64_t kTestAttackStream = 4000;

Dataset malware_subset(const Dataset& data) {
  Dataset out;
  out.family = data.family;
  out.dim = data.dim;
  out.seed = data.seed;
  for (const Sample& s : data.samples)
    if (s.label == Label::malware) out.samples.push_back(s);
  return out;
}

ExperimentResult run_experiment(Scenario scenario, const Dataset& train,
                                const Dataset& val, const Dataset& test,
                                const RunSettings& settings,
                                const ConvergenceCriterion& criterion) {
  settings.budget.validate();
  criterion.validate();

  ExperimentResult result;
  result.scenario = scenario;
  result.seed = settings.seed;

  // Hyperparameters are tuned once on the baseline split and reused by
  // every retrain.
  std::vector<Hyperparameters> grid = settings.grid;
  for (auto& hp : grid) hp.seed = mix_seed(settings.seed, kTuneStream);
  Hyperparameters hp = tune(train, val, grid);
  result.tuned_hp = hp;

  hp.seed = mix_seed(settings.seed, kModelStream);
  RandomForestModel model = train_forest(train, hp);
  model.provenance.scenario = to_string(scenario);
  model.provenance.iteration = 0;

  const Dataset train_malware = malware_subset(train);
  BanditPolicy policy = settings.policy;
  policy.seed = mix_seed(settings.seed, kPolicyStream);

  const int rounds = scenario == Scenario::baseline ? 0
                     : scenario == Scenario::adversarial_retrain
                         ? 1
                         : criterion.max_iter;

  Dataset augmented = train;
  std::size_t cumulative = 0;
  result.termination = ConvergenceStatus::converged;

  for (int i = 1; i <= rounds; ++i) {
    ForestQuery query(model);
    const AttackRoundResult round = attack_dataset(
        query, train_malware, settings.space, policy, settings.budget, i,
        mix_seed(settings.seed, kRoundStream + static_cast<std::uint64_t>(i)));

    const std::size_t before = augmented.size();
    augmented = augment(augmented, {round.new_adversarial});
    const std::size_t admitted = augmented.size() - before;
    cumulative += admitted;

    hp.seed =
        mix_seed(settings.seed, kModelStream + static_cast<std::uint64_t>(i));
    model = train_forest(augmented, hp);
    model.provenance.scenario = to_string(scenario);
    model.provenance.iteration = i;

    IterationRecord record;
    record.iteration = i;
    record.new_adv_count = admitted;
    record.cumulative_adv_count = cumulative;
    record.train_set_size = augmented.size();
    record.round_evasion_rate_pct = round.evasion_rate_pct();
    record.round_avg_queries = avg_queries(round.episodes);
    record.model_fingerprint = model_fingerprint(model);
    result.records.push_back(record);

    if (scenario == Scenario::bilevel_ibr) {
      const ConvergenceStatus status = check_convergence(result.records,
                                                         criterion);
      if (status != ConvergenceStatus::keep_going) {
        result.termination = status;
        break;
      }
      result.termination = ConvergenceStatus::budget_exhausted;
    }
  }

  result.clean = clean_report(model, test);
  BanditPolicy test_policy = settings.policy;
  test_policy.seed = mix_seed(settings.seed, kTestAttackStream);
  const TestVariant variant = build_adversarial_test_set(
      model, test, settings.space, test_policy, settings.budget,
      mix_seed(settings.seed, kTestAttackStream + 1));
  result.adversarial = adversarial_report(model, variant);
  result.final_model = std::move(model);
  return result;
}

}  // namespace

ExperimentResult run_baseline(const Dataset& train, const Dataset& val,
                              const Dataset& test,
                              const RunSettings& settings) {
  return run_experiment(Scenario::baseline, train, val, test, settings,
                        settings.criterion);
}

ExperimentResult run_adversarial_retrain(const Dataset& train,
                                         const Dataset& val,
                                         const Dataset& test,
                                         const RunSettings& settings) {
  return run_experiment(Scenario::adversarial_retrain, train, val, test,
                        settings, settings.criterion);
}

ExperimentResult run_bilevel(const Dataset& train, const Dataset& val,
                             const Dataset& test, const RunSettings& settings,
                             const ConvergenceCriterion& criterion) {
  return run_experiment(Scenario::bilevel_ibr, train, val, test, settings,
                        criterion);
}

nlohmann::json iteration_record_to_json(const IterationRecord& r) {
  nlohmann::json j;
  j["iteration"] = r.iteration;
  j["new_adv"] = r.new_adv_count;
  j["cumul_adv"] = r.cumulative_adv_count;
  j["train_set_size"] = r.train_set_size;
  j["round_er_pct"] = r.round_evasion_rate_pct;
  j["round_avg_q"] = r.round_avg_queries ? nlohmann::json(*r.round_avg_queries)
                                         : nlohmann::json();
  j["model_fingerprint"] = Fnv1a64::to_hex(r.model_fingerprint);
  return j;
}

nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["scenario"] = to_string(r.scenario);
  j["seed"] = r.seed;
  j["termination"] = to_string(r.termination);
  j["tuned_hp"] = {{"n_trees", r.tuned_hp.n_trees},
                   {"max_depth", r.tuned_hp.max_depth},
                   {"min_samples_leaf", r.tuned_hp.min_samples_leaf},
                   {"features_per_split", r.tuned_hp.features_per_split},
                   {"bootstrap", r.tuned_hp.bootstrap}};
  j["model_fingerprint"] = Fnv1a64::to_hex(model_fingerprint(r.final_model));
  nlohmann::json records = nlohmann::json::array();
  for (const IterationRecord& rec : r.records)
    records.push_back(iteration_record_to_json(rec));
  j["iterations"] = std::move(records);
  j["clean"] = report_to_json(r.clean);
  j["adversarial"] = report_to_json(r.adversarial);
  if (!r.config_snapshot.is_null()) j["config"] = r.config_snapshot;
  return j;
}

}  // namespace coevo
