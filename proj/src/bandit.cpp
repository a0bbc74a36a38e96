#include "coevo/bandit.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "coevo/fingerprint.hpp"

namespace coevo {

ArmStats update_arm(ArmStats stats, RewardOutcome reward) {
  if (reward == RewardOutcome::success)
    ++stats.successes;
  else
    ++stats.failures;
  return stats;
}

const char* to_string(PolicyKind k) {
  return k == PolicyKind::thompson ? "thompson" : "ucb1";
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "thompson") return PolicyKind::thompson;
  if (s == "ucb1") return PolicyKind::ucb1;
  throw std::invalid_argument("unknown bandit policy: '" + s + "'");
}

void AttackBudget::validate() const {
  if (max_actions_per_episode < 1)
    throw std::invalid_argument("max_actions_per_episode must be >= 1");
  if (max_queries_per_sample < max_actions_per_episode)
    throw std::invalid_argument(
        "max_queries_per_sample must be >= max_actions_per_episode");
}

double AttackRoundResult::evasion_rate_pct() const {
  if (episodes.empty()) return 0.0;
  return 100.0 * static_cast<double>(evasion_count) /
         static_cast<double>(episodes.size());
}

namespace {

double beta_draw(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace

int select_arm(const std::vector<ArmStats>& stats, const BanditPolicy& policy,
               std::uint64_t step) {
  if (stats.empty()) throw std::invalid_argument("select_arm: no arms");

  int best_id = stats.front().action_id;
  double best_value = -std::numeric_limits<double>::infinity();
  if (policy.kind == PolicyKind::thompson) {
    std::mt19937_64 rng(mix_seed(policy.seed, step));
    for (const ArmStats& arm : stats) {
      const double v =
          beta_draw(rng, static_cast<double>(arm.successes) + 1.0,
                    static_cast<double>(arm.failures) + 1.0);
      if (v > best_value || (v == best_value && arm.action_id < best_id)) {
        best_value = v;
        best_id = arm.action_id;
      }
    }
    return best_id;
  }

  const double t = std::max<double>(1.0, static_cast<double>(step));
  for (const ArmStats& arm : stats) {
    double v;
    if (arm.pulls() == 0) {
      v = std::numeric_limits<double>::infinity();
    } else {
      const double n = static_cast<double>(arm.pulls());
      const double mean = static_cast<double>(arm.successes) / n;
      v = mean + policy.ucb_constant * std::sqrt(2.0 * std::log(t) / n);
    }
    if (v > best_value || (v == best_value && arm.action_id < best_id)) {
      best_value = v;
      best_id = arm.action_id;
    }
  }
  return best_id;
}

PerturbationTrace refine(ModelQuery& model, const FeatureVector& x_original,
                         const PerturbationTrace& trace,
                         const ActionSpace& space) {
  std::vector<TraceStep> kept = trace.steps;
  std::size_t i = 0;
  while (i < kept.size()) {
    std::vector<TraceStep> candidate = kept;
    candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(i));
    const FeatureVector replayed =
        apply_trace(x_original, PerturbationTrace{candidate}, space);
    if (model.label(replayed) == Label::benign)
      kept = std::move(candidate);  // removal kept, same position re-checked
    else
      ++i;
  }
  return PerturbationTrace{std::move(kept)};
}

AttackEpisodeResult attack_sample(ModelQuery& model, const Sample& x,
                                  const ActionSpace& space,
                                  std::vector<ArmStats>& stats,
                                  const BanditPolicy& policy,
                                  const AttackBudget& budget,
                                  std::uint64_t episode_seed,
                                  std::uint64_t prior_queries) {
  budget.validate();
  if (x.label != Label::malware)
    throw std::invalid_argument("attack_sample: sample is not malware");
  if (stats.empty()) throw std::invalid_argument("attack_sample: no arms");

  QueryCounter counting(model);
  AttackEpisodeResult result;
  result.queries_used = prior_queries;

  FeatureVector current = x.features;
  int actions_applied = 0;
  while (actions_applied < budget.max_actions_per_episode &&
         prior_queries + counting.count() <
             static_cast<std::uint64_t>(budget.max_queries_per_sample)) {
    std::uint64_t total_pulls = 0;
    for (const ArmStats& arm : stats) total_pulls += arm.pulls();
    const int arm_id = select_arm(stats, policy, total_pulls + 1);
    const Action& action = space.action_by_id(arm_id);

    auto [next, step] = apply_action(
        current, action, space,
        mix_seed(episode_seed, static_cast<std::uint64_t>(actions_applied)));
    current = std::move(next);
    result.trace.steps.push_back(step);
    ++actions_applied;

    const bool benign = counting.label(current) == Label::benign;
    for (ArmStats& arm : stats)
      if (arm.action_id == arm_id)
        arm = update_arm(arm, benign ? RewardOutcome::success
                                     : RewardOutcome::failure);
    if (benign) {
      result.evaded = true;
      break;
    }
  }

  if (result.evaded) {
    result.refined_trace = refine(counting, x.features, result.trace, space);
    result.adversarial_vector =
        apply_trace(x.features, *result.refined_trace, space);
  }
  result.queries_used = prior_queries + counting.count();
  return result;
}

AttackRoundResult attack_dataset(ModelQuery& model,
                                 const Dataset& malware_samples,
                                 const ActionSpace& space,
                                 const BanditPolicy& policy,
                                 const AttackBudget& budget, int iteration,
                                 std::uint64_t round_seed) {
  if (malware_samples.samples.empty())
    throw std::invalid_argument("attack_dataset: empty malware set");
  for (const Sample& s : malware_samples.samples)
    if (s.label != Label::malware)
      throw std::invalid_argument("attack_dataset: non-malware sample");
  budget.validate();

  // fresh shared arm stats for this round
  std::vector<ArmStats> stats;
  stats.reserve(space.actions.size());
  for (const Action& a : space.actions) stats.push_back({a.id, 0, 0});

  BanditPolicy round_policy = policy;
  round_policy.seed = mix_seed(policy.seed, static_cast<std::uint64_t>(
                                                iteration >= 0 ? iteration : 0));

  AttackRoundResult round;
  round.new_adversarial.family = malware_samples.family;
  round.new_adversarial.dim = malware_samples.dim;
  round.new_adversarial.seed = round_seed;

  for (std::size_t k = 0; k < malware_samples.samples.size(); ++k) {
    const Sample& s = malware_samples.samples[k];
    QueryCounter counting(model);
    AttackEpisodeResult episode;

    if (counting.label(s.features) == Label::benign) {
      // already misclassified: trivial evasion at delta = 0
      episode.sample_id = k;
      episode.evaded = true;
      episode.queries_used = counting.count();
      episode.adversarial_vector = s.features;
    } else if (space.actions.empty()) {
      // no transformations available: only the delta = 0 attempt exists
      episode.sample_id = k;
      episode.queries_used = counting.count();
    } else {
      episode = attack_sample(counting, s, space, stats, round_policy, budget,
                              mix_seed(round_seed, k), counting.count());
      episode.sample_id = k;
    }

    if (episode.evaded) {
      ++round.evasion_count;
      Sample adv;
      adv.features = *episode.adversarial_vector;
      adv.label = Label::malware;
      adv.family = s.family;
      adv.origin = Origin::adversarial(iteration);
      round.new_adversarial.samples.push_back(std::move(adv));
    }
    round.total_queries += episode.queries_used;
    round.episodes.push_back(std::move(episode));
  }
  return round;
}

}  // namespace coevo
