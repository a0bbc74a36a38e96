#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coevo/actions.hpp"
#include "coevo/data.hpp"
#include "coevo/forest.hpp"

namespace coevo {

struct ArmStats {
  int action_id = 0;
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;
  std::uint64_t pulls() const { return successes + failures; }
};

enum class RewardOutcome { success, failure };

ArmStats update_arm(ArmStats stats, RewardOutcome reward);

enum class PolicyKind { thompson, ucb1 };

const char* to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

struct BanditPolicy {
  PolicyKind kind = PolicyKind::thompson;
  double ucb_constant = 1.0;  // ucb1 only
  std::uint64_t seed = 0;
};

struct AttackBudget {
  int max_actions_per_episode = 200;
  int max_queries_per_sample = 300;
  void validate() const;
};

// Black-box view of the defender. Every call through a QueryCounter wrapper
// counts as one query.
class ModelQuery {
 public:
  virtual ~ModelQuery() = default;
  virtual Label label(const FeatureVector& x) = 0;
  virtual double score(const FeatureVector& x) = 0;
};

class ForestQuery final : public ModelQuery {
 public:
  explicit ForestQuery(const RandomForestModel& model) : model_(model) {}
  Label label(const FeatureVector& x) override {
    return predict_label(model_, x);
  }
  double score(const FeatureVector& x) override {
    return predict_score(model_, x);
  }

 private:
  const RandomForestModel& model_;
};

class FunctionQuery final : public ModelQuery {
 public:
  explicit FunctionQuery(std::function<Label(const FeatureVector&)> fn)
      : fn_(std::move(fn)) {}
  Label label(const FeatureVector& x) override { return fn_(x); }
  double score(const FeatureVector& x) override {
    return fn_(x) == Label::malware ? 1.0 : 0.0;
  }

 private:
  std::function<Label(const FeatureVector&)> fn_;
};

class QueryCounter final : public ModelQuery {
 public:
  explicit QueryCounter(ModelQuery& inner) : inner_(inner) {}
  Label label(const FeatureVector& x) override {
    ++count_;
    return inner_.label(x);
  }
  double score(const FeatureVector& x) override {
    ++count_;
    return inner_.score(x);
  }
  std::uint64_t count() const { return count_; }

 private:
  ModelQuery& inner_;
  std::uint64_t count_ = 0;
};

struct AttackEpisodeResult {
  std::size_t sample_id = 0;
  bool evaded = false;
  std::uint64_t queries_used = 0;
  PerturbationTrace trace;
  std::optional<PerturbationTrace> refined_trace;
  std::optional<FeatureVector> adversarial_vector;
};

struct AttackRoundResult {
  std::vector<AttackEpisodeResult> episodes;
  Dataset new_adversarial;
  std::uint64_t total_queries = 0;
  std::size_t evasion_count = 0;
  double evasion_rate_pct() const;
};

// Thompson: argmax of Beta(successes+1, failures+1) draws; UCB1: argmax of
// mean + c*sqrt(2 ln(step)/pulls), unplayed arms first. Ties go to the
// lowest action id; deterministic in (stats, policy.seed, step).
int select_arm(const std::vector<ArmStats>& stats, const BanditPolicy& policy,
               std::uint64_t step);

// Exploration stage: pull arms and query the model until evasion or budget
// exhaustion; on evasion, runs the refinement pass. `prior_queries` are
// queries already spent on this sample (the round-level detection check) and
// count against max_queries_per_sample.
AttackEpisodeResult attack_sample(ModelQuery& model, const Sample& x,
                                  const ActionSpace& space,
                                  std::vector<ArmStats>& stats,
                                  const BanditPolicy& policy,
                                  const AttackBudget& budget,
                                  std::uint64_t episode_seed,
                                  std::uint64_t prior_queries = 0);

// Refinement stage: one left-to-right pass; each step is tentatively removed
// (one query) and the removal is kept iff the remainder still evades.
// Precondition (not re-queried): replaying `trace` on x_original evades.
PerturbationTrace refine(ModelQuery& model, const FeatureVector& x_original,
                         const PerturbationTrace& trace,
                         const ActionSpace& space);

// One attack round against a fixed model: fresh shared arm stats, one episode
// per malware sample. Samples the model already labels benign count as evaded
// with one query and an empty trace.
AttackRoundResult attack_dataset(ModelQuery& model,
                                 const Dataset& malware_samples,
                                 const ActionSpace& space,
                                 const BanditPolicy& policy,
                                 const AttackBudget& budget, int iteration,
                                 std::uint64_t round_seed);

}  // namespace coevo
