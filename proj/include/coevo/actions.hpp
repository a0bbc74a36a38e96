#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coevo/data.hpp"

#include "json.hpp"

namespace coevo {

enum class ActionKind { additive, set_value, randomized_additive };

const char* to_string(ActionKind k);
ActionKind action_kind_from_string(const std::string& s);

struct Action {
  int id = 0;
  ActionKind kind = ActionKind::additive;
  int target_index = 0;
  // additive delta, fixed value, or upper bound of a uniform random delta
  double magnitude = 0.0;
  std::string description;
};

struct CoordinateBounds {
  double min = 0.0;
  double max = 0.0;
};

struct ActionSpace {
  std::vector<Action> actions;
  std::vector<bool> mutable_mask;
  std::vector<bool> monotone_mask;  // subset of mutable_mask
  std::vector<CoordinateBounds> value_bounds;

  std::size_t dim() const { return mutable_mask.size(); }
  void validate() const;  // throws std::invalid_argument
  const Action& action_by_id(int id) const;
};

struct TraceStep {
  int action_id = 0;
  int target_index = 0;
  double delta = 0.0;  // realized change after clamping
};

struct PerturbationTrace {
  std::vector<TraceStep> steps;
  std::size_t size() const { return steps.size(); }
};

// Applies one action; exactly one coordinate changes, result is clamped into
// the coordinate's bounds. randomized_additive draws uniformly in
// [0, magnitude] from rng_seed.
std::pair<FeatureVector, TraceStep> apply_action(const FeatureVector& x,
                                                 const Action& a,
                                                 const ActionSpace& space,
                                                 std::uint64_t rng_seed);

// Left-to-right replay of realized deltas, re-clamped into bounds so subset
// replays stay inside the space.
FeatureVector apply_trace(const FeatureVector& x, const PerturbationTrace& t,
                          const ActionSpace& space);

// True iff immutable coordinates are bit-equal, monotone coordinates did not
// decrease, and all values lie within bounds.
bool is_valid_perturbation(const FeatureVector& x, const FeatureVector& x_adv,
                           const ActionSpace& space);

// Per mutable coordinate: additive(+1 sigma), additive(+3 sigma),
// randomized_additive(2 sigma), and set_value(benign mean) on non-monotone
// coordinates, where sigma/mean are benign-class statistics of `reference`.
// Bounds are the observed per-coordinate range of `reference`.
ActionSpace build_default_action_space(const Dataset& reference,
                                       std::size_t mutable_count,
                                       const std::vector<bool>* monotone_mask =
                                           nullptr);

nlohmann::json action_space_to_json(const ActionSpace& space);
ActionSpace action_space_from_json(const nlohmann::json& j);

}  // namespace coevo
