#include "coevo/actions.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>

#include "coevo/fingerprint.hpp"

namespace coevo {

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::additive:
      return "additive";
    case ActionKind::set_value:
      return "set_value";
    case ActionKind::randomized_additive:
      return "randomized_additive";
  }
  return "?";
}

ActionKind action_kind_from_string(const std::string& s) {
  if (s == "additive") return ActionKind::additive;
  if (s == "set_value") return ActionKind::set_value;
  if (s == "randomized_additive") return ActionKind::randomized_additive;
  throw std::invalid_argument("unknown action kind: '" + s + "'");
}

void ActionSpace::validate() const {
  const std::size_t d = mutable_mask.size();
  if (monotone_mask.size() != d || value_bounds.size() != d)
    throw std::invalid_argument("action space: mask/bounds length mismatch");
  for (std::size_t j = 0; j < d; ++j) {
    if (monotone_mask[j] && !mutable_mask[j])
      throw std::invalid_argument(
          "action space: monotone coordinate " + std::to_string(j) +
          " is not mutable");
    if (!(value_bounds[j].min <= value_bounds[j].max))
      throw std::invalid_argument("action space: empty bounds at coordinate " +
                                  std::to_string(j));
  }
  for (const Action& a : actions) {
    if (a.target_index < 0 || static_cast<std::size_t>(a.target_index) >= d)
      throw std::invalid_argument("action " + std::to_string(a.id) +
                                  ": target index out of range");
    const auto idx = static_cast<std::size_t>(a.target_index);
    if (!mutable_mask[idx])
      throw std::invalid_argument("action " + std::to_string(a.id) +
                                  ": targets immutable coordinate " +
                                  std::to_string(a.target_index));
    if (monotone_mask[idx]) {
      // monotone coordinates may only grow, so no set_value and no
      // negative additive deltas
      if (a.kind == ActionKind::set_value)
        throw std::invalid_argument("action " + std::to_string(a.id) +
                                    ": set_value on monotone coordinate");
      if (a.magnitude < 0.0)
        throw std::invalid_argument("action " + std::to_string(a.id) +
                                    ": negative magnitude on monotone "
                                    "coordinate");
    }
  }
}

const Action& ActionSpace::action_by_id(int id) const {
  for (const Action& a : actions)
    if (a.id == id) return a;
  throw std::invalid_argument("unknown action id: " + std::to_string(id));
}

namespace {

double clamp_to(double v, const CoordinateBounds& b) {
  return std::min(std::max(v, b.min), b.max);
}

}  // namespace

std::pair<FeatureVector, TraceStep> apply_action(const FeatureVector& x,
                                                 const Action& a,
                                                 const ActionSpace& space,
                                                 std::uint64_t rng_seed) {
  if (x.size() != space.dim())
    throw std::invalid_argument("apply_action: dimension mismatch");
  const auto idx = static_cast<std::size_t>(a.target_index);
  if (idx >= space.dim() || !space.mutable_mask[idx])
    throw std::invalid_argument("apply_action: action " + std::to_string(a.id) +
                                " targets an immutable coordinate");

  double target = x[idx];
  switch (a.kind) {
    case ActionKind::additive:
      target += a.magnitude;
      break;
    case ActionKind::set_value:
      target = a.magnitude;
      break;
    case ActionKind::randomized_additive: {
      std::mt19937_64 rng(rng_seed);
      std::uniform_real_distribution<double> draw(0.0, a.magnitude);
      target += draw(rng);
      break;
    }
  }
  target = clamp_to(target, space.value_bounds[idx]);
  if (!std::isfinite(target))
    throw std::runtime_error("apply_action: non-finite result");

  FeatureVector out = x;
  out[idx] = target;
  return {std::move(out), TraceStep{a.id, a.target_index, target - x[idx]}};
}

FeatureVector apply_trace(const FeatureVector& x, const PerturbationTrace& t,
                          const ActionSpace& space) {
  if (x.size() != space.dim())
    throw std::invalid_argument("apply_trace: dimension mismatch");
  FeatureVector out = x;
  for (const TraceStep& step : t.steps) {
    const auto idx = static_cast<std::size_t>(step.target_index);
    if (idx >= space.dim() || !space.mutable_mask[idx])
      throw std::invalid_argument("apply_trace: step targets an immutable "
                                  "coordinate");
    out[idx] = clamp_to(out[idx] + step.delta, space.value_bounds[idx]);
  }
  return out;
}

bool is_valid_perturbation(const FeatureVector& x, const FeatureVector& x_adv,
                           const ActionSpace& space) {
  if (x.size() != x_adv.size() || x.size() != space.dim())
    throw std::invalid_argument("is_valid_perturbation: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!space.mutable_mask[j]) {
      if (std::memcmp(&x[j], &x_adv[j], sizeof(double)) != 0) return false;
      continue;
    }
    if (space.monotone_mask[j] && x_adv[j] < x[j]) return false;
    if (x_adv[j] < space.value_bounds[j].min ||
        x_adv[j] > space.value_bounds[j].max)
      return false;
  }
  return true;
}

ActionSpace build_default_action_space(const Dataset& reference,
                                       std::size_t mutable_count,
                                       const std::vector<bool>* monotone_mask) {
  const std::size_t d = reference.dim;
  if (mutable_count == 0 || mutable_count >= d)
    throw std::invalid_argument("mutable_count must be in (0, d)");
  if (reference.count(Label::benign) == 0)
    throw std::invalid_argument(
        "default action space needs benign reference samples");

  ActionSpace space;
  space.mutable_mask.assign(d, false);
  for (std::size_t j = 0; j < mutable_count; ++j) space.mutable_mask[j] = true;
  if (monotone_mask) {
    if (monotone_mask->size() != d)
      throw std::invalid_argument("monotone mask length mismatch");
    space.monotone_mask = *monotone_mask;
  } else {
    space.monotone_mask.assign(d, false);
  }

  // benign-class mean/std and global range per coordinate
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  std::size_t nb = 0;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const Sample& s : reference.samples) {
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], s.features[j]);
      hi[j] = std::max(hi[j], s.features[j]);
    }
    if (s.label != Label::benign) continue;
    ++nb;
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] += s.features[j];
      sq[j] += s.features[j] * s.features[j];
    }
  }
  std::vector<double> sigma(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    mean[j] /= static_cast<double>(nb);
    const double var =
        std::max(0.0, sq[j] / static_cast<double>(nb) - mean[j] * mean[j]);
    sigma[j] = std::sqrt(var);
    if (sigma[j] == 0.0) sigma[j] = 1e-9;  // degenerate constant coordinate
  }

  space.value_bounds.resize(d);
  for (std::size_t j = 0; j < d; ++j) space.value_bounds[j] = {lo[j], hi[j]};

  int next_id = 0;
  for (std::size_t j = 0; j < mutable_count; ++j) {
    const std::string coord = std::to_string(j);
    space.actions.push_back({next_id++, ActionKind::additive,
                             static_cast<int>(j), sigma[j],
                             "add 1 benign sigma to f" + coord});
    space.actions.push_back({next_id++, ActionKind::additive,
                             static_cast<int>(j), 3.0 * sigma[j],
                             "add 3 benign sigma to f" + coord});
    space.actions.push_back({next_id++, ActionKind::randomized_additive,
                             static_cast<int>(j), 2.0 * sigma[j],
                             "add uniform [0, 2 sigma] to f" + coord});
    if (!space.monotone_mask[j])
      space.actions.push_back({next_id++, ActionKind::set_value,
                               static_cast<int>(j), mean[j],
                               "set f" + coord + " to benign mean"});
  }
  space.validate();
  return space;
}

nlohmann::json action_space_to_json(const ActionSpace& space) {
  nlohmann::json j;
  nlohmann::json actions = nlohmann::json::array();
  for (const Action& a : space.actions)
    actions.push_back({{"id", a.id},
                       {"kind", to_string(a.kind)},
                       {"index", a.target_index},
                       {"magnitude", a.magnitude},
                       {"description", a.description}});
  j["actions"] = std::move(actions);
  j["mutable_mask"] = space.mutable_mask;
  j["monotone_mask"] = space.monotone_mask;
  nlohmann::json bounds = nlohmann::json::array();
  for (const CoordinateBounds& b : space.value_bounds)
    bounds.push_back({{"min", b.min}, {"max", b.max}});
  j["value_bounds"] = std::move(bounds);
  return j;
}

ActionSpace action_space_from_json(const nlohmann::json& j) {
  ActionSpace space;
  for (const auto& aj : j.at("actions")) {
    Action a;
    a.id = aj.at("id").get<int>();
    a.kind = action_kind_from_string(aj.at("kind").get<std::string>());
    a.target_index = aj.at("index").get<int>();
    a.magnitude = aj.at("magnitude").get<double>();
    if (aj.contains("description"))
      a.description = aj.at("description").get<std::string>();
    space.actions.push_back(std::move(a));
  }
  space.mutable_mask = j.at("mutable_mask").get<std::vector<bool>>();
  space.monotone_mask = j.at("monotone_mask").get<std::vector<bool>>();
  for (const auto& bj : j.at("value_bounds"))
    space.value_bounds.push_back(
        {bj.at("min").get<double>(), bj.at("max").get<double>()});
  space.validate();
  return space;
}

}  // namespace coevo
