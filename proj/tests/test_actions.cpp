#include <cmath>
#include <random>
#include <vector>

#include "coevo/actions.hpp"
#include "coevo/data.hpp"
#include "doctest.h"

using namespace coevo;

namespace {

// d=2 space: coordinate 0 mutable, coordinate 1 frozen.
ActionSpace two_coord_space() {
  ActionSpace space;
  space.mutable_mask = {true, false};
  space.monotone_mask = {false, false};
  space.value_bounds = {{-100.0, 100.0}, {-100.0, 100.0}};
  space.actions.push_back({0, ActionKind::additive, 0, 2.0, "add 2"});
  space.validate();
  return space;
}

}  // namespace

TEST_CASE("apply_action additive and locality") {
  const ActionSpace space = two_coord_space();
  const auto [out, step] = apply_action({1.0, 0.0}, space.actions[0], space, 0);
  CHECK(out == FeatureVector{3.0, 0.0});
  CHECK(step.action_id == 0);
  CHECK(step.target_index == 0);
  CHECK(step.delta == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("apply_action rejects immutable targets") {
  const ActionSpace space = two_coord_space();
  const Action bad{9, ActionKind::additive, 1, 1.0, "frozen"};
  CHECK_THROWS_AS(apply_action({1.0, 0.0}, bad, space, 0),
                  std::invalid_argument);
}

TEST_CASE("apply_action clamps set_value into bounds") {
  ActionSpace space = two_coord_space();
  space.value_bounds[0] = {0.0, 4.0};
  const Action set{1, ActionKind::set_value, 0, 5.0, "set 5"};
  const auto [out, step] = apply_action({1.0, 0.0}, set, space, 0);
  CHECK(out == FeatureVector{4.0, 0.0});
  CHECK(step.delta == doctest::Approx(3.0));
}

TEST_CASE("randomized_additive is seed-deterministic and in range") {
  ActionSpace space = two_coord_space();
  const Action rand_add{2, ActionKind::randomized_additive, 0, 3.0, "rand"};
  const auto [a, step_a] = apply_action({0.0, 0.0}, rand_add, space, 42);
  const auto [b, step_b] = apply_action({0.0, 0.0}, rand_add, space, 42);
  CHECK(a == b);
  CHECK(step_a.delta == step_b.delta);
  CHECK(step_a.delta >= 0.0);
  CHECK(step_a.delta <= 3.0);
  const auto [c, step_c] = apply_action({0.0, 0.0}, rand_add, space, 43);
  CHECK(step_c.delta != step_a.delta);  // different stream, different draw
}

TEST_CASE("apply_trace replays deltas left to right") {
  const ActionSpace space = two_coord_space();
  PerturbationTrace t;
  t.steps = {{0, 0, 1.0}, {0, 0, 2.0}};
  CHECK(apply_trace({0.0, 0.0}, t, space) == FeatureVector{3.0, 0.0});
  CHECK(apply_trace({5.0, 1.0}, {}, space) == FeatureVector{5.0, 1.0});
}

TEST_CASE("is_valid_perturbation rules") {
  ActionSpace space = two_coord_space();
  space.monotone_mask = {true, false};
  const FeatureVector x{1.0, 2.0};

  CHECK(is_valid_perturbation(x, x, space));
  CHECK(is_valid_perturbation(x, {1.5, 2.0}, space));
  // immutable coordinate moved by 1e-12: strict bit equality fails
  CHECK_FALSE(is_valid_perturbation(x, {1.0, 2.0 + 1e-12}, space));
  // monotone coordinate decreased
  CHECK_FALSE(is_valid_perturbation(x, {0.5, 2.0}, space));
  // out of bounds
  CHECK_FALSE(is_valid_perturbation(x, {101.0, 2.0}, space));
  CHECK_THROWS_AS(is_valid_perturbation(x, {1.0}, space),
                  std::invalid_argument);
}

TEST_CASE("ActionSpace::validate enforces mask and action invariants") {
  SUBCASE("monotone must be a subset of mutable") {
    ActionSpace space = two_coord_space();
    space.monotone_mask = {false, true};
    CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  }
  SUBCASE("actions must target mutable coordinates") {
    ActionSpace space = two_coord_space();
    space.actions.push_back({1, ActionKind::additive, 1, 1.0, "frozen"});
    CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  }
  SUBCASE("no set_value on monotone coordinates") {
    ActionSpace space = two_coord_space();
    space.monotone_mask = {true, false};
    space.actions.push_back({1, ActionKind::set_value, 0, 0.0, "set"});
    CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  }
  SUBCASE("no negative additive magnitude on monotone coordinates") {
    ActionSpace space = two_coord_space();
    space.monotone_mask = {true, false};
    space.actions.push_back({1, ActionKind::additive, 0, -1.0, "shrink"});
    CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  }
}

TEST_CASE("build_default_action_space catalog shape") {
  SyntheticFamilyConfig config;
  config.d = 6;
  config.mutable_count = 3;
  const Dataset data = generate_synthetic_family(config);

  SUBCASE("non-monotone coordinates carry four arms each") {
    const ActionSpace space = build_default_action_space(data, 3);
    CHECK(space.dim() == 6);
    CHECK(space.actions.size() == 12);  // 4 per mutable coordinate
    for (std::size_t j = 0; j < 6; ++j) CHECK(space.mutable_mask[j] == (j < 3));
    space.validate();
  }
  SUBCASE("monotone coordinates drop the set_value arm") {
    const std::vector<bool> monotone{true, false, false, false, false, false};
    const ActionSpace space = build_default_action_space(data, 3, &monotone);
    CHECK(space.actions.size() == 11);
    for (const Action& a : space.actions)
      if (a.target_index == 0) CHECK(a.kind != ActionKind::set_value);
  }
  SUBCASE("mutable_count must be in (0, d)") {
    CHECK_THROWS_AS(build_default_action_space(data, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_default_action_space(data, 6), std::invalid_argument);
  }
}

TEST_CASE("closure: random in-budget action sequences stay valid") {
  SyntheticFamilyConfig config;
  config.seed = 9;
  const Dataset data = generate_synthetic_family(config);
  const std::vector<bool> monotone{true, false, false, false, false, false,
                                   false, false, false, false, false, false,
                                   false, false, false, false};
  const ActionSpace space =
      build_default_action_space(data, config.mutable_count, &monotone);

  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> pick_action(
      0, space.actions.size() - 1);
  std::uniform_int_distribution<int> pick_len(0, 10);
  std::uniform_int_distribution<std::size_t> pick_sample(0,
                                                         data.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    const FeatureVector& x = data.samples[pick_sample(rng)].features;
    FeatureVector current = x;
    const int len = pick_len(rng);
    for (int k = 0; k < len; ++k) {
      const Action& a = space.actions[pick_action(rng)];
      current = apply_action(current, a, space, rng()).first;
      CHECK(is_valid_perturbation(x, current, space));
    }
  }
}

TEST_CASE("action space JSON round-trip") {
  SyntheticFamilyConfig config;
  const Dataset data = generate_synthetic_family(config);
  const ActionSpace space =
      build_default_action_space(data, config.mutable_count);
  const ActionSpace back = action_space_from_json(action_space_to_json(space));

  CHECK(back.mutable_mask == space.mutable_mask);
  CHECK(back.monotone_mask == space.monotone_mask);
  REQUIRE(back.actions.size() == space.actions.size());
  for (std::size_t i = 0; i < space.actions.size(); ++i) {
    CHECK(back.actions[i].id == space.actions[i].id);
    CHECK(back.actions[i].kind == space.actions[i].kind);
    CHECK(back.actions[i].target_index == space.actions[i].target_index);
    CHECK(back.actions[i].magnitude == space.actions[i].magnitude);
  }
  REQUIRE(back.value_bounds.size() == space.value_bounds.size());
  for (std::size_t j = 0; j < space.value_bounds.size(); ++j) {
    CHECK(back.value_bounds[j].min == space.value_bounds[j].min);
    CHECK(back.value_bounds[j].max == space.value_bounds[j].max);
  }
}
