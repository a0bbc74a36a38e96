#include <cstring>
#include <vector>

#include "coevo/actions.hpp"
#include "coevo/data.hpp"
#include "coevo/forest.hpp"
#include "coevo/metrics.hpp"
#include "doctest.h"

using namespace coevo;

namespace {

RandomForestModel constant_model(Label l, std::size_t dim) {
  RandomForestModel model;
  model.dim = dim;
  DecisionTree tree;
  TreeNode leaf;
  leaf.is_leaf = true;
  leaf.leaf_class = l;
  leaf.leaf_fraction = l == Label::malware ? 1.0 : 0.0;
  tree.nodes.push_back(leaf);
  model.trees.push_back(std::move(tree));
  return model;
}

AttackEpisodeResult episode(bool evaded, std::uint64_t queries) {
  AttackEpisodeResult e;
  e.evaded = evaded;
  e.queries_used = queries;
  return e;
}

}  // namespace

TEST_CASE("metrics_from_counts matches hand arithmetic") {
  struct Row {
    ConfusionCounts c;
    double acc;
    bool has_prec;
    double prec;
    bool has_rec;
    double rec;
  };
  const std::vector<Row> table{
      {{9, 8, 1, 2}, 0.85, true, 0.9, true, 9.0 / 11.0},
      {{5, 5, 0, 0}, 1.0, true, 1.0, true, 1.0},
      {{0, 10, 0, 0}, 1.0, false, 0, false, 0},        // prec & rec undefined
      {{0, 10, 0, 5}, 10.0 / 15.0, false, 0, true, 0.0},
      {{0, 10, 5, 0}, 10.0 / 15.0, true, 0.0, false, 0},
      {{1, 0, 0, 0}, 1.0, true, 1.0, true, 1.0},
      {{0, 1, 0, 0}, 1.0, false, 0, false, 0},
      {{3, 4, 2, 1}, 0.7, true, 0.6, true, 0.75},
      {{50, 40, 10, 0}, 0.9, true, 50.0 / 60.0, true, 1.0},
      {{46, 48, 2, 4}, 94.0 / 100.0, true, 46.0 / 48.0, true, 46.0 / 50.0},
      {{7, 0, 13, 0}, 0.35, true, 7.0 / 20.0, true, 1.0},
      {{0, 0, 0, 9}, 0.0, false, 0, true, 0.0},
  };
  for (const Row& row : table) {
    const ClassificationMetrics m = metrics_from_counts(row.c);
    CHECK(m.accuracy == doctest::Approx(row.acc).epsilon(1e-12));
    CHECK(m.precision.has_value() == row.has_prec);
    if (row.has_prec)
      CHECK(*m.precision == doctest::Approx(row.prec).epsilon(1e-12));
    CHECK(m.recall.has_value() == row.has_rec);
    if (row.has_rec)
      CHECK(*m.recall == doctest::Approx(row.rec).epsilon(1e-12));
  }
  CHECK_THROWS_AS(metrics_from_counts({0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("evasion_rate arithmetic and formatting") {
  CHECK(evasion_rate(46, 48) ==
        doctest::Approx(100.0 * 46.0 / 48.0).epsilon(1e-12));
  CHECK(format_percent(evasion_rate(46, 48)) == "95.83");
  CHECK(evasion_rate(0, 7) == doctest::Approx(0.0));
  CHECK(evasion_rate(7, 7) == doctest::Approx(100.0));
  CHECK(format_percent(evasion_rate(7, 7)) == "100.00");
  CHECK_THROWS_AS(evasion_rate(1, 0), std::invalid_argument);
}

TEST_CASE("avg_queries averages successes only") {
  CHECK(*avg_queries({episode(true, 10), episode(true, 20)}) ==
        doctest::Approx(15.0));
  CHECK_FALSE(avg_queries({episode(false, 50)}).has_value());
  CHECK_FALSE(avg_queries({}).has_value());
  // failed episodes carry no weight
  CHECK(*avg_queries({episode(true, 10), episode(false, 999)}) ==
        doctest::Approx(10.0));
}

TEST_CASE("absent values render as --") {
  CHECK(format_percent(std::nullopt) == "--");
  CHECK(format_ratio(std::nullopt) == "--");
  CHECK(format_ratio(15.0) == "15.00");
}

TEST_CASE("confusion counts with malware as positive") {
  SyntheticFamilyConfig config;
  config.n_malware = 5;
  config.n_benign = 5;
  const Dataset data = generate_synthetic_family(config);

  SUBCASE("all-benign predictor on a balanced set") {
    const ConfusionCounts c = confusion(constant_model(Label::benign, data.dim),
                                        data);
    CHECK(c.tn == 5);
    CHECK(c.fn == 5);
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.total() == data.size());
  }
  SUBCASE("well-trained model has few errors") {
    Hyperparameters hp;
    hp.n_trees = 15;
    const RandomForestModel model = train_forest(data, hp);
    const ConfusionCounts c = confusion(model, data);
    CHECK(c.total() == data.size());
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);  // tiny separable set, training data
  }
}

TEST_CASE("build_adversarial_test_set composition") {
  SyntheticFamilyConfig config;
  config.n_malware = 40;
  config.n_benign = 40;
  config.seed = 21;
  const Dataset data = generate_synthetic_family(config);
  const DatasetSplit split = split_dataset(data, {}, 21);
  const ActionSpace space =
      build_default_action_space(data, config.mutable_count);

  SUBCASE("unbeatable model leaves the clean set untouched") {
    const RandomForestModel wall = constant_model(Label::malware, data.dim);
    const TestVariant v =
        build_adversarial_test_set(wall, split.test, space, {}, {10, 60}, 1);
    CHECK(v.kind == TestVariantKind::clean_plus_adversarial);
    CHECK(v.dataset.size() == split.test.size());
    const MetricsReport r = adversarial_report(wall, v);
    CHECK(r.m_evasive == 0);
    CHECK(*r.evasion_rate_pct == doctest::Approx(0.0));
    CHECK_FALSE(r.avg_queries.has_value());
  }
  SUBCASE("trained model: appended samples evade at construction time") {
    Hyperparameters hp;
    hp.seed = 4;
    const RandomForestModel model = train_forest(split.train, hp);
    const TestVariant v =
        build_adversarial_test_set(model, split.test, space, {}, {10, 60}, 1);
    const std::size_t appended = v.dataset.size() - split.test.size();
    std::size_t evasions = 0;
    for (const AttackEpisodeResult& e : v.episodes)
      if (e.evaded) ++evasions;
    CHECK(appended == evasions);

    // benign samples are byte-identical across variants, in order
    std::vector<const Sample*> clean_benign, adv_benign;
    for (const Sample& s : split.test.samples)
      if (s.label == Label::benign) clean_benign.push_back(&s);
    for (const Sample& s : v.dataset.samples)
      if (s.label == Label::benign) adv_benign.push_back(&s);
    REQUIRE(clean_benign.size() == adv_benign.size());
    for (std::size_t i = 0; i < clean_benign.size(); ++i)
      CHECK(std::memcmp(clean_benign[i]->features.data(),
                        adv_benign[i]->features.data(),
                        data.dim * sizeof(double)) == 0);

    // every appended sample is misclassified by the evaluated model
    for (std::size_t i = split.test.size(); i < v.dataset.size(); ++i) {
      const Sample& s = v.dataset.samples[i];
      CHECK(s.label == Label::malware);
      CHECK(predict_label(model, s.features) == Label::benign);
    }

    // so adversarial recall cannot exceed clean recall
    const MetricsReport clean = clean_report(model, split.test);
    const MetricsReport adv = adversarial_report(model, v);
    REQUIRE(clean.metrics.recall);
    REQUIRE(adv.metrics.recall);
    CHECK(*adv.metrics.recall <= *clean.metrics.recall + 1e-12);
  }
}

TEST_CASE("report JSON carries the fixed key set") {
  SyntheticFamilyConfig config;
  config.n_malware = 10;
  config.n_benign = 10;
  const Dataset data = generate_synthetic_family(config);
  Hyperparameters hp;
  hp.n_trees = 5;
  const MetricsReport r = clean_report(train_forest(data, hp), data);
  const nlohmann::json j = report_to_json(r);
  for (const char* key :
       {"variant", "acc", "prec", "rec", "er_pct", "avg_q", "counts"})
    CHECK(j.contains(key));
  CHECK(j.at("variant") == "clean");
  CHECK(j.at("acc").get<double>() == doctest::Approx(r.metrics.accuracy));
}
