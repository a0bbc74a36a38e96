#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coevo/data.hpp"

#include "json.hpp"

namespace coevo {

inline constexpr int kUnboundedDepth = -1;

struct Hyperparameters {
  int n_trees = 50;
  int max_depth = kUnboundedDepth;
  int min_samples_leaf = 1;
  int features_per_split = 0;  // 0 = floor(sqrt(d)), resolved at train time
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const Hyperparameters&) const = default;
};

struct TreeNode {
  bool is_leaf = true;
  // internal
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // leaf
  Label leaf_class = Label::benign;
  double leaf_fraction = 0.0;  // malware fraction of training rows in leaf
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // node 0 is the root
  Label predict(const FeatureVector& x) const;
};

struct ModelProvenance {
  std::string scenario;
  int iteration = 0;
  std::uint64_t train_fingerprint = 0;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  Hyperparameters hp;
  ModelProvenance provenance;
  std::size_t dim = 0;
};

// CART node criterion: 1 - p_m^2 - p_b^2.
double gini_impurity(const std::vector<Label>& labels);

RandomForestModel train_forest(const Dataset& train, const Hyperparameters& hp);

// Fraction of trees whose leaf class is malware.
double predict_score(const RandomForestModel& model, const FeatureVector& x);

// malware iff score >= 0.5 (tie counts as malware).
Label predict_label(const RandomForestModel& model, const FeatureVector& x);

double accuracy(const RandomForestModel& model, const Dataset& data);

// Grid element with the highest validation accuracy; ties go to the
// earliest grid position.
Hyperparameters tune(const Dataset& train, const Dataset& val,
                     const std::vector<Hyperparameters>& grid);

std::vector<Hyperparameters> default_hyperparameter_grid();

nlohmann::json model_to_json(const RandomForestModel& model);
RandomForestModel model_from_json(const nlohmann::json& j);

std::uint64_t model_fingerprint(const RandomForestModel& model);

}  // namespace coevo
