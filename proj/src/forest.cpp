#include "coevo/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "coevo/fingerprint.hpp"

namespace coevo {

void Hyperparameters::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (max_depth != kUnboundedDepth && max_depth < 1)
    throw std::invalid_argument("max_depth must be >= 1 or unbounded");
  if (min_samples_leaf < 1)
    throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (features_per_split < 0)
    throw std::invalid_argument("features_per_split must be >= 0");
}

Label DecisionTree::predict(const FeatureVector& x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].leaf_class;
}

double gini_impurity(const std::vector<Label>& labels) {
  if (labels.empty())
    throw std::invalid_argument("gini_impurity: empty label list");
  std::size_t m = 0;
  for (Label l : labels)
    if (l == Label::malware) ++m;
  const double n = static_cast<double>(labels.size());
  const double pm = static_cast<double>(m) / n;
  const double pb = static_cast<double>(labels.size() - m) / n;
  return 1.0 - pm * pm - pb * pb;
}

namespace {

double impurity_from_counts(std::size_t malware, std::size_t total) {
  const double n = static_cast<double>(total);
  const double pm = static_cast<double>(malware) / n;
  const double pb = static_cast<double>(total - malware) / n;
  return 1.0 - pm * pm - pb * pb;
}

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double weighted_impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const Hyperparameters& hp, int fps,
              std::uint64_t tree_seed)
      : data_(data), hp_(hp), fps_(fps), rng_(tree_seed) {}

  DecisionTree build() {
    std::vector<std::size_t> rows(data_.samples.size());
    if (hp_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(
          0, data_.samples.size() - 1);
      for (auto& r : rows) r = pick(rng_);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    DecisionTree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  std::size_t malware_count(const std::vector<std::size_t>& rows) const {
    std::size_t m = 0;
    for (std::size_t r : rows)
      if (data_.samples[r].label == Label::malware) ++m;
    return m;
  }

  std::vector<int> sample_candidate_features() {
    std::vector<int> all(data_.dim);
    std::iota(all.begin(), all.end(), 0);
    const int k = std::min<int>(fps_, static_cast<int>(data_.dim));
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i,
                                              static_cast<int>(data_.dim) - 1);
      std::swap(all[static_cast<std::size_t>(i)],
                all[static_cast<std::size_t>(pick(rng_))]);
    }
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());  // ascending scan keeps ties canonical
    return all;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows,
                         const std::vector<int>& candidates) const {
    SplitChoice best;
    const std::size_t n = rows.size();
    const std::size_t msl = static_cast<std::size_t>(hp_.min_samples_leaf);
    std::vector<std::pair<double, Label>> col(n);
    for (int f : candidates) {
      for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = data_.samples[rows[i]];
        col[i] = {s.features[static_cast<std::size_t>(f)], s.label};
      }
      std::sort(col.begin(), col.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t left_m = 0, left_n = 0;
      const std::size_t total_m = [&] {
        std::size_t m = 0;
        for (const auto& p : col)
          if (p.second == Label::malware) ++m;
        return m;
      }();
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (col[i].second == Label::malware) ++left_m;
        ++left_n;
        if (col[i].first == col[i + 1].first) continue;  // no boundary here
        if (left_n < msl || n - left_n < msl) continue;
        const double thr = col[i].first + 0.5 * (col[i + 1].first - col[i].first);
        const double wi =
            (static_cast<double>(left_n) * impurity_from_counts(left_m, left_n) +
             static_cast<double>(n - left_n) *
                 impurity_from_counts(total_m - left_m, n - left_n)) /
            static_cast<double>(n);
        // strict improvement; feature/threshold scan order encodes ties
        if (!best.found || wi < best.weighted_impurity) {
          best.found = true;
          best.feature = f;
          best.threshold = thr;
          best.weighted_impurity = wi;
        }
      }
    }
    return best;
  }

  int grow(DecisionTree& tree, const std::vector<std::size_t>& rows,
           int depth) {
    const std::size_t n = rows.size();
    const std::size_t m = malware_count(rows);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    auto make_leaf = [&] {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      node.is_leaf = true;
      node.leaf_class = (2 * m >= n) ? Label::malware : Label::benign;
      node.leaf_fraction = static_cast<double>(m) / static_cast<double>(n);
      return id;
    };

    const bool pure = (m == 0 || m == n);
    const bool depth_capped =
        hp_.max_depth != kUnboundedDepth && depth >= hp_.max_depth;
    if (pure || depth_capped ||
        n < 2 * static_cast<std::size_t>(hp_.min_samples_leaf))
      return make_leaf();

    // Candidate features are drawn before knowing whether a split exists,
    // so the RNG stream is identical across data orderings.
    const auto candidates = sample_candidate_features();
    const SplitChoice split = best_split(rows, candidates);
    if (!split.found) return make_leaf();

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      const double v =
          data_.samples[r].features[static_cast<std::size_t>(split.feature)];
      (v <= split.threshold ? left_rows : right_rows).push_back(r);
    }

    const int left_id = grow(tree, left_rows, depth + 1);
    const int right_id = grow(tree, right_rows, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.is_leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left_id;
    node.right = right_id;
    return id;
  }

  const Dataset& data_;
  const Hyperparameters& hp_;
  int fps_;
  std::mt19937_64 rng_;
};

}  // namespace

RandomForestModel train_forest(const Dataset& train,
                               const Hyperparameters& hp) {
  hp.validate();
  if (train.samples.empty())
    throw std::invalid_argument("train_forest: empty training set");
  if (train.count(Label::malware) == 0 || train.count(Label::benign) == 0)
    throw std::invalid_argument(
        "train_forest: training set must contain both classes");

  int fps = hp.features_per_split;
  if (fps == 0)
    fps = std::max(1, static_cast<int>(
                          std::floor(std::sqrt(static_cast<double>(train.dim)))));
  if (fps > static_cast<int>(train.dim))
    throw std::invalid_argument("features_per_split exceeds dimension");

  RandomForestModel model;
  model.hp = hp;
  model.dim = train.dim;
  model.provenance.train_fingerprint = dataset_fingerprint(train);
  model.trees.reserve(static_cast<std::size_t>(hp.n_trees));
  for (int t = 0; t < hp.n_trees; ++t) {
    TreeBuilder builder(train, hp, fps,
                        mix_seed(hp.seed, static_cast<std::uint64_t>(t)));
    model.trees.push_back(builder.build());
  }
  return model;
}

double predict_score(const RandomForestModel& model, const FeatureVector& x) {
  if (x.size() != model.dim)
    throw std::invalid_argument("predict_score: dimension mismatch");
  std::size_t votes = 0;
  for (const DecisionTree& t : model.trees)
    if (t.predict(x) == Label::malware) ++votes;
  return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

Label predict_label(const RandomForestModel& model, const FeatureVector& x) {
  return predict_score(model, x) >= 0.5 ? Label::malware : Label::benign;
}

double accuracy(const RandomForestModel& model, const Dataset& data) {
  if (data.samples.empty())
    throw std::invalid_argument("accuracy: empty dataset");
  std::size_t hits = 0;
  for (const Sample& s : data.samples)
    if (predict_label(model, s.features) == s.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.samples.size());
}

Hyperparameters tune(const Dataset& train, const Dataset& val,
                     const std::vector<Hyperparameters>& grid) {
  if (grid.empty()) throw std::invalid_argument("tune: empty grid");
  std::size_t best = 0;
  double best_acc = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const RandomForestModel model = train_forest(train, grid[i]);
    const double acc = accuracy(model, val);
    if (acc > best_acc) {
      best_acc = acc;
      best = i;
    }
  }
  return grid[best];
}

std::vector<Hyperparameters> default_hyperparameter_grid() {
  std::vector<Hyperparameters> grid;
  for (int n_trees : {100, 50})
    for (int max_depth : {kUnboundedDepth, 8})
      for (int min_leaf : {1, 5}) {
        Hyperparameters hp;
        hp.n_trees = n_trees;
        hp.max_depth = max_depth;
        hp.min_samples_leaf = min_leaf;
        grid.push_back(hp);
      }
  return grid;
}

nlohmann::json model_to_json(const RandomForestModel& model) {
  nlohmann::json j;
  j["hyperparameters"] = {{"n_trees", model.hp.n_trees},
                          {"max_depth", model.hp.max_depth},
                          {"min_samples_leaf", model.hp.min_samples_leaf},
                          {"features_per_split", model.hp.features_per_split},
                          {"bootstrap", model.hp.bootstrap},
                          {"seed", model.hp.seed}};
  j["provenance"] = {
      {"scenario", model.provenance.scenario},
      {"iteration", model.provenance.iteration},
      {"train_fingerprint",
       Fnv1a64::to_hex(model.provenance.train_fingerprint)}};
  j["dim"] = model.dim;
  nlohmann::json trees = nlohmann::json::array();
  for (const DecisionTree& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf)
        nodes.push_back({{"class", to_string(n.leaf_class)},
                         {"fraction", n.leaf_fraction}});
      else
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

RandomForestModel model_from_json(const nlohmann::json& j) {
  RandomForestModel model;
  const auto& h = j.at("hyperparameters");
  model.hp.n_trees = h.at("n_trees").get<int>();
  model.hp.max_depth = h.at("max_depth").get<int>();
  model.hp.min_samples_leaf = h.at("min_samples_leaf").get<int>();
  model.hp.features_per_split = h.at("features_per_split").get<int>();
  model.hp.bootstrap = h.at("bootstrap").get<bool>();
  model.hp.seed = h.at("seed").get<std::uint64_t>();
  const auto& p = j.at("provenance");
  model.provenance.scenario = p.at("scenario").get<std::string>();
  model.provenance.iteration = p.at("iteration").get<int>();
  model.provenance.train_fingerprint =
      std::stoull(p.at("train_fingerprint").get<std::string>(), nullptr, 16);
  model.dim = j.at("dim").get<std::size_t>();
  for (const auto& tj : j.at("trees")) {
    DecisionTree tree;
    for (const auto& nj : tj) {
      TreeNode n;
      if (nj.contains("class")) {
        n.is_leaf = true;
        n.leaf_class = label_from_string(nj.at("class").get<std::string>());
        n.leaf_fraction = nj.at("fraction").get<double>();
      } else {
        n.is_leaf = false;
        n.feature = nj.at("feature").get<int>();
        n.threshold = nj.at("threshold").get<double>();
        n.left = nj.at("left").get<int>();
        n.right = nj.at("right").get<int>();
      }
      tree.nodes.push_back(n);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

std::uint64_t model_fingerprint(const RandomForestModel& model) {
  Fnv1a64 h;
  h.update(model_to_json(model).dump());
  return h.value();
}

}  // namespace coevo
