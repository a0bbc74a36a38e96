#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace coevo {

using FeatureVector = std::vector<double>;

enum class Label { benign, malware };

const char* to_string(Label l);
Label label_from_string(const std::string& s);

// Where a sample came from: the raw corpus, or an attack round at a given
// co-evolution iteration.
struct Origin {
  enum class Kind { original, adversarial };
  Kind kind = Kind::original;
  int iteration = 0;  // meaningful for adversarial only

  static Origin original() { return {Kind::original, 0}; }
  static Origin adversarial(int iteration) {
    return {Kind::adversarial, iteration};
  }
  bool operator==(const Origin&) const = default;
};

struct Sample {
  FeatureVector features;
  Label label = Label::benign;
  std::string family;
  Origin origin;
};

struct Dataset {
  std::vector<Sample> samples;
  std::string family;
  std::uint64_t seed = 0;
  std::size_t dim = 0;

  std::size_t size() const { return samples.size(); }
  std::size_t count(Label l) const;
};

// Config of the synthetic stand-in generator. Malware and benign are
// diagonal Gaussians; both mutable and immutable coordinates carry signal,
// with a stronger offset on the mutable block so an unhardened learner
// prefers it.
struct SyntheticFamilyConfig {
  std::string name = "synthetic";
  std::size_t d = 16;
  std::size_t n_malware = 250;
  std::size_t n_benign = 250;
  double separation = 2.5;  // benign/malware mean offset per immutable coord
  double spread = 1.0;      // within-class standard deviation
  std::size_t mutable_count = 4;  // attacker-reachable prefix of coordinates
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// Offset multiplier applied to the mutable block of coordinates.
inline constexpr double kMutableSeparationBoost = 3.0;

Dataset generate_synthetic_family(const SyntheticFamilyConfig& config);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Stratified partition, deterministic in seed. Rejects splits that leave a
// subset without both classes.
DatasetSplit split_dataset(const Dataset& data, const SplitFractions& fractions,
                           std::uint64_t seed);

// Header `f0,...,f{d-1},label,family`; label cells are `malware`/`benign`.
Dataset load_csv(const std::string& path,
                 const std::string& label_column = "label");

void save_csv(const Dataset& data, const std::string& path);

// Union with exact-duplicate feature vectors removed (first occurrence kept,
// bitwise comparison). Labels are never touched.
Dataset augment(const Dataset& base,
                const std::vector<Dataset>& adversarial_batches);

std::uint64_t dataset_fingerprint(const Dataset& data);

}  // namespace coevo
