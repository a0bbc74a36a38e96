#include "coevo/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "coevo/fingerprint.hpp"

namespace coevo {

const char* to_string(Label l) {
  return l == Label::malware ? "malware" : "benign";
}

Label label_from_string(const std::string& s) {
  if (s == "malware") return Label::malware;
  if (s == "benign") return Label::benign;
  throw std::invalid_argument("unknown label: '" + s + "'");
}

std::size_t Dataset::count(Label l) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(),
                    [l](const Sample& s) { return s.label == l; }));
}

void SyntheticFamilyConfig::validate() const {
  if (d == 0) throw std::invalid_argument("d must be positive");
  if (n_malware == 0) throw std::invalid_argument("n_malware must be positive");
  if (n_benign == 0) throw std::invalid_argument("n_benign must be positive");
  if (mutable_count == 0 || mutable_count >= d)
    throw std::invalid_argument("mutable_count must be in (0, d)");
  if (!(separation > 0.0)) throw std::invalid_argument("separation must be > 0");
  if (!(spread > 0.0)) throw std::invalid_argument("spread must be > 0");
}

Dataset generate_synthetic_family(const SyntheticFamilyConfig& config) {
  config.validate();

  Dataset out;
  out.family = config.name;
  out.seed = config.seed;
  out.dim = config.d;
  out.samples.reserve(config.n_malware + config.n_benign);

  // Benign mean is the origin; the malware mean is offset on every
  // coordinate, more strongly on the mutable block.
  std::vector<double> malware_mean(config.d, config.separation);
  for (std::size_t j = 0; j < config.mutable_count; ++j)
    malware_mean[j] = kMutableSeparationBoost * config.separation;

  std::mt19937_64 rng(mix_seed(config.seed, 0));
  std::normal_distribution<double> noise(0.0, config.spread);

  auto emit = [&](Label label, std::size_t n, const std::vector<double>* mean) {
    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      s.features.resize(config.d);
      for (std::size_t j = 0; j < config.d; ++j) {
        double mu = mean ? (*mean)[j] : 0.0;
        s.features[j] = mu + noise(rng);
      }
      s.label = label;
      s.family = config.name;
      s.origin = Origin::original();
      out.samples.push_back(std::move(s));
    }
  };
  emit(Label::benign, config.n_benign, nullptr);
  emit(Label::malware, config.n_malware, &malware_mean);
  return out;
}

namespace {

// Per-class subset sizes via largest remainder, so the three pieces cover
// the class exactly.
std::array<std::size_t, 3> class_split_sizes(std::size_t n,
                                             const SplitFractions& f) {
  const double fr[3] = {f.train, f.val, f.test};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    double exact = fr[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - std::floor(exact);
    assigned += sizes[k];
  }
  // hand out leftovers by descending remainder, ties to earlier subset
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (rem[k] > rem[best]) best = k;
    sizes[best] += 1;
    rem[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

}  // namespace

DatasetSplit split_dataset(const Dataset& data, const SplitFractions& fractions,
                           std::uint64_t seed) {
  const double sum = fractions.train + fractions.val + fractions.test;
  if (!(fractions.train > 0.0) || !(fractions.val > 0.0) ||
      !(fractions.test > 0.0))
    throw std::invalid_argument("split fractions must all be positive");
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    by_class[data.samples[i].label == Label::malware ? 1 : 0].push_back(i);

  DatasetSplit split;
  Dataset* parts[3] = {&split.train, &split.val, &split.test};
  for (Dataset* p : parts) {
    p->family = data.family;
    p->seed = seed;
    p->dim = data.dim;
  }

  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    std::mt19937_64 rng(mix_seed(seed, 1 + static_cast<std::uint64_t>(c)));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto sizes = class_split_sizes(idx.size(), fractions);
    if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0)
      throw std::invalid_argument(
          "split leaves a subset without both classes (class '" +
          std::string(to_string(c == 1 ? Label::malware : Label::benign)) +
          "')");
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < sizes[k]; ++i)
        parts[k]->samples.push_back(data.samples[idx[pos++]]);
  }
  return split;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("CSV file has no header row: " + path);
  const auto header = split_line(line);

  int label_col = -1;
  int family_col = -1;
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column)
      label_col = static_cast<int>(i);
    else if (header[i] == "family")
      family_col = static_cast<int>(i);
    else
      feature_cols.push_back(i);
  }
  if (label_col < 0)
    throw std::runtime_error("CSV header lacks label column '" + label_column +
                             "'");

  Dataset out;
  out.dim = feature_cols.size();

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("CSV row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    Sample s;
    s.features.reserve(out.dim);
    for (std::size_t c : feature_cols) {
      double v;
      try {
        std::size_t used = 0;
        v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::runtime_error("CSV row " + std::to_string(row) +
                                 ": cell '" + cells[c] +
                                 "' is not a finite number");
      }
      if (!std::isfinite(v))
        throw std::runtime_error("CSV row " + std::to_string(row) +
                                 ": non-finite feature value '" + cells[c] +
                                 "'");
      s.features.push_back(v);
    }
    try {
      s.label = label_from_string(cells[static_cast<std::size_t>(label_col)]);
    } catch (const std::exception& e) {
      throw std::runtime_error("CSV row " + std::to_string(row) + ": " +
                               e.what());
    }
    if (family_col >= 0) s.family = cells[static_cast<std::size_t>(family_col)];
    s.origin = Origin::original();
    if (out.family.empty()) out.family = s.family;
    out.samples.push_back(std::move(s));
  }
  return out;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  for (std::size_t j = 0; j < data.dim; ++j) out << 'f' << j << ',';
  out << "label,family\n";
  out.precision(17);
  for (const Sample& s : data.samples) {
    for (double v : s.features) out << v << ',';
    out << to_string(s.label) << ',' << s.family << '\n';
  }
}

namespace {

std::string feature_key(const FeatureVector& v) {
  std::string key(v.size() * sizeof(double), '\0');
  std::memcpy(key.data(), v.data(), key.size());
  return key;
}

}  // namespace

Dataset augment(const Dataset& base,
                const std::vector<Dataset>& adversarial_batches) {
  for (const Dataset& batch : adversarial_batches)
    if (!batch.samples.empty() && batch.dim != base.dim)
      throw std::invalid_argument("augment: dimension mismatch (base d=" +
                                  std::to_string(base.dim) + ", batch d=" +
                                  std::to_string(batch.dim) + ")");

  Dataset out;
  out.family = base.family;
  out.seed = base.seed;
  out.dim = base.dim;

  std::unordered_set<std::string> seen;
  auto admit = [&](const Sample& s) {
    if (seen.insert(feature_key(s.features)).second) out.samples.push_back(s);
  };
  for (const Sample& s : base.samples) admit(s);
  for (const Dataset& batch : adversarial_batches)
    for (const Sample& s : batch.samples) admit(s);
  return out;
}

std::uint64_t dataset_fingerprint(const Dataset& data) {
  Fnv1a64 h;
  h.update(static_cast<std::uint64_t>(data.dim));
  for (const Sample& s : data.samples) {
    h.update(s.features);
    h.update(std::string(to_string(s.label)));
  }
  return h.value();
}

}  // namespace coevo
