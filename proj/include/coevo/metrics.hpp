#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coevo/bandit.hpp"
#include "coevo/data.hpp"
#include "coevo/forest.hpp"

#include "json.hpp"

namespace coevo {

struct ConfusionCounts {
  std::size_t tp = 0;  // malware is the positive class
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  std::optional<double> precision;  // absent when tp + fp == 0
  std::optional<double> recall;     // absent when tp + fn == 0
};

enum class TestVariantKind { clean, clean_plus_adversarial };

const char* to_string(TestVariantKind k);

struct MetricsReport {
  TestVariantKind variant = TestVariantKind::clean;
  ConfusionCounts counts;
  ClassificationMetrics metrics;
  std::size_t m_evasive = 0;
  std::size_t m_total = 0;
  std::optional<double> evasion_rate_pct;  // absent when m_total == 0
  std::optional<double> avg_queries;       // absent when no episode succeeded
};

struct TestVariant {
  TestVariantKind kind = TestVariantKind::clean;
  Dataset dataset;
  std::vector<AttackEpisodeResult> episodes;  // attack episodes that built it
};

ConfusionCounts confusion(const RandomForestModel& model, const Dataset& data);

ClassificationMetrics metrics_from_counts(const ConfusionCounts& c);

// ER = 100 * m_evasive / m_total.
double evasion_rate(std::size_t m_evasive, std::size_t m_total);

// Mean queries over successful episodes only; absent when none succeeded.
std::optional<double> avg_queries(
    const std::vector<AttackEpisodeResult>& results);

// Clean test set extended with perturbed counterparts of its successfully
// attacked malware; benign samples untouched.
TestVariant build_adversarial_test_set(const RandomForestModel& model,
                                       const Dataset& clean_test,
                                       const ActionSpace& space,
                                       const BanditPolicy& policy,
                                       const AttackBudget& budget,
                                       std::uint64_t attack_seed);

MetricsReport clean_report(const RandomForestModel& model,
                           const Dataset& clean_test);

MetricsReport adversarial_report(const RandomForestModel& model,
                                 const TestVariant& variant);

// Percentages rendered with 2 decimals; absent values as "--".
std::string format_percent(const std::optional<double>& pct);
std::string format_ratio(const std::optional<double>& v);

nlohmann::json report_to_json(const MetricsReport& r);

}  // namespace coevo
