#include "coevo/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "coevo/fingerprint.hpp"

namespace coevo {

const char* to_string(TestVariantKind k) {
  return k == TestVariantKind::clean ? "clean" : "clean_plus_adversarial";
}

ConfusionCounts confusion(const RandomForestModel& model, const Dataset& data) {
  if (data.samples.empty())
    throw std::invalid_argument("confusion: empty dataset");
  ConfusionCounts c;
  for (const Sample& s : data.samples) {
    const Label predicted = predict_label(model, s.features);
    if (s.label == Label::malware)
      predicted == Label::malware ? ++c.tp : ++c.fn;
    else
      predicted == Label::benign ? ++c.tn : ++c.fp;
  }
  return c;
}

ClassificationMetrics metrics_from_counts(const ConfusionCounts& c) {
  if (c.total() == 0)
    throw std::invalid_argument("metrics_from_counts: zero total");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0)
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return m;
}

double evasion_rate(std::size_t m_evasive, std::size_t m_total) {
  if (m_total == 0) throw std::invalid_argument("evasion_rate: zero total");
  if (m_evasive > m_total)
    throw std::invalid_argument("evasion_rate: m_evasive > m_total");
  return 100.0 * static_cast<double>(m_evasive) / static_cast<double>(m_total);
}

std::optional<double> avg_queries(
    const std::vector<AttackEpisodeResult>& results) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const AttackEpisodeResult& r : results) {
    if (!r.evaded) continue;
    sum += static_cast<double>(r.queries_used);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

TestVariant build_adversarial_test_set(const RandomForestModel& model,
                                       const Dataset& clean_test,
                                       const ActionSpace& space,
                                       const BanditPolicy& policy,
                                       const AttackBudget& budget,
                                       std::uint64_t attack_seed) {
  Dataset malware;
  malware.family = clean_test.family;
  malware.dim = clean_test.dim;
  for (const Sample& s : clean_test.samples)
    if (s.label == Label::malware) malware.samples.push_back(s);
  if (malware.samples.empty())
    throw std::invalid_argument(
        "build_adversarial_test_set: no malware in test set");

  ForestQuery query(model);
  const AttackRoundResult round = attack_dataset(
      query, malware, space, policy, budget, /*iteration=*/0, attack_seed);

  TestVariant variant;
  variant.kind = TestVariantKind::clean_plus_adversarial;
  variant.dataset = clean_test;
  for (const Sample& adv : round.new_adversarial.samples)
    variant.dataset.samples.push_back(adv);
  variant.episodes = round.episodes;
  return variant;
}

MetricsReport clean_report(const RandomForestModel& model,
                           const Dataset& clean_test) {
  MetricsReport r;
  r.variant = TestVariantKind::clean;
  r.counts = confusion(model, clean_test);
  r.metrics = metrics_from_counts(r.counts);
  return r;
}

MetricsReport adversarial_report(const RandomForestModel& model,
                                 const TestVariant& variant) {
  MetricsReport r;
  r.variant = TestVariantKind::clean_plus_adversarial;
  r.counts = confusion(model, variant.dataset);
  r.metrics = metrics_from_counts(r.counts);
  r.m_total = variant.episodes.size();
  for (const AttackEpisodeResult& e : variant.episodes)
    if (e.evaded) ++r.m_evasive;
  if (r.m_total > 0) r.evasion_rate_pct = evasion_rate(r.m_evasive, r.m_total);
  r.avg_queries = avg_queries(variant.episodes);
  return r;
}

std::string format_percent(const std::optional<double>& pct) {
  if (!pct) return "--";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *pct);
  return buf;
}

std::string format_ratio(const std::optional<double>& v) {
  if (!v) return "--";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["variant"] = to_string(r.variant);
  j["acc"] = r.metrics.accuracy;
  j["prec"] = r.metrics.precision ? nlohmann::json(*r.metrics.precision)
                                  : nlohmann::json();
  j["rec"] = r.metrics.recall ? nlohmann::json(*r.metrics.recall)
                              : nlohmann::json();
  j["er_pct"] = r.evasion_rate_pct ? nlohmann::json(*r.evasion_rate_pct)
                                   : nlohmann::json();
  j["avg_q"] =
      r.avg_queries ? nlohmann::json(*r.avg_queries) : nlohmann::json();
  j["counts"] = {{"tp", r.counts.tp},
                 {"tn", r.counts.tn},
                 {"fp", r.counts.fp},
                 {"fn", r.counts.fn}};
  j["m_evasive"] = r.m_evasive;
  j["m_total"] = r.m_total;
  return j;
}

}  // namespace coevo
