#include "mvad/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "mvad/errors.hpp"
#include "mvad/io.hpp"

namespace mvad {

namespace {

void check_labels(const std::vector<double>& scores, const std::vector<unsigned char>& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("metrics: label/score length mismatch");
  if (scores.empty()) throw ValidationError("metrics: empty inputs");
}

// node indices by score descending, index ascending within ties
std::vector<std::size_t> ranking(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

}  // namespace

double accuracy_at_k(const std::vector<double>& scores, const std::vector<unsigned char>& labels,
                     std::size_t k) {
  check_labels(scores, labels);
  if (k == 0) throw ValidationError("accuracy_at_k: k must be positive");
  if (k > scores.size()) throw ValidationError("accuracy_at_k: k exceeds node count");
  const std::vector<std::size_t> order = ranking(scores);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r)
    if (labels[order[r]]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double accuracy_at_k(const std::vector<double>& scores, const GroundTruth& truth, std::size_t k) {
  return accuracy_at_k(scores, truth.anomalous, k);
}

AucResult auc_roc(const std::vector<double>& scores, const std::vector<unsigned char>& labels) {
  check_labels(scores, labels);
  std::size_t pos = 0;
  for (unsigned char l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw ValidationError("auc_roc: labels are degenerate (need both classes)");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  AucResult out;
  out.roc.push_back({0.0, 0.0});
  // Sweep distinct score values from high to low. Within a tie group the
  // Mann-Whitney count credits positives with all strictly-lower negatives
  // plus half of the tied ones; the ROC gets one point per group, which makes
  // trapezoid integration reproduce exactly that midrank convention.
  double wins = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t gpos = 0, gneg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++gpos;
      else ++gneg;
      ++j;
    }
    const std::size_t neg_below = neg - fp - gneg;  // negatives strictly lower
    wins += static_cast<double>(gpos) *
            (static_cast<double>(neg_below) + 0.5 * static_cast<double>(gneg));
    tp += gpos;
    fp += gneg;
    out.roc.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  out.auc = wins / (static_cast<double>(pos) * static_cast<double>(neg));
  return out;
}

AucResult auc_roc(const std::vector<double>& scores, const GroundTruth& truth) {
  return auc_roc(scores, truth.anomalous);
}

MetricsReport evaluate(const std::vector<double>& scores,
                       const std::vector<unsigned char>& labels,
                       const std::vector<std::size_t>& k_list) {
  MetricsReport report;
  report.n = scores.size();
  for (unsigned char l : labels) report.positives += l ? 1 : 0;
  for (std::size_t k : k_list) report.accuracy.emplace_back(k, accuracy_at_k(scores, labels, k));
  report.auc = auc_roc(scores, labels).auc;
  return report;
}

void save_metrics_json(const std::string& path, const MetricsReport& report) {
  nlohmann::json j;
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [k, v] : report.accuracy) acc[std::to_string(k)] = v;
  j["accuracy_at_k"] = std::move(acc);
  j["auc"] = report.auc;
  j["counts"] = {{"nodes", report.n}, {"positives", report.positives}};
  write_text_file(path, j.dump(2) + "\n");
}

void save_roc_tsv(const std::string& path, const std::vector<RocPoint>& roc) {
  std::string out = "fpr\ttpr\n";
  for (const RocPoint& p : roc)
    out += format_double(p.fpr) + "\t" + format_double(p.tpr) + "\n";
  write_text_file(path, out);
}

}  // namespace mvad
