#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvad/inject.hpp"

namespace mvad {

// Fraction of the k highest-scored nodes that are labeled anomalous.
// Score ties are broken toward the smaller node index.
double accuracy_at_k(const std::vector<double>& scores, const std::vector<unsigned char>& labels,
                     std::size_t k);
double accuracy_at_k(const std::vector<double>& scores, const GroundTruth& truth, std::size_t k);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct AucResult {
  double auc = 0.0;                // Mann-Whitney rank statistic with midranks
  std::vector<RocPoint> roc;       // one point per distinct threshold, plus (0,0) and (1,1)
};

AucResult auc_roc(const std::vector<double>& scores, const std::vector<unsigned char>& labels);
AucResult auc_roc(const std::vector<double>& scores, const GroundTruth& truth);

struct MetricsReport {
  std::vector<std::pair<std::size_t, double>> accuracy;  // (k, value)
  double auc = 0.0;
  std::size_t n = 0;
  std::size_t positives = 0;
};

MetricsReport evaluate(const std::vector<double>& scores,
                       const std::vector<unsigned char>& labels,
                       const std::vector<std::size_t>& k_list);

void save_metrics_json(const std::string& path, const MetricsReport& report);
void save_roc_tsv(const std::string& path, const std::vector<RocPoint>& roc);

}  // namespace mvad
