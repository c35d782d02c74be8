#pragma once

#include <string>
#include <vector>

#include "fgkf/corpus.hpp"
#include "fgkf/metrics.hpp"

namespace fgkf {

struct ClassMetrics {
  long tokens = 0;
  long correct = 0;
  double accuracy = 0.0;  // undefined_metric() when the class is empty
  double tag_f1 = 0.0;    // BIO only: token-level F1 over non-O tags
};

// Strong/weak split of test tokens by raw element relevance against a
// threshold frozen from the training-set mean. Ties go to strong.
struct RelevancePartition {
  double threshold = 0.0;
  std::vector<std::vector<int>> strong;  // 1 strong / 0 weak per test token
  ClassMetrics strong_class;
  ClassMetrics weak_class;
  ClassMetrics overall;
};

RelevancePartition partition_strong_weak(
    const std::vector<std::vector<double>>& train_scores,
    const std::vector<std::vector<double>>& test_scores,
    const std::vector<std::vector<int>>& test_gold,
    const std::vector<std::vector<int>>& test_pred, const TagScheme& scheme);

// Per-token relevance dump, one block of rows per sentence.
struct RelevanceRows {
  std::vector<std::vector<double>> w_elem;
  std::vector<std::vector<double>> w_hat;
  std::vector<std::vector<double>> alpha;
};

void emit_relevance_tsv(const Corpus& corpus, const RelevanceRows& rows,
                        const std::string& path);

// metric,value,class rows; undefined values serialize as NA.
struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::string cls;
};

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path);

}  // namespace fgkf
