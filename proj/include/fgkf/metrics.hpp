#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgkf/corpus.hpp"

namespace fgkf {

// NaN marks metrics that are undefined (empty denominator classes).
double undefined_metric();
bool metric_defined(double v);

struct SpanF1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long gold_count = 0;
  long pred_count = 0;
  long match_count = 0;
  // BIO only: per entity type {precision, recall, f1}.
  std::map<std::string, std::array<double, 3>> per_type;
};

SpanF1Result span_f1(const std::vector<std::vector<int>>& gold,
                     const std::vector<std::vector<int>>& pred, const TagScheme& scheme);

double token_accuracy(const std::vector<std::vector<int>>& gold,
                      const std::vector<std::vector<int>>& pred);

// Fraction of OOV gold segments exactly recovered by the prediction.
// Undefined when the OOV set is empty.
double oov_recall(const Corpus& test, const std::vector<std::vector<int>>& pred,
                  const TagScheme& scheme, const std::set<std::string>& oov);

}  // namespace fgkf
