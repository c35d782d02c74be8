#include "fgkf/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fgkf/common.hpp"

namespace fgkf {

namespace {

std::string format_value(double v) {
  if (!metric_defined(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TagCounts {
  long gold_tagged = 0;  // non-O gold
  long pred_tagged = 0;  // non-O predicted
  long match = 0;        // non-O and equal
};

void finish_class(ClassMetrics& m, const TagCounts& c, bool bio) {
  m.accuracy = m.tokens == 0 ? undefined_metric()
                             : static_cast<double>(m.correct) / m.tokens;
  if (!bio || m.tokens == 0) {
    m.tag_f1 = undefined_metric();
    return;
  }
  double p = c.pred_tagged == 0 ? 0.0 : static_cast<double>(c.match) / c.pred_tagged;
  double r = c.gold_tagged == 0 ? 0.0 : static_cast<double>(c.match) / c.gold_tagged;
  m.tag_f1 = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

}  // namespace

RelevancePartition partition_strong_weak(
    const std::vector<std::vector<double>>& train_scores,
    const std::vector<std::vector<double>>& test_scores,
    const std::vector<std::vector<int>>& test_gold,
    const std::vector<std::vector<int>>& test_pred, const TagScheme& scheme) {
  double sum = 0.0;
  long count = 0;
  for (const auto& sent : train_scores)
    for (double s : sent) {
      sum += s;
      ++count;
    }
  if (count == 0) throw DataError("relevance partition needs training scores");

  RelevancePartition out;
  out.threshold = sum / static_cast<double>(count);

  if (test_scores.size() != test_gold.size() || test_scores.size() != test_pred.size())
    throw ShapeError("relevance partition needs matching sentence counts");

  const bool bio = scheme.kind() == SchemeKind::bio;
  TagCounts strong_tags, weak_tags, all_tags;
  for (size_t i = 0; i < test_scores.size(); ++i) {
    const auto& scores = test_scores[i];
    if (scores.size() != test_gold[i].size() || scores.size() != test_pred[i].size())
      throw ShapeError("relevance partition needs matching sentence lengths");
    std::vector<int> cls(scores.size());
    for (size_t t = 0; t < scores.size(); ++t) {
      bool strong = scores[t] >= out.threshold;
      cls[t] = strong ? 1 : 0;
      bool correct = test_gold[i][t] == test_pred[i][t];
      ClassMetrics& m = strong ? out.strong_class : out.weak_class;
      TagCounts& c = strong ? strong_tags : weak_tags;
      for (auto [mm, cc] : {std::pair<ClassMetrics*, TagCounts*>{&m, &c},
                            {&out.overall, &all_tags}}) {
        ++mm->tokens;
        if (correct) ++mm->correct;
        if (bio) {
          if (test_gold[i][t] != 0) ++cc->gold_tagged;
          if (test_pred[i][t] != 0) {
            ++cc->pred_tagged;
            if (correct) ++cc->match;
          }
        }
      }
    }
    out.strong.push_back(std::move(cls));
  }

  finish_class(out.strong_class, strong_tags, bio);
  finish_class(out.weak_class, weak_tags, bio);
  finish_class(out.overall, all_tags, bio);
  return out;
}

void emit_relevance_tsv(const Corpus& corpus, const RelevanceRows& rows,
                        const std::string& path) {
  if (rows.w_elem.size() != corpus.size() || rows.w_hat.size() != corpus.size() ||
      rows.alpha.size() != corpus.size())
    throw ShapeError("relevance dump needs one score row per sentence");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write relevance file: " + path);
  out << "sentence-id\tposition\ttoken\tw_elem\tw_hat\talpha\n";
  char buf[40];
  for (size_t i = 0; i < corpus.size(); ++i) {
    const TaggedSentence& s = corpus.sentences[i];
    if (rows.w_elem[i].size() != s.tokens.size() ||
        rows.w_hat[i].size() != s.tokens.size() ||
        rows.alpha[i].size() != s.tokens.size())
      throw ShapeError("relevance dump row length mismatch");
    for (size_t t = 0; t < s.tokens.size(); ++t) {
      out << i << '\t' << t << '\t' << s.tokens[t];
      for (double v : {rows.w_elem[i][t], rows.w_hat[i][t], rows.alpha[i][t]}) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << '\t' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write metrics file: " + path);
  out << "metric,value,class\n";
  for (const auto& r : rows)
    out << r.metric << ',' << format_value(r.value) << ',' << r.cls << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace fgkf
