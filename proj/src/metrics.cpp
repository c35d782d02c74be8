#include "fgkf/metrics.hpp"

#include <cmath>
#include <limits>

#include "fgkf/common.hpp"

namespace fgkf {

double undefined_metric() { return std::numeric_limits<double>::quiet_NaN(); }
bool metric_defined(double v) { return !std::isnan(v); }

namespace {

double rate(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

double f_score(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

SpanF1Result span_f1(const std::vector<std::vector<int>>& gold,
                     const std::vector<std::vector<int>>& pred, const TagScheme& scheme) {
  if (gold.size() != pred.size())
    throw ShapeError("span F1 needs matching sentence counts");

  SpanF1Result out;
  std::map<int, std::array<long, 3>> by_type;  // gold, pred, match
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      throw ShapeError("span F1 needs matching sentence lengths");
    std::vector<Span> g = extract_spans(gold[i], scheme);
    std::vector<Span> p = extract_spans(pred[i], scheme);
    std::set<Span> gset(g.begin(), g.end());
    out.gold_count += static_cast<long>(g.size());
    out.pred_count += static_cast<long>(p.size());
    for (const Span& s : g) ++by_type[s.type][0];
    for (const Span& s : p) {
      ++by_type[s.type][1];
      if (gset.count(s)) {
        ++out.match_count;
        ++by_type[s.type][2];
        gset.erase(s);
      }
    }
  }

  out.precision = rate(out.match_count, out.pred_count);
  out.recall = rate(out.match_count, out.gold_count);
  out.f1 = f_score(out.precision, out.recall);

  if (scheme.kind() == SchemeKind::bio) {
    for (const auto& [type, counts] : by_type) {
      double p = rate(counts[2], counts[1]);
      double r = rate(counts[2], counts[0]);
      out.per_type[scheme.label(1 + 2 * type).substr(2)] = {p, r, f_score(p, r)};
    }
  }
  return out;
}

double token_accuracy(const std::vector<std::vector<int>>& gold,
                      const std::vector<std::vector<int>>& pred) {
  if (gold.size() != pred.size())
    throw ShapeError("token accuracy needs matching sentence counts");
  long total = 0, correct = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      throw ShapeError("token accuracy needs matching sentence lengths");
    for (size_t t = 0; t < gold[i].size(); ++t) {
      ++total;
      if (gold[i][t] == pred[i][t]) ++correct;
    }
  }
  if (total == 0) return undefined_metric();
  return static_cast<double>(correct) / total;
}

double oov_recall(const Corpus& test, const std::vector<std::vector<int>>& pred,
                  const TagScheme& scheme, const std::set<std::string>& oov) {
  if (test.size() != pred.size())
    throw ShapeError("OOV recall needs matching sentence counts");
  if (oov.empty()) return undefined_metric();

  long total = 0, recovered = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    const TaggedSentence& s = test.sentences[i];
    std::vector<Span> gspans = extract_spans(s.tags, scheme);
    std::vector<Span> pspans = extract_spans(pred[i], scheme);
    std::set<Span> pset(pspans.begin(), pspans.end());
    for (const Span& g : gspans) {
      std::string surface = s.tokens[g.start];
      for (int t = g.start + 1; t < g.start + g.len; ++t) surface += " " + s.tokens[t];
      if (!oov.count(surface)) continue;
      ++total;
      if (pset.count(g)) ++recovered;
    }
  }
  if (total == 0) return undefined_metric();
  return static_cast<double>(recovered) / total;
}

}  // namespace fgkf
