#include "fgkf/crf.hpp"

#include "fgkf/common.hpp"

namespace fgkf {

CrfParams crf_params(ParamSet& ps, const std::string& prefix) {
  CrfParams p;
  p.proj_w = ps.get(prefix + ".crf.proj_w");
  p.proj_b = ps.get(prefix + ".crf.proj_b");
  p.trans = ps.get(prefix + ".crf.trans");
  p.start = ps.get(prefix + ".crf.start");
  p.stop = ps.get(prefix + ".crf.stop");
  p.tags = static_cast<int>(p.trans.rows());
  return p;
}

Value emission_scores(const CrfParams& p, const Value& hidden) {
  return add(matmul(hidden, p.proj_w), p.proj_b);
}

namespace {

void check_emissions(const Value& em, const CrfParams& p) {
  if (em.rows() < 1) throw ShapeError("emissions need at least one position");
  if (em.cols() != p.trans.rows())
    throw ShapeError("emission width does not match tag count");
}

// Forward scores: alpha[t] is 1 x K, alpha[t][j] = log sum over paths
// ending at t in state j (start term included, stop term not).
std::vector<Value> forward_scores(const Value& em, const CrfParams& p) {
  int L = static_cast<int>(em.rows());
  std::vector<Value> alpha(L);
  alpha[0] = add(slice(em, 0, 0, 1), p.start);
  for (int t = 1; t < L; ++t) {
    Value inbound = add(p.trans, transpose(alpha[t - 1]));  // K x K + K x 1
    alpha[t] = add(logsumexp(inbound, 0), slice(em, 0, t, 1));
  }
  return alpha;
}

Value partition_from(const std::vector<Value>& alpha, const CrfParams& p) {
  return logsumexp(add(alpha.back(), p.stop), 1);
}

}  // namespace

Value crf_log_partition(const Value& em, const CrfParams& p) {
  check_emissions(em, p);
  return partition_from(forward_scores(em, p), p);
}

Value crf_log_marginals(const Value& em, const CrfParams& p) {
  check_emissions(em, p);
  int L = static_cast<int>(em.rows());
  std::vector<Value> alpha = forward_scores(em, p);
  Value log_z = partition_from(alpha, p);

  std::vector<Value> beta(L);
  beta[L - 1] = p.stop;
  for (int t = L - 2; t >= 0; --t) {
    Value outbound = add(add(p.trans, slice(em, 0, t + 1, 1)), beta[t + 1]);
    beta[t] = transpose(logsumexp(outbound, 1));  // K x 1 -> 1 x K
  }

  std::vector<Value> rows(L);
  for (int t = 0; t < L; ++t) rows[t] = sub(add(alpha[t], beta[t]), log_z);
  return L == 1 ? rows[0] : concat(rows, 0);
}

Value crf_marginals(const Value& em, const CrfParams& p) {
  return exp(crf_log_marginals(em, p));
}

Value crf_path_score(const Value& em, const CrfParams& p, std::span<const int> tags) {
  check_emissions(em, p);
  if (static_cast<int>(tags.size()) != em.rows())
    throw ShapeError("tag path length does not match emissions");
  for (int y : tags)
    if (y < 0 || y >= p.tags) throw ShapeError("tag id outside inventory");

  Value score = add(pick(p.start, 0, tags[0]), pick(em, 0, tags[0]));
  for (size_t t = 1; t < tags.size(); ++t) {
    score = add(score, pick(p.trans, tags[t - 1], tags[t]));
    score = add(score, pick(em, static_cast<int>(t), tags[t]));
  }
  return add(score, pick(p.stop, 0, tags.back()));
}

Value crf_nll(const Value& em, const CrfParams& p, std::span<const int> gold) {
  return sub(crf_log_partition(em, p), crf_path_score(em, p, gold));
}

std::vector<int> crf_viterbi(const Value& em, const CrfParams& p) {
  check_emissions(em, p);
  int L = static_cast<int>(em.rows());
  int K = p.tags;
  std::span<const double> e = em.data();
  std::span<const double> tr = p.trans.data();
  std::span<const double> start = p.start.data();
  std::span<const double> stop = p.stop.data();

  std::vector<double> score(static_cast<size_t>(L) * K);
  std::vector<int> back(static_cast<size_t>(L) * K, -1);
  for (int j = 0; j < K; ++j) score[j] = start[j] + e[j];
  for (int t = 1; t < L; ++t) {
    for (int j = 0; j < K; ++j) {
      double best = score[(t - 1) * K] + tr[j];
      int best_i = 0;
      for (int i = 1; i < K; ++i) {
        double s = score[(t - 1) * K + i] + tr[i * K + j];
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      score[t * K + j] = best + e[t * K + j];
      back[t * K + j] = best_i;
    }
  }

  int last = 0;
  double best = score[(L - 1) * K] + stop[0];
  for (int j = 1; j < K; ++j) {
    double s = score[(L - 1) * K + j] + stop[j];
    if (s > best) {
      best = s;
      last = j;
    }
  }

  std::vector<int> path(L);
  path[L - 1] = last;
  for (int t = L - 1; t > 0; --t) path[t - 1] = back[t * K + path[t]];
  return path;
}

}  // namespace fgkf
