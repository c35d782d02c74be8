#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgkf/params.hpp"
#include "fgkf/value.hpp"

namespace fgkf {

struct CrfParams {
  Value proj_w;  // 2d_h x K
  Value proj_b;  // 1 x K
  Value trans;   // K x K
  Value start;   // 1 x K
  Value stop;    // 1 x K
  int tags = 0;
};

CrfParams crf_params(ParamSet& ps, const std::string& prefix);

// Emission scores for one sentence: hidden (L x 2d_h) -> L x K.
Value emission_scores(const CrfParams& p, const Value& hidden);

// Log of the sum of exp(path score) over all K^L paths; scalar.
Value crf_log_partition(const Value& emissions, const CrfParams& p);

// Per-position log tag distributions (L x K) by forward-backward.
Value crf_log_marginals(const Value& emissions, const CrfParams& p);
// Probability-space marginals; rows sum to 1.
Value crf_marginals(const Value& emissions, const CrfParams& p);

// Score of one tag path, differentiable.
Value crf_path_score(const Value& emissions, const CrfParams& p, std::span<const int> tags);

// Sequence negative log-likelihood: log-partition minus gold path score.
Value crf_nll(const Value& emissions, const CrfParams& p, std::span<const int> gold);

// Max-score decode; ties resolved toward the lower tag id. Reads values
// only, builds no graph.
std::vector<int> crf_viterbi(const Value& emissions, const CrfParams& p);

}  // namespace fgkf
