#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgkf/corpus.hpp"
#include "fgkf/params.hpp"
#include "fgkf/rng.hpp"
#include "fgkf/value.hpp"

namespace fgkf {

struct RelevanceConfig {
  std::string mode = "sample-q";  // sample-q (capsule) | domain-q (trainable vector)
  int caps_n = 60;                // output capsules
  int caps_dim = 8;               // output capsule dimension
  int routing = 3;
  int clf_hidden = 100;

  void validate(int repr_dim) const;
};

// Handles into the shared relevance parameter group ("rel." prefix): the
// domain-q vector, capsule stack, bilinear form, and domain classifier.
struct RelevanceParams {
  RelevanceConfig config;
  Value q;                     // 1 x 2d_h
  std::vector<Value> caps_w;   // per sub-capsule slot: d_c x (N * d_c)
  Value caps_proj_w;           // N * d_c x 2d_h
  Value caps_proj_b;           // 1 x 2d_h
  Value bilinear;              // 2d_h x 2d_h
  Value clf_w1, clf_b1, clf_w2, clf_b2;
};

void init_relevance(ParamSet& ps, const RelevanceConfig& config, int repr_dim, Rng& rng);
RelevanceParams relevance_params(ParamSet& ps, const RelevanceConfig& config);

// Norm-bounding nonlinearity applied to each row independently:
// v = s * |s|^2 / ((1 + |s|^2) |s|), so every output row has norm < 1.
Value squash_rows(const Value& s);

// Dynamic routing over one sentence's hidden states (L x 2d_h); every
// d_c-wide slice of a position is one input capsule. Returns q (1 x 2d_h).
Value capsule_encode(const RelevanceParams& p, const Value& hidden);

// Query vector per the configured mode.
Value domain_query(const RelevanceParams& p, const Value& hidden);

// Bilinear similarity per position: 1 x L with entry j = q B h_j.
Value elem_relevance(const Value& q, const Value& bilinear, const Value& hidden);

// Softmax-normalized weights and the pooled sample representation.
struct PooledSample {
  Value w_hat;  // 1 x L, sums to 1
  Value r;      // 1 x 2d_h
};
PooledSample sample_repr(const Value& w_elem, const Value& hidden);

struct RelevanceOptions {
  double dropout = 0.0;  // on the classifier hidden layer
  Rng* rng = nullptr;
};

// Two-class softmax over the classifier logits; returns P(source).
Value sample_classify(const RelevanceParams& p, const Value& r,
                      const RelevanceOptions& opt = {});

struct RelevanceOutput {
  Value w_elem;        // 1 x L raw scores
  Value w_hat;         // 1 x L normalized
  Value r;             // 1 x 2d_h
  Value w_samp;        // scalar, P(source)
  Value class_logits;  // 1 x 2
};

RelevanceOutput relevance_forward(const RelevanceParams& p, const Value& hidden,
                                  const RelevanceOptions& opt = {});

// Mean two-class cross entropy of the domain labels under the classifier.
Value domain_classification_loss(std::span<const RelevanceOutput> outputs,
                                 std::span<const Domain> labels);

}  // namespace fgkf
