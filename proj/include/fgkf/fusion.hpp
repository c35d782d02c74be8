#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgkf/params.hpp"
#include "fgkf/value.hpp"

namespace fgkf {

struct AlphaConfig {
  std::string mode = "fixed";  // fixed | sample | element | multi
  double fixed_alpha = 0.5;
  double tau_init = 1.0;
  double gamma_init = 0.5;

  void validate() const;
  bool needs_sample() const { return mode == "sample" || mode == "multi"; }
  bool needs_element() const { return mode == "element" || mode == "multi"; }
};

// Trainable fusion parameters ("alpha." group): temperature and bias for
// the sample gate, scalar map and bias for the element gate.
struct AlphaParams {
  Value tau, gamma, w, b;
};

void init_alpha(ParamSet& ps, const AlphaConfig& config);
AlphaParams alpha_params(ParamSet& ps);

Value alpha_sample(const Value& w_samp, const AlphaParams& p);  // sigma(tau*w + gamma)
Value alpha_elem(const Value& w_elem, const AlphaParams& p);    // position-wise gate
Value alpha_multi(const Value& a_samp, const Value& a_elem);    // product

// Mean sequence NLL over a batch.
Value mean_loss(std::span<const Value> losses);

// Everything the target loss needs for one sentence. `teacher` rows must
// be probability distributions; `log_probs` are the student's per-position
// log distributions. Unused fields may stay undefined for a given mode.
struct SentenceLossInput {
  Value nll;                  // sequence-level NLL
  Value log_probs;            // L x K
  Value teacher;              // L x K, constant
  std::vector<int> gold;
  Value alpha_samp;           // scalar
  Value alpha_elem;           // 1 x L
};

struct LossParts {
  Value total;
  Value seq;          // gold-label contribution as summed into total
  Value kd;           // distillation contribution as summed into total
  double mean_alpha = 0.0;
};

LossParts target_loss(const AlphaConfig& config, std::span<const SentenceLossInput> batch);

}  // namespace fgkf
