#include "fgkf/relevance.hpp"

#include <cmath>

#include "fgkf/common.hpp"

namespace fgkf {

void RelevanceConfig::validate(int repr_dim) const {
  if (mode != "sample-q" && mode != "domain-q")
    throw ConfigError("relevance mode must be sample-q or domain-q");
  if (caps_n < 1 || caps_dim < 1) throw ConfigError("capsule sizes must be positive");
  if (routing < 1) throw ConfigError("routing iterations must be at least 1");
  if (clf_hidden < 1) throw ConfigError("classifier hidden size must be positive");
  if (repr_dim % caps_dim != 0)
    throw ConfigError("hidden width must divide into capsule slots");
}

void init_relevance(ParamSet& ps, const RelevanceConfig& config, int repr_dim, Rng& rng) {
  config.validate(repr_dim);
  ps.create_uniform("rel.q", 1, repr_dim, rng, std::sqrt(3.0 / repr_dim));
  int slots = repr_dim / config.caps_dim;
  for (int s = 0; s < slots; ++s)
    ps.create_glorot("rel.caps.w" + std::to_string(s), config.caps_dim,
                     config.caps_n * config.caps_dim, rng);
  ps.create_glorot("rel.caps.proj_w", config.caps_n * config.caps_dim, repr_dim, rng);
  ps.create_zeros("rel.caps.proj_b", 1, repr_dim);
  ps.create_glorot("rel.bilinear", repr_dim, repr_dim, rng);
  ps.create_glorot("rel.clf.w1", repr_dim, config.clf_hidden, rng);
  ps.create_zeros("rel.clf.b1", 1, config.clf_hidden);
  ps.create_glorot("rel.clf.w2", config.clf_hidden, 2, rng);
  ps.create_zeros("rel.clf.b2", 1, 2);
}

RelevanceParams relevance_params(ParamSet& ps, const RelevanceConfig& config) {
  RelevanceParams p;
  p.config = config;
  p.q = ps.get("rel.q");
  // Stored shapes are authoritative for the capsule geometry, so loading a
  // checkpoint does not require repeating the dimension settings.
  Value w0 = ps.get("rel.caps.w0");
  p.config.caps_dim = static_cast<int>(w0.rows());
  p.config.caps_n = static_cast<int>(w0.cols() / w0.rows());
  int slots = static_cast<int>(p.q.cols()) / p.config.caps_dim;
  for (int s = 0; s < slots; ++s) p.caps_w.push_back(ps.get("rel.caps.w" + std::to_string(s)));
  p.caps_proj_w = ps.get("rel.caps.proj_w");
  p.caps_proj_b = ps.get("rel.caps.proj_b");
  p.bilinear = ps.get("rel.bilinear");
  p.clf_w1 = ps.get("rel.clf.w1");
  p.clf_b1 = ps.get("rel.clf.b1");
  p.clf_w2 = ps.get("rel.clf.w2");
  p.clf_b2 = ps.get("rel.clf.b2");
  return p;
}

Value squash_rows(const Value& s) {
  Value n2 = sum(mul(s, s), 1);  // rows x 1
  Value factor = div(n2, mul(add_scalar(n2, 1.0), sqrt(add_scalar(n2, 1e-12))));
  return mul(s, factor);
}

Value capsule_encode(const RelevanceParams& p, const Value& hidden) {
  const int d_c = p.config.caps_dim;
  const int n_out = p.config.caps_n;
  const int slots = static_cast<int>(p.caps_w.size());
  if (static_cast<int>(hidden.cols()) != slots * d_c)
    throw ShapeError("hidden width does not match capsule slots");

  // Predictions per input capsule: rows are (slot, position) pairs, each
  // row concatenates this capsule's vote for every output capsule.
  std::vector<Value> pred_rows;
  for (int s = 0; s < slots; ++s)
    pred_rows.push_back(matmul(slice(hidden, 1, s * d_c, d_c), p.caps_w[s]));
  Value preds = pred_rows.size() == 1 ? pred_rows[0] : concat(pred_rows, 0);
  int n_in = static_cast<int>(preds.rows());

  Value logits = Value::zeros(n_in, n_out);
  Value out;
  for (int it = 0; it < p.config.routing; ++it) {
    Value coupling = softmax(logits, 1);  // over output capsules
    std::vector<Value> caps(n_out);
    for (int o = 0; o < n_out; ++o) {
      Value votes = slice(preds, 1, o * d_c, d_c);          // n_in x d_c
      Value weighted = mul(votes, slice(coupling, 1, o, 1));  // column broadcast
      caps[o] = sum(weighted, 0);                            // 1 x d_c
    }
    Value stacked = n_out == 1 ? caps[0] : concat(caps, 0);  // n_out x d_c
    out = squash_rows(stacked);
    if (it + 1 < p.config.routing) {
      std::vector<Value> agree(n_out);
      for (int o = 0; o < n_out; ++o) {
        Value votes = slice(preds, 1, o * d_c, d_c);
        agree[o] = sum(mul(votes, slice(out, 0, o, 1)), 1);  // n_in x 1
      }
      Value agreement = n_out == 1 ? agree[0] : concat(agree, 1);
      logits = add(logits, agreement);
    }
  }

  Value flat = reshape(out, 1, n_out * d_c);
  return add(matmul(flat, p.caps_proj_w), p.caps_proj_b);
}

Value domain_query(const RelevanceParams& p, const Value& hidden) {
  if (p.config.mode == "domain-q") return p.q;
  return capsule_encode(p, hidden);
}

Value elem_relevance(const Value& q, const Value& bilinear, const Value& hidden) {
  return matmul(matmul(q, bilinear), transpose(hidden));  // 1 x L
}

PooledSample sample_repr(const Value& w_elem, const Value& hidden) {
  PooledSample out;
  out.w_hat = softmax(w_elem, 1);
  out.r = matmul(out.w_hat, hidden);
  return out;
}

Value sample_classify(const RelevanceParams& p, const Value& r, const RelevanceOptions& opt) {
  Value h = tanh(add(matmul(r, p.clf_w1), p.clf_b1));
  if (opt.dropout > 0.0) {
    if (opt.rng == nullptr) throw ConfigError("dropout requires a random generator");
    std::vector<double> mask(h.size());
    double keep = 1.0 - opt.dropout;
    for (auto& m : mask) m = opt.rng->uniform() < keep ? 1.0 / keep : 0.0;
    h = dropout(h, mask);
  }
  Value logits = add(matmul(h, p.clf_w2), p.clf_b2);
  return pick(softmax(logits, 1), 0, 0);  // class 0 = source
}

RelevanceOutput relevance_forward(const RelevanceParams& p, const Value& hidden,
                                  const RelevanceOptions& opt) {
  RelevanceOutput out;
  Value q = domain_query(p, hidden);
  out.w_elem = elem_relevance(q, p.bilinear, hidden);
  PooledSample pooled = sample_repr(out.w_elem, hidden);
  out.w_hat = pooled.w_hat;
  out.r = pooled.r;

  Value h = tanh(add(matmul(out.r, p.clf_w1), p.clf_b1));
  if (opt.dropout > 0.0) {
    if (opt.rng == nullptr) throw ConfigError("dropout requires a random generator");
    std::vector<double> mask(h.size());
    double keep = 1.0 - opt.dropout;
    for (auto& m : mask) m = opt.rng->uniform() < keep ? 1.0 / keep : 0.0;
    h = dropout(h, mask);
  }
  out.class_logits = add(matmul(h, p.clf_w2), p.clf_b2);
  out.w_samp = pick(softmax(out.class_logits, 1), 0, 0);
  return out;
}

Value domain_classification_loss(std::span<const RelevanceOutput> outputs,
                                 std::span<const Domain> labels) {
  if (outputs.empty() || outputs.size() != labels.size())
    throw ShapeError("classification loss needs matching outputs and labels");
  Value total;
  for (size_t i = 0; i < outputs.size(); ++i) {
    Value logp = log_softmax(outputs[i].class_logits, 1);
    Value nll = scale(pick(logp, 0, static_cast<int>(labels[i])), -1.0);
    total = total.defined() ? add(total, nll) : nll;
  }
  return scale(total, 1.0 / static_cast<double>(outputs.size()));
}

}  // namespace fgkf
