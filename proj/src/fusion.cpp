#include "fgkf/fusion.hpp"

#include <cmath>

#include "fgkf/common.hpp"

namespace fgkf {

void AlphaConfig::validate() const {
  if (mode != "fixed" && mode != "sample" && mode != "element" && mode != "multi")
    throw ConfigError("alpha mode must be fixed, sample, element or multi");
  if (fixed_alpha < 0.0 || fixed_alpha > 1.0)
    throw ConfigError("fixed alpha must lie in [0,1]");
  if (!std::isfinite(tau_init) || !std::isfinite(gamma_init))
    throw ConfigError("tau and gamma must be finite");
}

void init_alpha(ParamSet& ps, const AlphaConfig& config) {
  config.validate();
  ps.create("alpha.tau", 1, 1, {config.tau_init});
  ps.create("alpha.gamma", 1, 1, {config.gamma_init});
  ps.create("alpha.w", 1, 1, {1.0});
  ps.create("alpha.b", 1, 1, {0.0});
}

AlphaParams alpha_params(ParamSet& ps) {
  return {ps.get("alpha.tau"), ps.get("alpha.gamma"), ps.get("alpha.w"), ps.get("alpha.b")};
}

Value alpha_sample(const Value& w_samp, const AlphaParams& p) {
  return sigmoid(add(mul(p.tau, w_samp), p.gamma));
}

Value alpha_elem(const Value& w_elem, const AlphaParams& p) {
  return sigmoid(add(mul(w_elem, p.w), p.b));
}

Value alpha_multi(const Value& a_samp, const Value& a_elem) {
  return mul(a_elem, a_samp);
}

Value mean_loss(std::span<const Value> losses) {
  if (losses.empty()) throw ShapeError("mean over an empty batch");
  Value total;
  for (const Value& l : losses) total = total.defined() ? add(total, l) : l;
  return scale(total, 1.0 / static_cast<double>(losses.size()));
}

namespace {

void check_alpha_range(const Value& a, const char* what) {
  for (double v : a.data())
    if (!(v >= 0.0 && v <= 1.0))
      throw DataError(std::string(what) + " fusion weight outside [0,1]");
}

void check_teacher(const Value& teacher) {
  int k = static_cast<int>(teacher.cols());
  std::span<const double> d = teacher.data();
  for (size_t r = 0; r < static_cast<size_t>(teacher.rows()); ++r) {
    double s = 0.0;
    for (int c = 0; c < k; ++c) s += d[r * k + c];
    if (std::abs(s - 1.0) > 1e-6)
      throw DataError("soft-target row does not sum to 1");
  }
}

// Per-position cross entropy against the teacher, as a 1 x L row.
Value position_ce(const SentenceLossInput& in) {
  check_teacher(in.teacher);
  return transpose(scale(sum(mul(in.teacher, in.log_probs), 1), -1.0));
}

// Per-position gold log-probabilities stacked as a 1 x L row.
Value gold_log_probs(const SentenceLossInput& in) {
  std::vector<Value> picks;
  picks.reserve(in.gold.size());
  for (size_t t = 0; t < in.gold.size(); ++t)
    picks.push_back(pick(in.log_probs, static_cast<int>(t), in.gold[t]));
  return picks.size() == 1 ? picks[0] : concat(picks, 1);
}

}  // namespace

LossParts target_loss(const AlphaConfig& config, std::span<const SentenceLossInput> batch) {
  config.validate();
  if (batch.empty()) throw ShapeError("target loss over an empty batch");
  double inv_n = 1.0 / static_cast<double>(batch.size());

  LossParts out;
  Value seq_sum, kd_sum;
  double alpha_acc = 0.0;
  size_t alpha_count = 0;
  auto accumulate = [](Value& acc, const Value& v) {
    acc = acc.defined() ? add(acc, v) : v;
  };

  if (config.mode == "fixed") {
    double a = config.fixed_alpha;
    for (const auto& in : batch) {
      accumulate(seq_sum, in.nll);
      if (a > 0.0) accumulate(kd_sum, sum(position_ce(in)));
    }
    out.seq = scale(seq_sum, (1.0 - a) * inv_n);
    out.kd = a > 0.0 ? scale(kd_sum, a * inv_n) : Value::zeros(1, 1);
    out.mean_alpha = a;
    alpha_count = 1;
  } else if (config.mode == "sample") {
    for (const auto& in : batch) {
      check_alpha_range(in.alpha_samp, "sample");
      Value one_minus = sub(Value::scalar(1.0), in.alpha_samp);
      accumulate(seq_sum, mul(one_minus, in.nll));
      accumulate(kd_sum, mul(in.alpha_samp, sum(position_ce(in))));
      alpha_acc += in.alpha_samp.item();
      ++alpha_count;
    }
    out.seq = scale(seq_sum, inv_n);
    out.kd = scale(kd_sum, inv_n);
  } else {  // element | multi
    for (const auto& in : batch) {
      Value a = in.alpha_elem;
      if (config.mode == "multi") {
        check_alpha_range(in.alpha_samp, "sample");
        a = alpha_multi(in.alpha_samp, in.alpha_elem);
      }
      check_alpha_range(a, "element");
      Value one_minus = sub(Value::full(1, a.cols(), 1.0), a);
      accumulate(seq_sum, scale(sum(mul(one_minus, gold_log_probs(in))), -1.0));
      accumulate(kd_sum, sum(mul(a, position_ce(in))));
      for (double v : a.data()) alpha_acc += v;
      alpha_count += a.size();
    }
    out.seq = scale(seq_sum, inv_n);
    out.kd = scale(kd_sum, inv_n);
  }

  if (config.mode != "fixed") out.mean_alpha = alpha_acc / static_cast<double>(alpha_count);
  out.total = add(out.seq, out.kd);
  return out;
}

}  // namespace fgkf
