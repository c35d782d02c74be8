#include "fgkf/seq_model.hpp"

#include <cmath>

#include "fgkf/common.hpp"

namespace fgkf {

SequenceBatch make_batch(std::span<const TaggedSentence> sentences, const Vocabulary& vocab) {
  SequenceBatch b;
  for (const auto& s : sentences) b.max_len = std::max(b.max_len, static_cast<int>(s.tokens.size()));
  for (const auto& s : sentences) {
    int len = static_cast<int>(s.tokens.size());
    std::vector<int> ids(b.max_len, Vocabulary::kPad);
    std::vector<int> gold(b.max_len, -1);
    for (int t = 0; t < len; ++t) {
      ids[t] = vocab.encode(s.tokens[t]);
      gold[t] = s.tags[t];
    }
    b.tokens.push_back(std::move(ids));
    b.tags.push_back(std::move(gold));
    b.lengths.push_back(len);
    b.domains.push_back(s.domain);
  }
  return b;
}

SequenceBatch make_batch(const Corpus& corpus, std::span<const int> indices,
                         const Vocabulary& vocab) {
  std::vector<TaggedSentence> picked;
  picked.reserve(indices.size());
  for (int i : indices) picked.push_back(corpus.sentences.at(i));
  return make_batch(picked, vocab);
}

void init_shared_embedding(ParamSet& ps, int vocab, int emb, Rng& rng) {
  double radius = std::sqrt(3.0 / emb);
  ps.create_uniform("emb.table", vocab, emb, rng, radius);
}

void init_tagger(ParamSet& ps, const std::string& prefix, const ModelDims& dims, Rng& rng) {
  int e = dims.emb, h = dims.hidden, k = dims.tags;
  for (const char* dir : {"fwd", "bwd"}) {
    std::string base = prefix + ".lstm." + dir;
    ps.create_glorot(base + ".wx", e, 4 * h, rng);
    ps.create_glorot(base + ".wh", h, 4 * h, rng);
    ps.create_zeros(base + ".b", 1, 4 * h);
  }
  ps.create_glorot(prefix + ".crf.proj_w", 2 * h, k, rng);
  ps.create_zeros(prefix + ".crf.proj_b", 1, k);
  ps.create_zeros(prefix + ".crf.trans", k, k);
  ps.create_zeros(prefix + ".crf.start", 1, k);
  ps.create_zeros(prefix + ".crf.stop", 1, k);
}

EncoderParams encoder_params(ParamSet& ps, const std::string& prefix) {
  EncoderParams p;
  p.emb = ps.has("emb.table") ? ps.get("emb.table") : ps.get(prefix + ".emb.table");
  p.fwd_wx = ps.get(prefix + ".lstm.fwd.wx");
  p.fwd_wh = ps.get(prefix + ".lstm.fwd.wh");
  p.fwd_b = ps.get(prefix + ".lstm.fwd.b");
  p.bwd_wx = ps.get(prefix + ".lstm.bwd.wx");
  p.bwd_wh = ps.get(prefix + ".lstm.bwd.wh");
  p.bwd_b = ps.get(prefix + ".lstm.bwd.b");
  p.hidden = static_cast<int>(p.fwd_wh.rows());
  return p;
}

namespace {

// One LSTM sweep over the given time order; out[t] is the state after
// consuming x[order[t]], stored back at that position.
std::vector<Value> lstm_sweep(const Value& x_rows, std::span<const int> order,
                              const Value& wx, const Value& wh, const Value& b, int hidden) {
  std::vector<Value> states(order.size());
  Value h = Value::zeros(1, hidden);
  Value c = Value::zeros(1, hidden);
  for (int pos : order) {
    Value xt = slice(x_rows, 0, pos, 1);
    Value gates = add(add(matmul(xt, wx), matmul(h, wh)), b);
    Value ig = sigmoid(slice(gates, 1, 0, hidden));
    Value fg = sigmoid(slice(gates, 1, hidden, hidden));
    Value gg = tanh(slice(gates, 1, 2 * hidden, hidden));
    Value og = sigmoid(slice(gates, 1, 3 * hidden, hidden));
    c = add(mul(fg, c), mul(ig, gg));
    h = mul(og, tanh(c));
    states[pos] = h;
  }
  return states;
}

}  // namespace

Value bilstm_encode_sentence(const EncoderParams& p, std::span<const int> token_ids,
                             const EncodeOptions& opt) {
  if (token_ids.empty()) throw ShapeError("cannot encode an empty sentence");
  for (int id : token_ids)
    if (id < 0 || id >= static_cast<int>(p.emb.rows()))
      throw DataError("token id " + std::to_string(id) + " outside embedding table");

  Value x = gather_rows(p.emb, token_ids);
  if (opt.dropout > 0.0) {
    if (opt.rng == nullptr) throw ConfigError("dropout requires a random generator");
    std::vector<double> mask(x.size());
    double keep = 1.0 - opt.dropout;
    for (auto& m : mask) m = opt.rng->uniform() < keep ? 1.0 / keep : 0.0;
    x = dropout(x, mask);
  }

  int L = static_cast<int>(token_ids.size());
  std::vector<int> fwd_order(L), bwd_order(L);
  for (int t = 0; t < L; ++t) {
    fwd_order[t] = t;
    bwd_order[t] = L - 1 - t;
  }
  std::vector<Value> fwd = lstm_sweep(x, fwd_order, p.fwd_wx, p.fwd_wh, p.fwd_b, p.hidden);
  std::vector<Value> bwd = lstm_sweep(x, bwd_order, p.bwd_wx, p.bwd_wh, p.bwd_b, p.hidden);

  std::vector<Value> rows(L);
  for (int t = 0; t < L; ++t) rows[t] = concat({fwd[t], bwd[t]}, 1);
  if (L == 1) return rows[0];
  return concat(rows, 0);
}

std::vector<Value> bilstm_encode(const EncoderParams& p, const SequenceBatch& batch,
                                 const EncodeOptions& opt) {
  std::vector<Value> out;
  out.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    out.push_back(bilstm_encode_sentence(p, batch.token_ids(static_cast<int>(i)), opt));
  return out;
}

std::vector<double> padded_hidden(const std::vector<Value>& hidden, int max_len) {
  if (hidden.empty()) return {};
  size_t width = hidden[0].cols();
  std::vector<double> out(hidden.size() * max_len * width, 0.0);
  for (size_t i = 0; i < hidden.size(); ++i) {
    std::span<const double> src = hidden[i].data();
    for (size_t t = 0; t < static_cast<size_t>(hidden[i].rows()); ++t)
      for (size_t d = 0; d < width; ++d)
        out[(i * max_len + t) * width + d] = src[t * width + d];
  }
  return out;
}

}  // namespace fgkf
