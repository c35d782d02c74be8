#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgkf/corpus.hpp"
#include "fgkf/params.hpp"
#include "fgkf/rng.hpp"
#include "fgkf/value.hpp"

namespace fgkf {

struct ModelDims {
  int vocab = 0;
  int emb = 100;
  int hidden = 100;
  int tags = 0;
};

// Padded storage for a batch of sentences. Padding exists only here; the
// computation graphs are built per sentence over true lengths.
struct SequenceBatch {
  std::vector<std::vector<int>> tokens;  // b rows, padded with Vocabulary::kPad
  std::vector<std::vector<int>> tags;    // padded with -1
  std::vector<int> lengths;
  std::vector<Domain> domains;
  int max_len = 0;

  size_t size() const { return tokens.size(); }
  std::span<const int> token_ids(int i) const {
    return std::span<const int>(tokens[i]).first(lengths[i]);
  }
  std::span<const int> gold(int i) const {
    return std::span<const int>(tags[i]).first(lengths[i]);
  }
};

SequenceBatch make_batch(const Corpus& corpus, std::span<const int> indices,
                         const Vocabulary& vocab);
SequenceBatch make_batch(std::span<const TaggedSentence> sentences, const Vocabulary& vocab);

// Parameter handles for one directioned LSTM pair plus the shared embedding.
struct EncoderParams {
  Value emb;
  Value fwd_wx, fwd_wh, fwd_b;
  Value bwd_wx, bwd_wh, bwd_b;
  int hidden = 0;
};

void init_shared_embedding(ParamSet& ps, int vocab, int emb, Rng& rng);
void init_tagger(ParamSet& ps, const std::string& prefix, const ModelDims& dims, Rng& rng);
EncoderParams encoder_params(ParamSet& ps, const std::string& prefix);

struct EncodeOptions {
  double dropout = 0.0;  // on embedding rows; needs rng when > 0
  Rng* rng = nullptr;
};

// Hidden states for one sentence: length x 2d_h, row j = [fwd_j, bwd_j].
Value bilstm_encode_sentence(const EncoderParams& p, std::span<const int> token_ids,
                             const EncodeOptions& opt = {});
std::vector<Value> bilstm_encode(const EncoderParams& p, const SequenceBatch& batch,
                                 const EncodeOptions& opt = {});

// Dense b x max_len x 2d_h materialization, zeros at padded positions.
std::vector<double> padded_hidden(const std::vector<Value>& hidden, int max_len);

}  // namespace fgkf
