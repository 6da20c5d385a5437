#pragma once

#include <vector>

#include "omni/codec.hpp"
#include "omni/nn.hpp"

namespace omni {

struct GeneratorConfig {
  int64_t d_llm = 16;
  int64_t hidden = 32;
  int64_t n_nar_blocks = 4;
  int64_t n_ar_blocks = 2;
  int64_t n_heads = 2;
  int64_t n_codes = 1024;   // codec vocabulary; id n_codes is end-of-speech
  int64_t max_frames = 256; // cap on generated codec frames
  double length_ratio = 4.0;

  int64_t eos_id() const { return n_codes; }
  int64_t logits_dim() const { return n_codes + 1; }
};

// Maps a text-embedding length T to a codec-frame length S.
struct LengthRegulator {
  double ratio = 4.0;

  int64_t target_frames(int64_t text_len) const;
  // Nearest-index expansion: output row s copies input row floor(s*T/S).
  static std::vector<int64_t> repeat_indices(int64_t text_len, int64_t out_len);
};

// Non-autoregressive decoder: text embeddings -> per-frame code logits in one
// parallel pass. Its hidden states also condition the AR decoder.
struct NarDecoder {
  GeneratorConfig cfg;
  Linear proj;  // d_llm -> hidden
  PositionalEmbedding pos;
  std::vector<TransformerBlock> blocks;
  LayerNormLayer final_ln;
  Linear head;  // hidden -> n_codes+1

  NarDecoder() = default;
  NarDecoder(Rng& rng, const GeneratorConfig& c);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  struct Out {
    Var features;  // [S x hidden]
    Var logits;    // [S x (n_codes+1)]
  };
  Out forward(Tape& t, Var text_emb, int64_t out_len);
};

// Autoregressive refiner: NAR features form a non-loss prefix, then speech
// tokens are predicted left to right.
struct ArDecoder {
  GeneratorConfig cfg;
  Embedding tok;  // [(n_codes+1) x hidden]
  PositionalEmbedding pos;
  std::vector<TransformerBlock> blocks;
  LayerNormLayer final_ln;
  Linear head;

  ArDecoder() = default;
  ArDecoder(Rng& rng, const GeneratorConfig& c);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  // Teacher forcing: logits row (prefix_len - 1 + i) predicts tokens[i]; the
  // final row predicts end-of-speech.
  Var forward(Tape& t, Var prefix_features, const std::vector<int64_t>& tokens);
  std::vector<int64_t> generate(Tape& t, Var prefix_features, int64_t max_new);
};

struct SpeechGenerator {
  GeneratorConfig cfg;
  LengthRegulator regulator;
  NarDecoder nar;
  ArDecoder ar;

  SpeechGenerator() = default;
  SpeechGenerator(Rng& rng, const GeneratorConfig& c);
  void register_params(ParamRegistry& reg, const std::string& nar_prefix,
                       const std::string& ar_prefix);

  // Mean CE of NAR logits against codes padded with eos (or truncated) to the
  // regulated length.
  Var nar_loss(Tape& t, Var text_emb, const std::vector<int64_t>& codes);
  // Mean next-token CE of the AR decoder over codes followed by eos,
  // conditioned on NAR features.
  Var ar_loss(Tape& t, Var text_emb, const std::vector<int64_t>& codes);

  // Greedy AR decode until eos or the frame cap; eos is stripped.
  std::vector<int64_t> synthesize_tokens(const Tensor& text_emb);
  Waveform synthesize(const Tensor& text_emb, SpeechCodec& codec);
};

}  // namespace omni
