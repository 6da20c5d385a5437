#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omni/nn.hpp"

namespace omni {

// Byte-level vocabulary with reserved control ids below 16.
struct Vocab {
  static constexpr int64_t pad = 0;
  static constexpr int64_t bos = 1;
  static constexpr int64_t eos = 2;
  static constexpr int64_t img_open = 3;
  static constexpr int64_t img_close = 4;
  static constexpr int64_t aud_open = 5;
  static constexpr int64_t aud_close = 6;
  static constexpr int64_t first_byte = 16;

  int64_t size = 512;

  std::vector<int64_t> encode(const std::string& text) const;
  std::string decode(const std::vector<int64_t>& ids) const;
  std::string token_string(int64_t id) const;

  void save(const std::string& path) const;  // id<TAB>token per line
  static Vocab load(const std::string& path);
};

enum class Segment : uint8_t { Text, Vision, Audio, Special, Marker };

struct AssembledSequence {
  Var embeddings;  // [L x d_llm], positional embeddings are added in lm_forward
  std::vector<Segment> tags;
  std::vector<bool> loss_mask;      // true only on text answer positions
  std::vector<int64_t> token_ids;   // vocab id per position, -1 for non-text
  int64_t query_begin = -1;         // span pooled by the modality head
  int64_t query_end = -1;

  int64_t length() const { return static_cast<int64_t>(tags.size()); }
};

struct AssembleInput {
  std::optional<Var> visual;   // [N x d_llm] adapter outputs
  std::optional<Var> audio;    // [M x d_llm] adapter outputs
  std::vector<int64_t> text_ids;
  bool use_special = false;    // prepend the trainable ASR guidance tokens
  int64_t answer_begin = -1;   // index into text_ids where the answer starts; -1 = no loss
  bool query_is_audio = false; // modality label source: audio segment vs text question
};

struct LlmConfig {
  int64_t d_llm = 128;
  int64_t n_blocks = 4;
  int64_t n_heads = 4;
  int64_t vocab_size = 512;
  int64_t context = 640;
  int64_t k_special = 4;

  // Paper-scale analogue of the Qwen2-7B backbone; constructible, never trained.
  static LlmConfig paper_preset() {
    LlmConfig c;
    c.d_llm = 3584;
    c.n_blocks = 28;
    c.n_heads = 28;
    c.vocab_size = 152064;
    c.context = 4096;
    return c;
  }
};

struct OmniLlm {
  LlmConfig cfg;
  Vocab vocab;
  Embedding tok;
  PositionalEmbedding pos;
  std::vector<TransformerBlock> blocks;
  LayerNormLayer final_ln;
  Param special_tokens;  // [k_special x d_llm]
  Linear modality_head;  // d_llm -> 2 (speech, text)

  OmniLlm() = default;
  OmniLlm(Rng& rng, const LlmConfig& c);
  void register_params(ParamRegistry& reg, const std::string& prefix);
  void register_modality_head(ParamRegistry& reg, const std::string& prefix);
  void register_special_tokens(ParamRegistry& reg, const std::string& prefix);

  // [bos][special][<img> vision </img>][<aud> audio </aud>][text]
  AssembledSequence assemble(Tape& t, const AssembleInput& input);

  struct ForwardResult {
    Var hidden;  // [L x d_llm] after the final norm
    Var logits;  // [L x vocab], tied to the token embedding
  };
  ForwardResult lm_forward(Tape& t, const AssembledSequence& seq);

  // softmax distribution over {speech, text}, mean-pooled over the query span
  Var modality_classify(Tape& t, Var hidden, const AssembledSequence& seq);

  // Next-token cross entropy over positions whose successor is a masked
  // (answer) position.
  Var lm_loss(Tape& t, const AssembledSequence& seq, const ForwardResult& fwd);

  enum class DecodeMode { Greedy, Temperature };
  std::vector<int64_t> generate(Tape& t, const AssembleInput& input, int64_t max_new,
                                DecodeMode mode = DecodeMode::Greedy, double temperature = 1.0,
                                uint64_t seed = 0);

  // Token embeddings for a text id sequence (speech-generator input).
  Var embed_text(Tape& t, const std::vector<int64_t>& ids) { return tok.forward(t, ids); }
};

}  // namespace omni
