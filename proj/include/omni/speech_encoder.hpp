#pragma once

#include <vector>

#include "omni/audio.hpp"
#include "omni/ctc.hpp"
#include "omni/nn.hpp"

namespace omni {

struct EncoderConfig {
  int64_t conv_downsample_total = 8;  // 4 or 8; default honors the 12.5 Hz output rate
  int64_t n_blocks = 2;
  int64_t hidden = 64;
  int64_t n_heads = 4;
  int64_t n_mels = 80;
  int64_t vocab_ctc = 17;  // blank + symbol vocabulary

  double output_frame_rate_hz() const { return 100.0 / static_cast<double>(conv_downsample_total); }

  // Paper-scale preset; constructible but never trained in tests.
  static EncoderConfig paper_preset() {
    EncoderConfig c;
    c.conv_downsample_total = 8;
    c.n_blocks = 24;
    c.hidden = 1024;
    c.n_heads = 16;
    return c;
  }
};

// Strided conv downsampling followed by non-causal transformer blocks, plus
// a CTC projection head used during audio alignment.
struct SpeechEncoder {
  EncoderConfig cfg;
  std::vector<Conv1dLayer> convs;  // stride-2 stages
  std::vector<TransformerBlock> blocks;
  Linear ctc_head;  // hidden -> vocab_ctc

  SpeechEncoder() = default;
  SpeechEncoder(Rng& rng, const EncoderConfig& c);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  // [mel_frames x n_mels] -> [ceil(mel_frames / downsample) x hidden]
  Var encode(Tape& t, const Tensor& mel);
  Var encode(Tape& t, const MelSpectrogram& mel) { return encode(t, mel.data); }

  // log-softmax CTC emissions, [frames x vocab_ctc]
  Var ctc_logprobs(Tape& t, Var features);
};

// 2x downsampling conv into the LLM embedding space.
struct SpeechAdapter {
  Conv1dLayer conv;  // hidden -> d_llm, stride 2
  Linear proj;       // d_llm -> d_llm

  SpeechAdapter() = default;
  SpeechAdapter(Rng& rng, int64_t hidden, int64_t d_llm)
      : conv(rng, hidden, d_llm, 4, 2), proj(rng, d_llm, d_llm) {}
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    conv.register_params(reg, prefix + ".conv");
    proj.register_params(reg, prefix + ".proj");
  }
  Var forward(Tape& t, Var features);
};

}  // namespace omni
