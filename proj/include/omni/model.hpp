#pragma once

#include <string>
#include <vector>

#include "omni/codec.hpp"
#include "omni/llm.hpp"
#include "omni/speech_decoder.hpp"
#include "omni/speech_encoder.hpp"
#include "omni/vision.hpp"

namespace omni {

// Desk-scale defaults throughout: every module is trainable on a single core.
struct OmniConfig {
  VisionConfig vision;
  EncoderConfig speech;
  LlmConfig llm;
  CodecConfig codec;
  GeneratorConfig gen;

  OmniConfig() {
    vision.d_vis = 16;
    vision.n_blocks = 1;
    vision.n_heads = 2;
    speech.hidden = 32;
    speech.n_blocks = 1;
    speech.n_heads = 2;
    llm.d_llm = 32;
    llm.n_blocks = 2;
    llm.n_heads = 2;
    llm.context = 1600;
    codec.channels = 8;
    codec.d_latent = 8;
    gen.hidden = 32;
    gen.n_nar_blocks = 2;
    gen.n_ar_blocks = 2;
    gen.n_heads = 2;
    gen.max_frames = 128;
  }
};

// The full pipeline under one parameter registry. Module prefixes are the
// stable names used by checkpoints, stage freeze sets, and the CLI.
struct OmniModel {
  OmniConfig cfg;
  VisionEncoder vision_encoder;
  VisionAdapter vision_adapter;
  SpeechEncoder speech_encoder;
  SpeechAdapter speech_adapter;
  OmniLlm llm;
  SpeechCodec codec;
  SpeechGenerator generator;
  ParamRegistry registry;

  OmniModel(uint64_t seed, const OmniConfig& config);

  static const std::vector<std::string>& module_names();

  // Marks exactly the listed modules trainable; unknown names are a config
  // error listing the valid set.
  void set_trainable(const std::vector<std::string>& modules);
  std::vector<Param*> trainable_params() const;
  std::vector<std::string> trainable_modules() const;
};

}  // namespace omni
