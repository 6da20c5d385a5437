#include "omni/model.hpp"

#include <algorithm>

#include "omni/errors.hpp"

namespace omni {

OmniModel::OmniModel(uint64_t seed, const OmniConfig& config) : cfg(config) {
  // keep cross-module widths consistent regardless of caller overrides
  cfg.gen.d_llm = cfg.llm.d_llm;
  cfg.gen.n_codes = cfg.codec.codebook_size;

  Rng rng(seed);
  vision_encoder = VisionEncoder(rng, cfg.vision);
  vision_adapter = VisionAdapter(rng, cfg.vision.d_vis, cfg.llm.d_llm);
  speech_encoder = SpeechEncoder(rng, cfg.speech);
  speech_adapter = SpeechAdapter(rng, cfg.speech.hidden, cfg.llm.d_llm);
  llm = OmniLlm(rng, cfg.llm);
  codec = SpeechCodec(rng, cfg.codec);
  generator = SpeechGenerator(rng, cfg.gen);

  vision_encoder.register_params(registry, "vision_encoder");
  vision_adapter.register_params(registry, "vision_adapter");
  speech_encoder.register_params(registry, "speech_encoder");
  speech_adapter.register_params(registry, "speech_adapter");
  llm.register_special_tokens(registry, "special_prompt_tokens");
  llm.register_params(registry, "llm");
  llm.register_modality_head(registry, "modality_head");
  codec.register_params(registry, "codec");
  generator.register_params(registry, "nar_decoder", "ar_decoder");
}

const std::vector<std::string>& OmniModel::module_names() {
  static const std::vector<std::string> names = {
      "vision_encoder", "vision_adapter", "speech_encoder", "speech_adapter",
      "special_prompt_tokens", "llm", "modality_head", "codec", "nar_decoder", "ar_decoder"};
  return names;
}

void OmniModel::set_trainable(const std::vector<std::string>& modules) {
  const auto& names = module_names();
  for (const std::string& m : modules) {
    if (std::find(names.begin(), names.end(), m) == names.end()) {
      std::string valid;
      for (const std::string& n : names) valid += (valid.empty() ? "" : ", ") + n;
      throw ConfigError("unknown module '" + m + "'; valid modules: " + valid);
    }
  }
  for (Param* p : registry.params) {
    const std::string module = p->name.substr(0, p->name.find('.'));
    p->trainable = std::find(modules.begin(), modules.end(), module) != modules.end();
  }
  // the codebook moves by EMA, never by the optimizer
  if (Param* cb = registry.find("codec.codebook")) cb->trainable = false;
}

std::vector<Param*> OmniModel::trainable_params() const {
  std::vector<Param*> out;
  for (Param* p : registry.params)
    if (p->trainable) out.push_back(p);
  return out;
}

std::vector<std::string> OmniModel::trainable_modules() const {
  std::vector<std::string> out;
  for (Param* p : registry.params) {
    const std::string module = p->name.substr(0, p->name.find('.'));
    if (p->trainable && std::find(out.begin(), out.end(), module) == out.end()) out.push_back(module);
  }
  return out;
}

}  // namespace omni
