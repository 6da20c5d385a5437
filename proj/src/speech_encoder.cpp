#include "omni/speech_encoder.hpp"

#include <cmath>

#include "omni/errors.hpp"

namespace omni {

namespace {

// Per-utterance mean/variance normalization. Log-mel energies of silent
// bands sit near log(eps) ~ -23; standardizing keeps the conv stack's
// activations and gradients at unit scale.
Tensor standardize(const Tensor& mel) {
  Tensor out = mel;
  double mean = 0.0;
  for (double v : out.data) mean += v;
  mean /= static_cast<double>(out.data.size());
  double var = 0.0;
  for (double v : out.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.data.size());
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  for (double& v : out.data) v = (v - mean) * inv;
  return out;
}

}  // namespace

SpeechEncoder::SpeechEncoder(Rng& rng, const EncoderConfig& c) : cfg(c) {
  if (c.conv_downsample_total != 4 && c.conv_downsample_total != 8) {
    throw ConfigError("speech encoder: conv_downsample_total must be 4 or 8, got " +
                      std::to_string(c.conv_downsample_total));
  }
  if (c.n_blocks < 1) throw ConfigError("speech encoder: need at least one transformer block");
  const int64_t stages = (c.conv_downsample_total == 4) ? 2 : 3;
  int64_t cin = c.n_mels;
  for (int64_t i = 0; i < stages; ++i) {
    convs.emplace_back(rng, cin, c.hidden, /*kernel=*/4, /*stride=*/2);
    cin = c.hidden;
  }
  blocks.reserve(static_cast<size_t>(c.n_blocks));
  for (int64_t i = 0; i < c.n_blocks; ++i) blocks.emplace_back(rng, c.hidden, c.n_heads);
  ctc_head = Linear(rng, c.hidden, c.vocab_ctc);
}

void SpeechEncoder::register_params(ParamRegistry& reg, const std::string& prefix) {
  for (size_t i = 0; i < convs.size(); ++i)
    convs[i].register_params(reg, prefix + ".conv" + std::to_string(i));
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".block" + std::to_string(i));
  ctc_head.register_params(reg, prefix + ".ctc_head");
}

Var SpeechEncoder::encode(Tape& t, const Tensor& mel) {
  if (mel.ndim() != 2 || mel.shape[1] != cfg.n_mels) {
    throw ShapeError("speech encoder: mel " + mel.shape_string() + " does not match n_mels " +
                     std::to_string(cfg.n_mels));
  }
  if (mel.shape[0] < 1) {
    throw DataError("speech encoder: input too short to produce an output frame");
  }
  Var x = t.constant(standardize(mel));
  for (auto& conv : convs) x = ops::gelu(t, conv.forward(t, x));
  for (auto& b : blocks) x = b.forward(t, x, /*causal=*/false);
  return x;
}

Var SpeechEncoder::ctc_logprobs(Tape& t, Var features) {
  return ops::log_softmax_rows(t, ctc_head.forward(t, features));
}

Var SpeechAdapter::forward(Tape& t, Var features) {
  if (features->value.ndim() != 2 || features->value.shape[0] < 1) {
    throw DataError("speech adapter: empty feature sequence");
  }
  Var x = ops::gelu(t, conv.forward(t, features));
  return proj.forward(t, x);
}

}  // namespace omni
