#pragma once

#include <vector>

#include "omni/audio.hpp"
#include "omni/nn.hpp"
#include "omni/optim.hpp"

namespace omni {

struct CodecConfig {
  int sample_rate = 24000;
  std::vector<int64_t> strides = {2, 3, 4, 5, 5};  // product 600 -> 40 Hz tokens
  int64_t channels = 24;
  int64_t d_latent = 24;
  int64_t codebook_size = 1024;
  double commit_beta = 0.25;
  double ema_decay = 0.99;

  int64_t total_stride() const {
    int64_t p = 1;
    for (int64_t s : strides) p *= s;
    return p;
  }
  double token_rate_hz() const {
    return static_cast<double>(sample_rate) / static_cast<double>(total_stride());
  }
};

struct SpeechTokens {
  std::vector<int64_t> ids;  // in [0, codebook_size)
  double rate_hz = 40.0;
};

// Single-codebook VQ codec: strided conv encoder to 40 Hz latents, nearest-
// neighbor quantizer with EMA codebook updates, learned upsampling decoder
// back to 24 kHz.
struct SpeechCodec {
  CodecConfig cfg;
  std::vector<Conv1dLayer> enc_convs;
  std::vector<Upsample1dLayer> dec_ups;
  Param codebook;  // [codebook_size x d_latent]; EMA-updated, never optimizer-driven

  Tensor ema_cluster_size;  // [codebook_size]
  Tensor ema_embed_sum;     // [codebook_size x d_latent]
  std::vector<int64_t> usage;  // assignments since the last reseed

  SpeechCodec() = default;
  SpeechCodec(Rng& rng, const CodecConfig& c);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  // Requires 24 kHz input; shorter-than-one-frame input is zero padded.
  // Output [ceil(N/600) x d_latent].
  Var encode(Tape& t, const Waveform& wave);

  struct QuantizeResult {
    SpeechTokens tokens;
    Var quantized;    // straight-through value
    Var commit_loss;  // beta * mean ||latent - stopgrad(entry)||^2
  };
  QuantizeResult quantize(Tape& t, Var latents);

  // Nearest entry by L2, ties to the lowest id (no autodiff involvement).
  std::vector<int64_t> nearest_ids(const Tensor& latents) const;

  Var decode_latents(Tape& t, Var latents);  // [M x d_latent] -> [M*600 x 1]
  Waveform decode(const SpeechTokens& tokens);
  SpeechTokens encode_to_tokens(const Waveform& wave);

  struct TrainStats {
    double recon_loss = 0.0;
    double commit_loss = 0.0;
  };
  // One optimizer step over a batch; codebook entries move by EMA only.
  TrainStats train_step(const std::vector<Waveform>& batch, SgdMomentum& opt,
                        const std::vector<Param*>& params);

  // Entries unused since the last reseed are reassigned to random rows of
  // `latent_pool`; clears the usage window.
  void reseed_dead_entries(const Tensor& latent_pool, Rng& rng);

  // Token streams as line-delimited decimal ids.
  static void write_token_file(const std::string& path, const SpeechTokens& tokens);
  static SpeechTokens read_token_file(const std::string& path);
};

}  // namespace omni
