#include "omni/codec.hpp"

#include <cmath>
#include <fstream>

#include "omni/errors.hpp"

namespace omni {

namespace {

Tensor wave_to_column(const Waveform& wave, int64_t padded_len) {
  Tensor x = Tensor::zeros({padded_len, 1});
  const int64_t n = static_cast<int64_t>(wave.samples.size());
  for (int64_t i = 0; i < n && i < padded_len; ++i) x.data[static_cast<size_t>(i)] = wave.samples[static_cast<size_t>(i)];
  return x;
}

}  // namespace

SpeechCodec::SpeechCodec(Rng& rng, const CodecConfig& c) : cfg(c) {
  if (cfg.strides.empty()) throw ConfigError("codec: empty stride list");
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) plus GELU (which halves small
  // signals) shrinks the signal std by ~2x per layer; across a 5-layer stack
  // the latents collapse to near-constant and every frame quantizes to one
  // codebook entry. A gain of 2 makes each conv+GELU stage roughly
  // variance-preserving at init so the codebook sees separable latents.
  const double gain = 2.0;
  int64_t cin = 1;
  for (size_t i = 0; i < cfg.strides.size(); ++i) {
    const int64_t s = cfg.strides[i];
    const int64_t cout = i + 1 == cfg.strides.size() ? cfg.d_latent : cfg.channels;
    enc_convs.emplace_back(rng, cin, cout, 2 * s, s);
    for (double& w : enc_convs.back().weight.value.data) w *= gain;
    cin = cout;
  }
  cin = cfg.d_latent;
  for (size_t i = 0; i < cfg.strides.size(); ++i) {
    const int64_t s = cfg.strides[cfg.strides.size() - 1 - i];
    const int64_t cout = i + 1 == cfg.strides.size() ? 1 : cfg.channels;
    dec_ups.emplace_back(rng, cin, cout, s);
    for (double& w : dec_ups.back().weight.value.data) w *= gain;
    cin = cout;
  }
  codebook = Param(uniform_init(rng, {cfg.codebook_size, cfg.d_latent}, cfg.d_latent));
  codebook.trainable = false;
  ema_cluster_size = Tensor::full({cfg.codebook_size}, 1.0);
  ema_embed_sum = codebook.value;
  usage.assign(static_cast<size_t>(cfg.codebook_size), 0);
}

void SpeechCodec::register_params(ParamRegistry& reg, const std::string& prefix) {
  for (size_t i = 0; i < enc_convs.size(); ++i)
    enc_convs[i].register_params(reg, prefix + ".enc" + std::to_string(i));
  for (size_t i = 0; i < dec_ups.size(); ++i)
    dec_ups[i].register_params(reg, prefix + ".dec" + std::to_string(i));
  reg.add(codebook, prefix + ".codebook");
}

Var SpeechCodec::encode(Tape& t, const Waveform& wave) {
  if (wave.sample_rate != cfg.sample_rate) {
    throw DataError("codec: expected " + std::to_string(cfg.sample_rate) + " Hz input, got " +
                    std::to_string(wave.sample_rate) + " Hz; resample first");
  }
  if (wave.samples.empty()) throw DataError("codec: empty waveform");
  Var x = t.constant(wave_to_column(wave, static_cast<int64_t>(wave.samples.size())));
  for (size_t i = 0; i < enc_convs.size(); ++i) {
    x = enc_convs[i].forward(t, x);
    if (i + 1 < enc_convs.size()) x = ops::gelu(t, x);
  }
  return x;
}

std::vector<int64_t> SpeechCodec::nearest_ids(const Tensor& latents) const {
  const int64_t m = latents.shape[0], d = latents.shape[1];
  if (d != cfg.d_latent) throw ShapeError("codec: latent width " + latents.shape_string());
  std::vector<int64_t> ids(static_cast<size_t>(m));
  for (int64_t r = 0; r < m; ++r) {
    int64_t best = 0;
    double best_d2 = 0;
    for (int64_t e = 0; e < cfg.codebook_size; ++e) {
      double d2 = 0;
      for (int64_t c = 0; c < d; ++c) {
        const double diff = latents.at(r, c) - codebook.value.at(e, c);
        d2 += diff * diff;
      }
      if (e == 0 || d2 < best_d2) {  // strict <: ties keep the lowest id
        best = e;
        best_d2 = d2;
      }
    }
    ids[static_cast<size_t>(r)] = best;
  }
  return ids;
}

SpeechCodec::QuantizeResult SpeechCodec::quantize(Tape& t, Var latents) {
  QuantizeResult res;
  res.tokens.ids = nearest_ids(latents->value);
  res.tokens.rate_hz = cfg.token_rate_hz();
  const int64_t m = latents->value.shape[0];
  Tensor q({m, cfg.d_latent});
  for (int64_t r = 0; r < m; ++r)
    for (int64_t c = 0; c < cfg.d_latent; ++c)
      q.at(r, c) = codebook.value.at(res.tokens.ids[static_cast<size_t>(r)], c);
  res.quantized = ops::straight_through(t, latents, q);
  res.commit_loss = ops::scale(t, ops::mse(t, latents, t.constant(q)), cfg.commit_beta);
  return res;
}

Var SpeechCodec::decode_latents(Tape& t, Var latents) {
  Var x = latents;
  for (size_t i = 0; i < dec_ups.size(); ++i) {
    x = dec_ups[i].forward(t, x);
    if (i + 1 < dec_ups.size()) x = ops::gelu(t, x);
  }
  return ops::tanh_op(t, x);
}

Waveform SpeechCodec::decode(const SpeechTokens& tokens) {
  if (tokens.ids.empty()) throw DataError("codec: empty token stream");
  Tape t;
  Tensor q({static_cast<int64_t>(tokens.ids.size()), cfg.d_latent});
  for (size_t r = 0; r < tokens.ids.size(); ++r) {
    const int64_t id = tokens.ids[r];
    if (id < 0 || id >= cfg.codebook_size)
      throw DataError("codec: token id " + std::to_string(id) + " out of range");
    for (int64_t c = 0; c < cfg.d_latent; ++c)
      q.at(static_cast<int64_t>(r), c) = codebook.value.at(id, c);
  }
  Var out = decode_latents(t, t.constant(q));
  Waveform wave;
  wave.sample_rate = cfg.sample_rate;
  wave.samples = out->value.data;
  return wave;
}

SpeechTokens SpeechCodec::encode_to_tokens(const Waveform& wave) {
  Tape t;
  SpeechTokens tokens;
  tokens.ids = nearest_ids(encode(t, wave)->value);
  tokens.rate_hz = cfg.token_rate_hz();
  return tokens;
}

SpeechCodec::TrainStats SpeechCodec::train_step(const std::vector<Waveform>& batch,
                                                SgdMomentum& opt,
                                                const std::vector<Param*>& params) {
  if (batch.empty()) throw DataError("codec: empty training batch");
  SgdMomentum::zero_grads(params);
  TrainStats stats;
  Tape t;
  std::vector<Var> losses;
  std::vector<double> counts(static_cast<size_t>(cfg.codebook_size), 0.0);
  Tensor sums = Tensor::zeros({cfg.codebook_size, cfg.d_latent});
  for (const Waveform& wave : batch) {
    Var latents = encode(t, wave);
    QuantizeResult q = quantize(t, latents);
    for (int64_t r = 0; r < latents->value.shape[0]; ++r) {
      const int64_t id = q.tokens.ids[static_cast<size_t>(r)];
      counts[static_cast<size_t>(id)] += 1.0;
      ++usage[static_cast<size_t>(id)];
      for (int64_t c = 0; c < cfg.d_latent; ++c) sums.at(id, c) += latents->value.at(r, c);
    }
    Var recon = decode_latents(t, q.quantized);
    Var target = t.constant(wave_to_column(wave, recon->value.shape[0]));
    // normalize reconstruction per codec frame (600 samples each) so its
    // gradient scale matches the per-frame commitment term
    Var recon_loss =
        ops::scale(t, ops::mse(t, recon, target), static_cast<double>(cfg.total_stride()));
    stats.recon_loss += recon_loss->value.data[0];
    stats.commit_loss += q.commit_loss->value.data[0];
    losses.push_back(ops::add(t, recon_loss, q.commit_loss));
  }
  Var total = losses[0];
  for (size_t i = 1; i < losses.size(); ++i) total = ops::add(t, total, losses[i]);
  total = ops::scale(t, total, 1.0 / static_cast<double>(batch.size()));
  t.backward(total);
  clip_grad_norm(params, 1.0);
  opt.step(params);

  const double decay = cfg.ema_decay;
  for (int64_t e = 0; e < cfg.codebook_size; ++e) {
    double& n = ema_cluster_size.data[static_cast<size_t>(e)];
    n = decay * n + (1.0 - decay) * counts[static_cast<size_t>(e)];
    for (int64_t c = 0; c < cfg.d_latent; ++c) {
      double& m = ema_embed_sum.at(e, c);
      m = decay * m + (1.0 - decay) * sums.at(e, c);
      codebook.value.at(e, c) = m / (n + 1e-8);
    }
  }
  stats.recon_loss /= static_cast<double>(batch.size());
  stats.commit_loss /= static_cast<double>(batch.size());
  return stats;
}

void SpeechCodec::reseed_dead_entries(const Tensor& latent_pool, Rng& rng) {
  if (latent_pool.shape.empty() || latent_pool.shape[0] == 0)
    throw DataError("codec: empty latent pool for reseeding");
  for (int64_t e = 0; e < cfg.codebook_size; ++e) {
    if (usage[static_cast<size_t>(e)] > 0) continue;
    const int64_t r = static_cast<int64_t>(rng.below(static_cast<uint64_t>(latent_pool.shape[0])));
    for (int64_t c = 0; c < cfg.d_latent; ++c) {
      codebook.value.at(e, c) = latent_pool.at(r, c);
      ema_embed_sum.at(e, c) = latent_pool.at(r, c);
    }
    ema_cluster_size.data[static_cast<size_t>(e)] = 1.0;
  }
  usage.assign(static_cast<size_t>(cfg.codebook_size), 0);
}

void SpeechCodec::write_token_file(const std::string& path, const SpeechTokens& tokens) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("codec: cannot open for writing: " + path);
  for (int64_t id : tokens.ids) os << id << "\n";
}

SpeechTokens SpeechCodec::read_token_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("codec: cannot open " + path);
  SpeechTokens tokens;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t pos = 0;
    int64_t id = 0;
    try {
      id = std::stoll(line, &pos);
    } catch (const std::exception&) {
      throw DataError("codec: bad token at line " + std::to_string(lineno) + ": " + line);
    }
    if (pos != line.size())
      throw DataError("codec: bad token at line " + std::to_string(lineno) + ": " + line);
    tokens.ids.push_back(id);
  }
  return tokens;
}

}  // namespace omni
