#include "omni/speech_decoder.hpp"

#include <cmath>

#include "omni/errors.hpp"

namespace omni {

int64_t LengthRegulator::target_frames(int64_t text_len) const {
  if (text_len < 1) throw DataError("length regulator: empty text");
  return std::max<int64_t>(1, std::llround(ratio * static_cast<double>(text_len)));
}

std::vector<int64_t> LengthRegulator::repeat_indices(int64_t text_len, int64_t out_len) {
  std::vector<int64_t> idx(static_cast<size_t>(out_len));
  for (int64_t s = 0; s < out_len; ++s) idx[static_cast<size_t>(s)] = s * text_len / out_len;
  return idx;
}

NarDecoder::NarDecoder(Rng& rng, const GeneratorConfig& c) : cfg(c) {
  proj = Linear(rng, c.d_llm, c.hidden);
  pos = PositionalEmbedding(rng, c.max_frames, c.hidden);
  for (int64_t i = 0; i < c.n_nar_blocks; ++i) blocks.emplace_back(rng, c.hidden, c.n_heads);
  final_ln = LayerNormLayer(c.hidden);
  head = Linear(rng, c.hidden, c.logits_dim());
}

void NarDecoder::register_params(ParamRegistry& reg, const std::string& prefix) {
  proj.register_params(reg, prefix + ".proj");
  pos.register_params(reg, prefix + ".pos");
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".block" + std::to_string(i));
  final_ln.register_params(reg, prefix + ".final_ln");
  head.register_params(reg, prefix + ".head");
}

NarDecoder::Out NarDecoder::forward(Tape& t, Var text_emb, int64_t out_len) {
  const int64_t text_len = text_emb->value.shape[0];
  if (text_emb->value.shape[1] != cfg.d_llm)
    throw ShapeError("nar decoder: text embedding " + text_emb->value.shape_string());
  if (out_len > cfg.max_frames)
    throw ConfigError("nar decoder: " + std::to_string(out_len) + " frames exceeds cap " +
                      std::to_string(cfg.max_frames));
  Var x = proj.forward(t, text_emb);
  x = ops::gather_rows(t, x, LengthRegulator::repeat_indices(text_len, out_len));
  x = ops::add(t, x, pos.forward(t, out_len));
  for (auto& b : blocks) x = b.forward(t, x, /*causal=*/false);
  Out out;
  out.features = final_ln.forward(t, x);
  out.logits = head.forward(t, out.features);
  return out;
}

ArDecoder::ArDecoder(Rng& rng, const GeneratorConfig& c) : cfg(c) {
  tok = Embedding(rng, c.logits_dim(), c.hidden);
  pos = PositionalEmbedding(rng, 2 * c.max_frames + 1, c.hidden);
  for (int64_t i = 0; i < c.n_ar_blocks; ++i) blocks.emplace_back(rng, c.hidden, c.n_heads);
  final_ln = LayerNormLayer(c.hidden);
  head = Linear(rng, c.hidden, c.logits_dim());
}

void ArDecoder::register_params(ParamRegistry& reg, const std::string& prefix) {
  tok.register_params(reg, prefix + ".tok");
  pos.register_params(reg, prefix + ".pos");
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".block" + std::to_string(i));
  final_ln.register_params(reg, prefix + ".final_ln");
  head.register_params(reg, prefix + ".head");
}

Var ArDecoder::forward(Tape& t, Var prefix_features, const std::vector<int64_t>& tokens) {
  for (int64_t id : tokens) {
    if (id < 0 || id >= cfg.logits_dim())
      throw DataError("ar decoder: token id " + std::to_string(id) + " out of range");
  }
  Var x = prefix_features;
  if (!tokens.empty()) x = ops::concat_rows(t, {x, tok.forward(t, tokens)});
  x = ops::add(t, x, pos.forward(t, x->value.shape[0]));
  for (auto& b : blocks) x = b.forward(t, x, /*causal=*/true);
  return head.forward(t, final_ln.forward(t, x));
}

std::vector<int64_t> ArDecoder::generate(Tape& t, Var prefix_features, int64_t max_new) {
  std::vector<int64_t> out;
  for (int64_t step = 0; step < max_new; ++step) {
    Var logits = forward(t, prefix_features, out);
    const Tensor& lg = logits->value;
    const int64_t last = lg.shape[0] - 1;
    int64_t next = 0;
    for (int64_t v = 1; v < lg.shape[1]; ++v)
      if (lg.at(last, v) > lg.at(last, next)) next = v;
    if (next == cfg.eos_id()) break;
    out.push_back(next);
  }
  return out;
}

SpeechGenerator::SpeechGenerator(Rng& rng, const GeneratorConfig& c)
    : cfg(c), nar(rng, c), ar(rng, c) {
  regulator.ratio = c.length_ratio;
}

void SpeechGenerator::register_params(ParamRegistry& reg, const std::string& nar_prefix,
                                      const std::string& ar_prefix) {
  nar.register_params(reg, nar_prefix);
  ar.register_params(reg, ar_prefix);
}

namespace {

std::vector<int64_t> pad_or_truncate(const std::vector<int64_t>& codes, int64_t len, int64_t eos) {
  std::vector<int64_t> out(static_cast<size_t>(len), eos);
  for (int64_t i = 0; i < len && i < static_cast<int64_t>(codes.size()); ++i)
    out[static_cast<size_t>(i)] = codes[static_cast<size_t>(i)];
  return out;
}

}  // namespace

Var SpeechGenerator::nar_loss(Tape& t, Var text_emb, const std::vector<int64_t>& codes) {
  const int64_t s = regulator.target_frames(text_emb->value.shape[0]);
  NarDecoder::Out out = nar.forward(t, text_emb, s);
  return ops::softmax_cross_entropy(t, out.logits, pad_or_truncate(codes, s, cfg.eos_id()));
}

Var SpeechGenerator::ar_loss(Tape& t, Var text_emb, const std::vector<int64_t>& codes) {
  if (codes.empty()) throw DataError("ar loss: empty code sequence");
  const int64_t s = regulator.target_frames(text_emb->value.shape[0]);
  NarDecoder::Out out = nar.forward(t, text_emb, s);
  Var logits = ar.forward(t, out.features, codes);
  std::vector<int64_t> positions;
  std::vector<int64_t> targets = codes;
  targets.push_back(cfg.eos_id());
  for (size_t i = 0; i < targets.size(); ++i)
    positions.push_back(s - 1 + static_cast<int64_t>(i));
  return ops::softmax_cross_entropy(t, ops::gather_rows(t, logits, positions), targets);
}

std::vector<int64_t> SpeechGenerator::synthesize_tokens(const Tensor& text_emb) {
  Tape t;
  Var emb = t.constant(text_emb);
  const int64_t s = regulator.target_frames(text_emb.shape[0]);
  NarDecoder::Out out = nar.forward(t, emb, s);
  return ar.generate(t, out.features, cfg.max_frames);
}

Waveform SpeechGenerator::synthesize(const Tensor& text_emb, SpeechCodec& codec) {
  std::vector<int64_t> ids = synthesize_tokens(text_emb);
  if (ids.empty()) throw NumericError("synthesize: decoder produced no speech tokens");
  SpeechTokens toks;
  toks.ids = std::move(ids);
  toks.rate_hz = codec.cfg.token_rate_hz();
  return codec.decode(toks);
}

}  // namespace omni
