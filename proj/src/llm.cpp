#include "omni/llm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "omni/errors.hpp"

namespace omni {

std::vector<int64_t> Vocab::encode(const std::string& text) const {
  std::vector<int64_t> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) {
    const int64_t id = first_byte + static_cast<int64_t>(c);
    if (id >= size) throw DataError("vocab: byte " + std::to_string(c) + " out of vocabulary");
    ids.push_back(id);
  }
  return ids;
}

std::string Vocab::decode(const std::vector<int64_t>& ids) const {
  std::string out;
  for (int64_t id : ids) {
    if (id >= first_byte && id < first_byte + 256) out.push_back(static_cast<char>(id - first_byte));
  }
  return out;
}

std::string Vocab::token_string(int64_t id) const {
  switch (id) {
    case pad: return "<pad>";
    case bos: return "<bos>";
    case eos: return "<eos>";
    case img_open: return "<img>";
    case img_close: return "</img>";
    case aud_open: return "<aud>";
    case aud_close: return "</aud>";
    default: break;
  }
  if (id < first_byte) return "<reserved" + std::to_string(id) + ">";
  const int64_t b = id - first_byte;
  if (b >= 0x21 && b <= 0x7e) return std::string(1, static_cast<char>(b));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "\\x%02x", static_cast<unsigned>(b));
  return buf;
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("vocab: cannot open for writing: " + path);
  for (int64_t id = 0; id < size; ++id) os << id << "\t" << token_string(id) << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("vocab: cannot open " + path);
  int64_t count = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) ++count;
  }
  Vocab v;
  v.size = count;
  return v;
}

OmniLlm::OmniLlm(Rng& rng, const LlmConfig& c) : cfg(c) {
  vocab.size = c.vocab_size;
  tok = Embedding(rng, c.vocab_size, c.d_llm);
  pos = PositionalEmbedding(rng, c.context, c.d_llm);
  blocks.reserve(static_cast<size_t>(c.n_blocks));
  for (int64_t i = 0; i < c.n_blocks; ++i) blocks.emplace_back(rng, c.d_llm, c.n_heads);
  final_ln = LayerNormLayer(c.d_llm);
  special_tokens = Param(uniform_init(rng, {c.k_special, c.d_llm}, c.d_llm));
  modality_head = Linear(rng, c.d_llm, 2);
}

void OmniLlm::register_params(ParamRegistry& reg, const std::string& prefix) {
  tok.register_params(reg, prefix + ".tok");
  pos.register_params(reg, prefix + ".pos");
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".block" + std::to_string(i));
  final_ln.register_params(reg, prefix + ".final_ln");
}

void OmniLlm::register_modality_head(ParamRegistry& reg, const std::string& prefix) {
  modality_head.register_params(reg, prefix);
}

void OmniLlm::register_special_tokens(ParamRegistry& reg, const std::string& prefix) {
  reg.add(special_tokens, prefix + ".embeddings");
}

AssembledSequence OmniLlm::assemble(Tape& t, const AssembleInput& input) {
  const bool any = input.visual.has_value() || input.audio.has_value() || !input.text_ids.empty();
  if (!any) throw DataError("assemble: all segments empty");

  AssembledSequence seq;
  std::vector<Var> parts;
  auto push_tokens = [&](const std::vector<int64_t>& ids, Segment tag) {
    parts.push_back(tok.forward(t, ids));
    for (int64_t id : ids) {
      seq.tags.push_back(tag);
      seq.token_ids.push_back(id);
      seq.loss_mask.push_back(false);
    }
  };

  push_tokens({Vocab::bos}, Segment::Marker);
  if (input.use_special) {
    parts.push_back(t.leaf(special_tokens));
    for (int64_t i = 0; i < cfg.k_special; ++i) {
      seq.tags.push_back(Segment::Special);
      seq.token_ids.push_back(-1);
      seq.loss_mask.push_back(false);
    }
  }
  if (input.visual.has_value()) {
    push_tokens({Vocab::img_open}, Segment::Marker);
    parts.push_back(*input.visual);
    for (int64_t i = 0; i < (*input.visual)->value.shape[0]; ++i) {
      seq.tags.push_back(Segment::Vision);
      seq.token_ids.push_back(-1);
      seq.loss_mask.push_back(false);
    }
    push_tokens({Vocab::img_close}, Segment::Marker);
  }
  int64_t audio_begin = -1, audio_end = -1;
  if (input.audio.has_value()) {
    push_tokens({Vocab::aud_open}, Segment::Marker);
    audio_begin = static_cast<int64_t>(seq.tags.size());
    parts.push_back(*input.audio);
    for (int64_t i = 0; i < (*input.audio)->value.shape[0]; ++i) {
      seq.tags.push_back(Segment::Audio);
      seq.token_ids.push_back(-1);
      seq.loss_mask.push_back(false);
    }
    audio_end = static_cast<int64_t>(seq.tags.size());
    push_tokens({Vocab::aud_close}, Segment::Marker);
  }
  const int64_t text_begin = static_cast<int64_t>(seq.tags.size());
  if (!input.text_ids.empty()) push_tokens(input.text_ids, Segment::Text);

  if (input.answer_begin >= 0) {
    if (input.answer_begin > static_cast<int64_t>(input.text_ids.size())) {
      throw DataError("assemble: answer_begin beyond text length");
    }
    for (int64_t i = input.answer_begin; i < static_cast<int64_t>(input.text_ids.size()); ++i)
      seq.loss_mask[static_cast<size_t>(text_begin + i)] = true;
  }

  if (input.query_is_audio) {
    seq.query_begin = audio_begin;
    seq.query_end = audio_end;
  } else if (!input.text_ids.empty()) {
    seq.query_begin = text_begin;
    seq.query_end = input.answer_begin >= 0 ? text_begin + input.answer_begin
                                            : text_begin + static_cast<int64_t>(input.text_ids.size());
  }

  seq.embeddings = parts.size() == 1 ? parts[0] : ops::concat_rows(t, parts);
  if (seq.length() > cfg.context) {
    throw ConfigError("assemble: sequence length " + std::to_string(seq.length()) +
                      " exceeds context " + std::to_string(cfg.context));
  }
  return seq;
}

OmniLlm::ForwardResult OmniLlm::lm_forward(Tape& t, const AssembledSequence& seq) {
  const int64_t len = seq.length();
  if (len < 1) throw DataError("lm_forward: empty sequence");
  Var x = ops::add(t, seq.embeddings, pos.forward(t, len));
  for (auto& b : blocks) x = b.forward(t, x, /*causal=*/true);
  Var hidden = final_ln.forward(t, x);
  Var logits = ops::matmul(t, hidden, ops::transpose(t, t.leaf(tok.table)));
  return {hidden, logits};
}

Var OmniLlm::modality_classify(Tape& t, Var hidden, const AssembledSequence& seq) {
  if (seq.query_begin < 0 || seq.query_end <= seq.query_begin) {
    throw DataError("modality_classify: sequence has no query segment");
  }
  Var pooled = ops::mean_rows(
      t, ops::slice_rows(t, hidden, seq.query_begin, seq.query_end - seq.query_begin));
  return ops::softmax_rows(t, modality_head.forward(t, pooled));
}

Var OmniLlm::lm_loss(Tape& t, const AssembledSequence& seq, const ForwardResult& fwd) {
  std::vector<int64_t> positions;
  std::vector<int64_t> targets;
  for (int64_t i = 0; i + 1 < seq.length(); ++i) {
    if (seq.loss_mask[static_cast<size_t>(i + 1)]) {
      positions.push_back(i);
      targets.push_back(seq.token_ids[static_cast<size_t>(i + 1)]);
    }
  }
  if (positions.empty()) throw DataError("lm_loss: no supervised positions");
  Var rows = ops::gather_rows(t, fwd.logits, positions);
  return ops::softmax_cross_entropy(t, rows, targets);
}

std::vector<int64_t> OmniLlm::generate(Tape& t, const AssembleInput& input, int64_t max_new,
                                       DecodeMode mode, double temperature, uint64_t seed) {
  if (max_new < 1) throw DataError("generate: max_new must be at least 1");
  AssembledSequence seq = assemble(t, input);
  std::vector<int64_t> out;
  Rng rng(seed);
  Var base = seq.embeddings;
  for (int64_t step = 0; step < max_new; ++step) {
    AssembledSequence cur = seq;
    if (!out.empty()) {
      cur.embeddings = ops::concat_rows(t, {base, tok.forward(t, out)});
      for (int64_t id : out) {
        cur.tags.push_back(Segment::Text);
        cur.token_ids.push_back(id);
        cur.loss_mask.push_back(false);
      }
    }
    if (cur.length() > cfg.context) {
      throw ConfigError("generate: context overflow at length " + std::to_string(cur.length()));
    }
    ForwardResult fwd = lm_forward(t, cur);
    const Tensor& logits = fwd.logits->value;
    const int64_t last = logits.shape[0] - 1;
    int64_t next;
    if (mode == DecodeMode::Greedy) {
      next = 0;
      for (int64_t v = 1; v < logits.shape[1]; ++v)
        if (logits.at(last, v) > logits.at(last, next)) next = v;
    } else {
      double mx = logits.at(last, 0);
      for (int64_t v = 1; v < logits.shape[1]; ++v) mx = std::max(mx, logits.at(last, v));
      double z = 0;
      std::vector<double> p(static_cast<size_t>(logits.shape[1]));
      for (int64_t v = 0; v < logits.shape[1]; ++v) {
        p[static_cast<size_t>(v)] = std::exp((logits.at(last, v) - mx) / temperature);
        z += p[static_cast<size_t>(v)];
      }
      double r = rng.uniform01() * z, acc = 0;
      next = logits.shape[1] - 1;
      for (int64_t v = 0; v < logits.shape[1]; ++v) {
        acc += p[static_cast<size_t>(v)];
        if (r < acc) {
          next = v;
          break;
        }
      }
    }
    out.push_back(next);
    if (next == Vocab::eos) break;
  }
  return out;
}

}  // namespace omni
