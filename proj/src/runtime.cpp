#include "omni/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <chrono>
#include <exception>
#include <fstream>
#include <thread>

#include "omni/errors.hpp"
#include "omni/speech_decoder.hpp"

namespace omni {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct EncodedTurn {
  size_t index = 0;
  std::optional<Tensor> vis;
  std::optional<Tensor> aud;
  std::vector<int64_t> text_ids;
  int64_t max_new = 16;
  Clock::time_point start;
  double vision_ms = 0.0;
  double audio_ms = 0.0;
};

struct DecodedTurn {
  size_t index = 0;
  std::vector<int64_t> reply_ids;
  double speech_prob = 0.0;
  Clock::time_point start;
  double vision_ms = 0.0, audio_ms = 0.0, prefill_ms = 0.0, first_token_ms = 0.0, decode_ms = 0.0;
};

EncodedTurn encode_stage(OmniModel& model, const TurnInput& turn, size_t index) {
  EncodedTurn out;
  out.index = index;
  out.max_new = turn.max_new;
  out.start = Clock::now();
  if (turn.image.has_value()) {
    const auto t0 = Clock::now();
    Tape t;
    out.vis = model.vision_adapter.forward(t, model.vision_encoder.encode_image(t, *turn.image))
                  ->value;
    out.vision_ms = ms_since(t0);
  }
  if (turn.audio.has_value()) {
    const auto t0 = Clock::now();
    Waveform w = *turn.audio;
    if (w.sample_rate != 16000) w = resample(w, 16000);
    Tape t;
    Var feats = model.speech_encoder.encode(t, compute_mel(w));
    out.aud = model.speech_adapter.forward(t, feats)->value;
    out.audio_ms = ms_since(t0);
  }
  out.text_ids = model.llm.vocab.encode(turn.text);
  if (!out.vis.has_value() && !out.aud.has_value() && out.text_ids.empty())
    throw DataError("turn " + std::to_string(index) + ": no image, audio, or text");
  return out;
}

DecodedTurn llm_stage(OmniModel& model, const EncodedTurn& enc) {
  DecodedTurn out;
  out.index = enc.index;
  out.start = enc.start;
  out.vision_ms = enc.vision_ms;
  out.audio_ms = enc.audio_ms;
  const auto llm_begin = Clock::now();
  for (int64_t step = 0; step < enc.max_new; ++step) {
    Tape t;
    AssembleInput in;
    if (enc.vis.has_value()) in.visual = t.constant(*enc.vis);
    if (enc.aud.has_value()) {
      in.audio = t.constant(*enc.aud);
      in.use_special = true;
      in.query_is_audio = enc.text_ids.empty();
    }
    in.text_ids = enc.text_ids;
    in.text_ids.insert(in.text_ids.end(), out.reply_ids.begin(), out.reply_ids.end());
    AssembledSequence seq = model.llm.assemble(t, in);
    auto fwd = model.llm.lm_forward(t, seq);
    if (step == 0) {
      out.prefill_ms = ms_since(llm_begin);
      if (seq.query_begin >= 0)
        out.speech_prob = model.llm.modality_classify(t, fwd.hidden, seq)->value.data[0];
    }
    const Tensor& logits = fwd.logits->value;
    const int64_t last = logits.shape[0] - 1;
    int64_t next = 0;
    for (int64_t v = 1; v < logits.shape[1]; ++v)
      if (logits.at(last, v) > logits.at(last, next)) next = v;
    if (step == 0) out.first_token_ms = ms_since(enc.start);
    if (next == Vocab::eos) break;
    out.reply_ids.push_back(next);
  }
  out.decode_ms = ms_since(llm_begin) - out.prefill_ms;
  return out;
}

TurnOutput speech_stage(OmniModel& model, const DecodedTurn& dec) {
  TurnOutput out;
  out.reply_ids = dec.reply_ids;
  out.reply_text = model.llm.vocab.decode(dec.reply_ids);
  out.speech_prob = dec.speech_prob;
  out.latency.vision_encode_ms = dec.vision_ms;
  out.latency.audio_encode_ms = dec.audio_ms;
  out.latency.prefill_ms = dec.prefill_ms;
  out.latency.first_token_ms = dec.first_token_ms;
  out.latency.decode_ms = dec.decode_ms;
  out.latency.tokens_generated = static_cast<int64_t>(dec.reply_ids.size());
  if (dec.speech_prob > 0.5 && !dec.reply_ids.empty()) {
    const auto t0 = Clock::now();
    Tape t;
    Tensor emb = model.llm.embed_text(t, dec.reply_ids)->value;
    out.speech = model.generator.synthesize(emb, model.codec);
    out.latency.synth_ms = ms_since(t0);
  }
  out.latency.total_ms = ms_since(dec.start);
  return out;
}

}  // namespace

std::vector<TurnOutput> run_turns(OmniModel& model, const std::vector<TurnInput>& turns,
                                  RunMode mode) {
  std::vector<TurnOutput> outputs(turns.size());
  if (mode == RunMode::Sequential) {
    for (size_t i = 0; i < turns.size(); ++i)
      outputs[i] = speech_stage(model, llm_stage(model, encode_stage(model, turns[i], i)));
    return outputs;
  }

  BoundedQueue<EncodedTurn> encoded;
  BoundedQueue<DecodedTurn> decoded;
  std::exception_ptr err;
  std::mutex err_mu;
  auto record_err = [&] {
    std::lock_guard<std::mutex> lock(err_mu);
    if (!err) err = std::current_exception();
  };

  std::thread encoder([&] {
    try {
      for (size_t i = 0; i < turns.size(); ++i) encoded.push(encode_stage(model, turns[i], i));
    } catch (...) {
      record_err();
    }
    encoded.close();
  });
  std::thread decoder([&] {
    try {
      while (auto enc = encoded.pop()) decoded.push(llm_stage(model, *enc));
    } catch (...) {
      record_err();
    }
    decoded.close();
  });
  std::thread synth([&] {
    try {
      while (auto dec = decoded.pop()) outputs[dec->index] = speech_stage(model, *dec);
    } catch (...) {
      record_err();
    }
  });
  encoder.join();
  decoder.join();
  synth.join();
  if (err) std::rethrow_exception(err);
  return outputs;
}

TurnOutput run_turn(OmniModel& model, const TurnInput& turn) {
  return run_turns(model, {turn}, RunMode::Sequential)[0];
}

BenchResult bench_latency(OmniModel& model, const std::vector<TurnInput>& turns, int64_t reps,
                          RunMode mode, const std::string& report_path) {
  if (reps < 3) throw ConfigError("bench: reps must be at least 3, got " + std::to_string(reps));
  if (turns.empty()) throw DataError("bench: empty turn list");
  run_turns(model, turns, mode);  // warm-up, excluded from statistics

  BenchResult result;
  result.reps = reps;
  std::ofstream os(report_path, std::ios::trunc);
  if (!os) throw DataError("bench: cannot open report file: " + report_path);
  for (int64_t rep = 0; rep < reps; ++rep) {
    const auto t0 = Clock::now();
    run_turns(model, turns, mode);
    const double ms = ms_since(t0);
    result.per_rep_ms.push_back(ms);
    os << "{\"rep\":" << rep << ",\"total_ms\":" << ms << "}\n";
  }
  std::vector<double> sorted = result.per_rep_ms;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  result.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  result.p95_ms = sorted[static_cast<size_t>(std::max<int64_t>(
      0, static_cast<int64_t>(std::ceil(0.95 * static_cast<double>(n))) - 1))];
  os << "{\"reps\":" << reps << ",\"median_ms\":" << result.median_ms
     << ",\"p95_ms\":" << result.p95_ms << "}\n";
  return result;
}

}  // namespace omni
