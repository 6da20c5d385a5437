#include "omni/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "omni/ctc.hpp"
#include "omni/errors.hpp"
#include "omni/optim.hpp"

namespace fs = std::filesystem;

namespace omni {

const std::vector<StageSpec>& build_stage_plan() {
  static const std::vector<StageSpec> plan = {
      {"1.1", {{"caption", 0.20}}, {"vision_adapter"}, "lm", false, 200, 0.05},
      {"1.2", {{"caption", 1.0}}, {"vision_encoder", "vision_adapter", "llm"}, "lm", false, 500,
       0.02},
      {"1.3",
       {{"caption", 0.20}, {"qa", 1.0}},
       {"vision_encoder", "vision_adapter", "llm"},
       "lm", false, 300, 0.02},
      {"2.1a", {{"asr", 1.0}}, {"speech_encoder"}, "ctc", false, 4000, 0.05},
      {"2.1b", {{"asr", 1.0}}, {"speech_adapter", "special_prompt_tokens"}, "lm", false, 600,
       0.05},
      {"2.2",
       {{"caption", 0.04}, {"qa", 0.20}},
       {"vision_encoder", "vision_adapter", "speech_encoder", "speech_adapter", "llm",
        "modality_head"},
       "lm", true, 400, 0.01},
      {"3.1", {{"tts", 1.0}}, {"codec"}, "codec", false, 500, 0.02},
      {"3.2", {{"tts", 1.0}}, {"nar_decoder", "ar_decoder"}, "tts", false, 3000, 0.05},
  };
  return plan;
}

const StageSpec& find_stage(const std::string& id) {
  for (const StageSpec& s : build_stage_plan())
    if (s.id == id) return s;
  std::string valid;
  for (const StageSpec& s : build_stage_plan()) valid += (valid.empty() ? "" : ", ") + s.id;
  throw ConfigError("unknown stage '" + id + "'; valid stages: " + valid);
}

std::vector<int64_t> sample_mixture(int64_t n, double fraction, uint64_t seed,
                                    const std::string& task) {
  if (fraction < 0.0 || fraction > 1.0)
    throw ConfigError("mixture fraction " + std::to_string(fraction) + " outside [0,1]");
  if (n == 0 && fraction > 0.0)
    throw DataError("mixture: task '" + task + "' has no examples but fraction " +
                    std::to_string(fraction));
  std::vector<int64_t> ids(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
  Rng rng(seed);
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = static_cast<int64_t>(rng.below(static_cast<uint64_t>(i + 1)));
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
  }
  const auto take = static_cast<int64_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
  ids.resize(static_cast<size_t>(take));
  return ids;
}

std::vector<bool> substitute_speech_questions(size_t n_records, uint64_t seed) {
  Rng rng(seed);
  std::vector<bool> out(n_records);
  for (size_t i = 0; i < n_records; ++i) out[i] = rng.bernoulli(0.5);
  return out;
}

FreezeReport verify_freeze(const ParamSnapshot& before, const ParamRegistry& reg,
                           const std::vector<std::string>& trainable_modules) {
  if (before.size() != reg.params.size())
    throw ConfigError("freeze check: snapshot has " + std::to_string(before.size()) +
                      " params, registry has " + std::to_string(reg.params.size()));
  FreezeReport report;
  for (Param* p : reg.params) {
    auto it = before.find(p->name);
    if (it == before.end())
      throw ConfigError("freeze check: param '" + p->name + "' missing from snapshot");
    const std::string module = p->name.substr(0, p->name.find('.'));
    if (std::find(trainable_modules.begin(), trainable_modules.end(), module) !=
        trainable_modules.end())
      continue;
    if (p->value.data != it->second) {
      report.ok = false;
      report.violations.push_back(p->name);
    }
  }
  return report;
}

namespace {

struct DataCaches {
  std::map<std::string, MelSpectrogram> mels;
  std::map<std::string, ImageTensor> images;
  std::map<std::string, Waveform> waves24k;
  std::map<std::string, std::vector<int64_t>> codec_tokens;
};

const MelSpectrogram& cached_mel(DataCaches& c, const std::string& path) {
  auto it = c.mels.find(path);
  if (it != c.mels.end()) return it->second;
  Waveform w = read_wav(path);
  if (w.sample_rate != 16000) w = resample(w, 16000);
  return c.mels.emplace(path, compute_mel(w)).first->second;
}

const ImageTensor& cached_image(DataCaches& c, const std::string& path) {
  auto it = c.images.find(path);
  if (it != c.images.end()) return it->second;
  return c.images.emplace(path, read_ppm(path)).first->second;
}

const Waveform& cached_wave24k(DataCaches& c, const std::string& path) {
  auto it = c.waves24k.find(path);
  if (it != c.waves24k.end()) return it->second;
  Waveform w = read_wav(path);
  if (w.sample_rate != 24000) w = resample(w, 24000);
  return c.waves24k.emplace(path, std::move(w)).first->second;
}

const std::vector<int64_t>& cached_codec_tokens(DataCaches& c, OmniModel& model,
                                                const std::string& path) {
  auto it = c.codec_tokens.find(path);
  if (it != c.codec_tokens.end()) return it->second;
  const Waveform& w = cached_wave24k(c, path);
  return c.codec_tokens.emplace(path, model.codec.encode_to_tokens(w).ids).first->second;
}

Var audio_llm_tokens(OmniModel& model, Tape& t, const MelSpectrogram& mel) {
  Var feats = model.speech_encoder.encode(t, mel);
  return model.speech_adapter.forward(t, feats);
}

struct PoolEntry {
  std::string task;
  int64_t index = 0;
};

std::vector<int64_t> encode_answer(const Vocab& vocab, const std::string& text) {
  std::vector<int64_t> ids = vocab.encode(text);
  ids.push_back(Vocab::eos);
  return ids;
}

Var lm_example_loss(OmniModel& model, Tape& t, const StageSpec& spec, const PoolEntry& entry,
                    const std::vector<CaptionRecord>& captions, const std::vector<QaRecord>& qa,
                    const std::vector<AsrRecord>& asr, const std::vector<bool>& qa_spoken,
                    DataCaches& caches) {
  const Vocab& vocab = model.llm.vocab;
  AssembleInput in;
  if (entry.task == "caption") {
    const CaptionRecord& rec = captions[static_cast<size_t>(entry.index)];
    Var vis = model.vision_encoder.encode_image(t, cached_image(caches, rec.image));
    in.visual = model.vision_adapter.forward(t, vis);
    in.text_ids = encode_answer(vocab, rec.caption);
    in.answer_begin = 0;
  } else if (entry.task == "qa") {
    const QaRecord& rec = qa[static_cast<size_t>(entry.index)];
    Var vis = model.vision_encoder.encode_image(t, cached_image(caches, rec.image));
    in.visual = model.vision_adapter.forward(t, vis);
    const bool spoken =
        spec.substitute_audio_questions && qa_spoken[static_cast<size_t>(entry.index)];
    if (spoken) {
      in.audio = audio_llm_tokens(model, t, cached_mel(caches, rec.question_wav));
      in.use_special = true;
      in.query_is_audio = true;
      in.text_ids = encode_answer(vocab, rec.answer);
      in.answer_begin = 0;
    } else {
      const std::vector<int64_t> q = vocab.encode(rec.question + ":");
      in.text_ids = q;
      const std::vector<int64_t> a = encode_answer(vocab, rec.answer);
      in.text_ids.insert(in.text_ids.end(), a.begin(), a.end());
      in.answer_begin = static_cast<int64_t>(q.size());
    }
  } else if (entry.task == "asr") {
    const AsrRecord& rec = asr[static_cast<size_t>(entry.index)];
    in.audio = audio_llm_tokens(model, t, cached_mel(caches, rec.wav));
    in.use_special = true;
    in.query_is_audio = true;
    in.text_ids = encode_answer(vocab, rec.text);
    in.answer_begin = 0;
  } else {
    throw ConfigError("stage " + spec.id + ": task '" + entry.task + "' is not an lm task");
  }

  AssembledSequence seq = model.llm.assemble(t, in);
  auto fwd = model.llm.lm_forward(t, seq);
  Var loss = model.llm.lm_loss(t, seq, fwd);
  if (entry.task == "qa" && spec.substitute_audio_questions) {
    // modality supervision: spoken questions are class 0, typed are class 1
    const bool spoken = qa_spoken[static_cast<size_t>(entry.index)];
    Var pooled = ops::mean_rows(
        t, ops::slice_rows(t, fwd.hidden, seq.query_begin, seq.query_end - seq.query_begin));
    Var logits = model.llm.modality_head.forward(t, pooled);
    Var mod_loss = ops::softmax_cross_entropy(t, logits, {spoken ? 0 : 1});
    loss = ops::add(t, loss, mod_loss);
  }
  return loss;
}

void append_metric(std::ofstream& os, int64_t step, double loss, double wall_ms) {
  os << "{\"step\":" << step << ",\"loss\":" << loss << ",\"wall_ms\":" << wall_ms << "}\n";
}

}  // namespace

StageResult run_stage(OmniModel& model, const std::string& data_dir, const std::string& out_dir,
                      const std::string& stage_id, const TrainOptions& options) {
  const StageSpec& spec = find_stage(stage_id);
  const auto& plan = build_stage_plan();
  size_t order = 0;
  while (plan[order].id != stage_id) ++order;
  fs::create_directories(out_dir);
  if (order > 0) {
    const std::string prev = (fs::path(out_dir) / ("stage_" + plan[order - 1].id + ".omni")).string();
    if (!checkpoint_exists(prev))
      throw ConfigError("stage " + stage_id + " requires the stage " + plan[order - 1].id +
                        " checkpoint at " + prev);
    load_checkpoint(prev, model.registry);
  }

  model.set_trainable(spec.trainable);
  const ParamSnapshot before = snapshot_params(model.registry);

  // gather data sources
  std::vector<CaptionRecord> captions;
  std::vector<QaRecord> qa;
  std::vector<AsrRecord> asr;
  std::vector<TtsRecord> tts;
  std::vector<PoolEntry> pool;
  for (const MixtureComponent& mc : spec.mixture) {
    int64_t n = 0;
    if (mc.task == "caption") {
      captions = load_caption_manifest((fs::path(data_dir) / "caption.jsonl").string());
      n = static_cast<int64_t>(captions.size());
    } else if (mc.task == "qa") {
      qa = load_qa_manifest((fs::path(data_dir) / "qa.jsonl").string());
      n = static_cast<int64_t>(qa.size());
    } else if (mc.task == "asr") {
      asr = load_asr_manifest((fs::path(data_dir) / "asr_train.jsonl").string());
      n = static_cast<int64_t>(asr.size());
    } else if (mc.task == "tts") {
      tts = load_tts_manifest((fs::path(data_dir) / "tts.jsonl").string());
      n = static_cast<int64_t>(tts.size());
    } else {
      throw ConfigError("stage " + stage_id + ": unknown mixture task '" + mc.task + "'");
    }
    for (int64_t idx : sample_mixture(n, mc.fraction, options.seed + Rng::hash_str(mc.task), mc.task))
      pool.push_back({mc.task, idx});
  }
  if (pool.empty()) throw DataError("stage " + stage_id + ": empty training pool");
  {
    Rng rng(options.seed + 17);
    for (size_t i = pool.size() - 1; i > 0; --i)
      std::swap(pool[i], pool[static_cast<size_t>(rng.below(i + 1))]);
  }
  const std::vector<bool> qa_spoken = substitute_speech_questions(qa.size(), options.seed + 29);

  const int64_t steps = options.steps > 0 ? options.steps : spec.default_steps;
  const double lr = options.lr > 0 ? options.lr : spec.default_lr;
  SgdMomentum opt;
  opt.lr = lr;
  std::vector<Param*> trainables = model.trainable_params();

  StageResult result;
  result.stage_id = stage_id;
  result.steps = steps;
  result.metrics_path = (fs::path(out_dir) / ("stage_" + stage_id + "_metrics.jsonl")).string();
  std::ofstream metrics(result.metrics_path, std::ios::trunc);
  if (!metrics) throw DataError("cannot open metrics file: " + result.metrics_path);

  DataCaches caches;
  for (int64_t step = 0; step < steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_val = 0.0;
    if (spec.objective == "codec") {
      std::vector<Waveform> batch;
      for (int64_t b = 0; b < options.batch_size; ++b) {
        const PoolEntry& e = pool[static_cast<size_t>((step * options.batch_size + b) %
                                                      static_cast<int64_t>(pool.size()))];
        batch.push_back(cached_wave24k(caches, tts[static_cast<size_t>(e.index)].wav));
      }
      auto stats = model.codec.train_step(batch, opt, model.registry.with_prefix("codec"));
      loss_val = stats.recon_loss + stats.commit_loss;
      if ((step + 1) % 100 == 0) {
        Tape t;
        Tensor pool_latents = model.codec.encode(t, batch[0])->value;
        Rng reseed_rng(options.seed + 1000 + static_cast<uint64_t>(step));
        model.codec.reseed_dead_entries(pool_latents, reseed_rng);
      }
    } else {
      const PoolEntry& e = pool[static_cast<size_t>(step % static_cast<int64_t>(pool.size()))];
      SgdMomentum::zero_grads(trainables);
      Tape t;
      Var loss;
      if (spec.objective == "ctc") {
        const AsrRecord& rec = asr[static_cast<size_t>(e.index)];
        Var feats = model.speech_encoder.encode(t, cached_mel(caches, rec.wav));
        Var logprobs = model.speech_encoder.ctc_logprobs(t, feats);
        loss = ctc_loss(t, logprobs, transcript_ctc_ids(rec.text));
      } else if (spec.objective == "tts") {
        const TtsRecord& rec = tts[static_cast<size_t>(e.index)];
        Var emb = model.llm.embed_text(t, model.llm.vocab.encode(rec.text));
        const std::vector<int64_t>& codes = cached_codec_tokens(caches, model, rec.wav);
        loss = ops::add(t, model.generator.nar_loss(t, emb, codes),
                        model.generator.ar_loss(t, emb, codes));
      } else {
        loss = lm_example_loss(model, t, spec, e, captions, qa, asr, qa_spoken, caches);
      }
      t.backward(loss);
      clip_grad_norm(trainables, 1.0);
      opt.step(trainables);
      loss_val = loss->value.data[0];
    }
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (step % options.log_every == 0 || step + 1 == steps)
      append_metric(metrics, step, loss_val, wall_ms);
    if (step == 0) result.first_loss = loss_val;
    result.final_loss = loss_val;
  }

  result.checkpoint_path = (fs::path(out_dir) / ("stage_" + stage_id + ".omni")).string();
  save_checkpoint(result.checkpoint_path, model.registry.params);
  result.freeze = verify_freeze(before, model.registry, spec.trainable);
  return result;
}

std::string transcribe(OmniModel& model, const Waveform& wave) {
  Waveform w = wave;
  if (w.sample_rate != 16000) w = resample(w, 16000);
  Tape t;
  Var feats = model.speech_encoder.encode(t, compute_mel(w));
  Var logprobs = model.speech_encoder.ctc_logprobs(t, feats);
  return ctc_ids_transcript(ctc_greedy_decode(logprobs->value));
}

AsrEval eval_asr(OmniModel& model, const std::string& manifest_path, int64_t limit) {
  std::vector<AsrRecord> records = load_asr_manifest(manifest_path);
  if (limit >= 0 && static_cast<int64_t>(records.size()) > limit)
    records.resize(static_cast<size_t>(limit));
  std::vector<std::string> refs, hyps;
  for (const AsrRecord& rec : records) {
    refs.push_back(rec.text);
    hyps.push_back(transcribe(model, read_wav(rec.wav)));
  }
  AsrEval eval;
  eval.cer = character_error_rate(refs, hyps);
  eval.wer = word_error_rate(refs, hyps);
  return eval;
}

}  // namespace omni
