#pragma once

#include <map>
#include <string>
#include <vector>

#include "omni/checkpoint.hpp"
#include "omni/metrics.hpp"
#include "omni/model.hpp"
#include "omni/synth_data.hpp"

namespace omni {

// Curriculum: vision alignment/understanding (1.x), audio alignment and
// mixed-modality tuning (2.x), codec and speech-decoder training (3.x).
struct MixtureComponent {
  std::string task;  // caption | qa | asr | tts
  double fraction = 1.0;
};

struct StageSpec {
  std::string id;
  std::vector<MixtureComponent> mixture;
  std::vector<std::string> trainable;
  std::string objective;  // lm | ctc | codec | tts
  bool substitute_audio_questions = false;
  int64_t default_steps = 100;
  double default_lr = 0.05;
};

// The normative stage table, in execution order.
const std::vector<StageSpec>& build_stage_plan();
const StageSpec& find_stage(const std::string& id);

// Shuffles [0, n) with a seeded Fisher-Yates pass and keeps the first
// round-half-up(fraction*n) indices. A nonzero fraction of an empty source
// is a data error naming the task.
std::vector<int64_t> sample_mixture(int64_t n, double fraction, uint64_t seed,
                                    const std::string& task);

// Per-record fair coin deciding which QA questions are spoken instead of typed.
std::vector<bool> substitute_speech_questions(size_t n_records, uint64_t seed);

struct FreezeReport {
  bool ok = true;
  std::vector<std::string> violations;  // frozen params whose bits changed
};

// Bitwise comparison of every param outside `trainable_modules` against the
// snapshot. A snapshot whose name set differs from the registry is a config
// error.
FreezeReport verify_freeze(const ParamSnapshot& before, const ParamRegistry& reg,
                           const std::vector<std::string>& trainable_modules);

struct TrainOptions {
  int64_t steps = -1;  // -1: stage default
  double lr = -1.0;    // -1: stage default
  uint64_t seed = 0;
  int64_t batch_size = 2;  // codec stage only
  int64_t log_every = 1;
};

struct StageResult {
  std::string stage_id;
  int64_t steps = 0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
  FreezeReport freeze;
};

// Runs one stage end to end: loads the previous stage's checkpoint (config
// error if missing), trains with the stage's mixture and freeze set, writes
// {step,loss,wall_ms} ndjson metrics and a checkpoint, and verifies the
// freeze invariant bitwise.
StageResult run_stage(OmniModel& model, const std::string& data_dir, const std::string& out_dir,
                      const std::string& stage_id, const TrainOptions& options = {});

struct AsrEval {
  ErrorRate cer;
  ErrorRate wer;
};

// Greedy CTC decoding over an ASR manifest.
AsrEval eval_asr(OmniModel& model, const std::string& manifest_path, int64_t limit = -1);

// Transcribe a single utterance via the CTC head.
std::string transcribe(OmniModel& model, const Waveform& wave);

}  // namespace omni
