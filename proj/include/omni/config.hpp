#pragma once

#include <string>
#include <vector>

#include "omni/model.hpp"
#include "omni/synth_data.hpp"

namespace omni {

// Flat key=value run configuration shared by the CLI subcommands. Unknown
// keys are rejected with the full list of valid keys.
struct RunConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
  uint64_t seed = 0;
  int64_t steps = -1;     // -1: per-stage default
  double lr = -1.0;       // -1: per-stage default
  int64_t batch_size = 2;
  int64_t max_new = 16;
  int64_t bench_reps = 5;
  std::string mode = "sequential";  // sequential | pipelined

  int64_t d_llm = 32;
  int64_t llm_blocks = 2;
  int64_t llm_heads = 2;
  int64_t context = 1600;
  int64_t d_vis = 16;
  int64_t vision_blocks = 1;
  int64_t speech_hidden = 32;
  int64_t speech_blocks = 1;
  int64_t gen_hidden = 32;
  int64_t codec_channels = 8;
  int64_t codec_latent = 8;

  int64_t n_asr_train = 2000;
  int64_t n_asr_dev = 200;
  int64_t n_tts = 200;
  int64_t n_caption = 200;
  int64_t n_qa = 200;
  int64_t n_video = 20;

  static const std::vector<std::string>& valid_keys();
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_equals_value);  // "key=value"
  std::string to_json() const;  // resolved config, embedded in reports
  OmniConfig model_config() const;
  CorpusCounts corpus_counts() const;
};

// '#' comments and blank lines allowed; each other line must be key=value.
RunConfig load_config_file(const std::string& path);

}  // namespace omni
