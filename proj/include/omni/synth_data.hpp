#pragma once

#include <string>
#include <vector>

#include "omni/audio.hpp"
#include "omni/rng.hpp"
#include "omni/vision.hpp"

namespace omni {

// Toy corpus over a 16-symbol alphabet 'a'..'p'. Each symbol is spoken as a
// fixed triplet of 100 ms pure tones whose frequencies are multiples of 40 Hz,
// so every codec frame holds a whole number of cycles.

constexpr int kNumSymbols = 16;
constexpr double kSymbolSeconds = 0.3;

bool is_symbol(char c);
int64_t symbol_ctc_id(char c);            // 1..16; 0 is the CTC blank
char ctc_id_symbol(int64_t id);
std::vector<int64_t> transcript_ctc_ids(const std::string& text);
std::string ctc_ids_transcript(const std::vector<int64_t>& ids);

std::vector<double> symbol_frequencies(char c);  // three tones, Hz
Waveform symbol_wave(char c, int sample_rate);
Waveform text_wave(const std::string& text, int sample_rate);

std::string random_transcript(Rng& rng, int min_len = 3, int max_len = 6);

// Procedural caption/QA images: one colored shape on a dark background.
struct SceneSpec {
  int color = 0;  // red, green, blue, yellow
  int shape = 0;  // square, circle, cross, stripes
};
extern const char* const kColorNames[4];
extern const char* const kShapeNames[4];
ImageTensor render_scene(const SceneSpec& spec, int64_t size = 64);
std::string scene_caption(const SceneSpec& spec);

// question strings stay inside the speakable alphabet
constexpr const char* kColorQuestion = "abba";
constexpr const char* kShapeQuestion = "cdcd";

struct AsrRecord {
  std::string wav;
  std::string text;
};
struct TtsRecord {
  std::string wav;
  std::string text;
};
struct CaptionRecord {
  std::string image;
  std::string caption;
};
struct QaRecord {
  std::string image;
  std::string question;
  std::string question_wav;
  std::string answer;
};
struct VideoRecord {
  std::string dir;
  std::string caption;
};

struct CorpusCounts {
  int asr_train = 2000;
  int asr_dev = 200;
  int tts = 200;
  int caption = 200;
  int qa = 200;
  int video = 20;
};

// Writes WAV/PPM assets plus line-delimited JSON manifests under `dir`.
void prepare_data(const std::string& dir, uint64_t seed, const CorpusCounts& counts = {});

// Manifest loaders; paths in the returned records are absolute.
std::vector<AsrRecord> load_asr_manifest(const std::string& path);
std::vector<TtsRecord> load_tts_manifest(const std::string& path);
std::vector<CaptionRecord> load_caption_manifest(const std::string& path);
std::vector<QaRecord> load_qa_manifest(const std::string& path);
std::vector<VideoRecord> load_video_manifest(const std::string& path);

}  // namespace omni
