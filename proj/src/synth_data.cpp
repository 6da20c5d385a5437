#include "omni/synth_data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "omni/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace omni {

const char* const kColorNames[4] = {"red", "green", "blue", "yellow"};
const char* const kShapeNames[4] = {"square", "circle", "cross", "stripes"};

bool is_symbol(char c) { return c >= 'a' && c < 'a' + kNumSymbols; }

int64_t symbol_ctc_id(char c) {
  if (!is_symbol(c)) throw DataError(std::string("symbol out of alphabet a..p: '") + c + "'");
  return 1 + (c - 'a');
}

char ctc_id_symbol(int64_t id) {
  if (id < 1 || id > kNumSymbols) throw DataError("ctc id out of range: " + std::to_string(id));
  return static_cast<char>('a' + id - 1);
}

std::vector<int64_t> transcript_ctc_ids(const std::string& text) {
  std::vector<int64_t> ids;
  for (char c : text) ids.push_back(symbol_ctc_id(c));
  return ids;
}

std::string ctc_ids_transcript(const std::vector<int64_t>& ids) {
  std::string out;
  for (int64_t id : ids) out.push_back(ctc_id_symbol(id));
  return out;
}

std::vector<double> symbol_frequencies(char c) {
  const int i = static_cast<int>(symbol_ctc_id(c) - 1);
  return {400.0 + 40.0 * i, 1320.0 - 40.0 * i, 400.0 + 40.0 * ((i * 7) % 16)};
}

Waveform symbol_wave(char c, int sample_rate) {
  const std::vector<double> freqs = symbol_frequencies(c);
  const int idx = static_cast<int>(symbol_ctc_id(c) - 1);
  const double base_amp = 0.45 + 0.03 * idx;  // symbol-specific loudness, peak 0.9 < PCM16 clip
  Waveform w;
  w.sample_rate = sample_rate;
  const int64_t per_tone = static_cast<int64_t>(std::llround(0.1 * sample_rate));
  const int64_t n_total = 3 * per_tone;
  int64_t pos = 0;
  for (double f : freqs) {
    for (int64_t i = 0; i < per_tone; ++i, ++pos) {
      // amplitude ramp across the symbol keeps successive codec frames distinct
      const double env = 0.5 + 0.5 * static_cast<double>(pos) / static_cast<double>(n_total);
      w.samples.push_back(base_amp * env * std::sin(2.0 * M_PI * f * i / sample_rate));
    }
  }
  return w;
}

Waveform text_wave(const std::string& text, int sample_rate) {
  if (text.empty()) throw DataError("text_wave: empty text");
  Waveform w;
  w.sample_rate = sample_rate;
  for (char c : text) {
    Waveform s = symbol_wave(c, sample_rate);
    w.samples.insert(w.samples.end(), s.samples.begin(), s.samples.end());
  }
  return w;
}

std::string random_transcript(Rng& rng, int min_len, int max_len) {
  const int len = min_len + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - min_len + 1)));
  std::string out;
  for (int i = 0; i < len; ++i) out.push_back(static_cast<char>('a' + rng.below(kNumSymbols)));
  return out;
}

ImageTensor render_scene(const SceneSpec& spec, int64_t size) {
  static const double palette[4][3] = {
      {0.9, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.15, 0.2, 0.9}, {0.9, 0.85, 0.1}};
  ImageTensor img;
  img.height = size;
  img.width = size;
  img.data.assign(static_cast<size_t>(size * size * 3), 0.08);
  const double* col = palette[spec.color & 3];
  const double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0, r = size / 4.0;
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      bool on = false;
      switch (spec.shape & 3) {
        case 0: on = std::abs(x - cx) <= r && std::abs(y - cy) <= r; break;
        case 1: on = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; break;
        case 2: on = std::abs(x - cx) <= size / 12.0 || std::abs(y - cy) <= size / 12.0; break;
        case 3: on = (y / (size / 8)) % 2 == 0; break;
      }
      if (on)
        for (int64_t c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
    }
  }
  return img;
}

std::string scene_caption(const SceneSpec& spec) {
  return std::string("a ") + kColorNames[spec.color & 3] + " " + kShapeNames[spec.shape & 3];
}

namespace {

void write_lines(const std::string& path, const std::vector<json>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("manifest: cannot open for writing: " + path);
  for (const json& row : rows) os << row.dump() << "\n";
}

std::vector<json> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("manifest: cannot open " + path);
  std::vector<json> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string field(const json& row, const std::string& key, const std::string& path) {
  if (!row.contains(key) || !row[key].is_string())
    throw DataError("manifest " + path + ": missing string field '" + key + "'");
  return row[key].get<std::string>();
}

std::string resolve(const std::string& manifest_path, const std::string& rel) {
  return (fs::path(manifest_path).parent_path() / rel).string();
}

void write_asr_split(const fs::path& root, const std::string& split, int count, Rng& rng,
                     std::vector<json>& rows) {
  fs::create_directories(root / "asr" / split);
  char name[64];
  for (int i = 0; i < count; ++i) {
    const std::string text = random_transcript(rng);
    std::snprintf(name, sizeof(name), "asr/%s/utt_%05d.wav", split.c_str(), i);
    write_wav((root / name).string(), text_wave(text, 16000));
    rows.push_back({{"wav", name}, {"text", text}});
  }
}

}  // namespace

void prepare_data(const std::string& dir, uint64_t seed, const CorpusCounts& counts) {
  const fs::path root(dir);
  fs::create_directories(root);
  Rng rng(seed);
  char name[64];

  std::vector<json> rows;
  write_asr_split(root, "train", counts.asr_train, rng, rows);
  write_lines((root / "asr_train.jsonl").string(), rows);
  rows.clear();
  write_asr_split(root, "dev", counts.asr_dev, rng, rows);
  write_lines((root / "asr_dev.jsonl").string(), rows);

  rows.clear();
  fs::create_directories(root / "tts");
  for (int i = 0; i < counts.tts; ++i) {
    const std::string text = random_transcript(rng);
    std::snprintf(name, sizeof(name), "tts/utt_%05d.wav", i);
    write_wav((root / name).string(), text_wave(text, 24000));
    rows.push_back({{"wav", name}, {"text", text}});
  }
  write_lines((root / "tts.jsonl").string(), rows);

  rows.clear();
  fs::create_directories(root / "caption");
  std::vector<SceneSpec> caption_scenes;
  for (int i = 0; i < counts.caption; ++i) {
    SceneSpec spec{static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))};
    caption_scenes.push_back(spec);
    std::snprintf(name, sizeof(name), "caption/img_%05d.ppm", i);
    write_ppm((root / name).string(), render_scene(spec));
    rows.push_back({{"image", name}, {"caption", scene_caption(spec)}});
  }
  write_lines((root / "caption.jsonl").string(), rows);

  rows.clear();
  fs::create_directories(root / "qa");
  for (int i = 0; i < counts.qa; ++i) {
    SceneSpec spec{static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))};
    const bool about_color = rng.bernoulli(0.5);
    const std::string question = about_color ? kColorQuestion : kShapeQuestion;
    const std::string answer = about_color ? kColorNames[spec.color] : kShapeNames[spec.shape];
    std::snprintf(name, sizeof(name), "qa/img_%05d.ppm", i);
    write_ppm((root / name).string(), render_scene(spec));
    const std::string img_name = name;
    std::snprintf(name, sizeof(name), "qa/q_%05d.wav", i);
    write_wav((root / name).string(), text_wave(question, 16000));
    rows.push_back({{"image", img_name},
                    {"question", question},
                    {"question_wav", name},
                    {"answer", answer}});
  }
  write_lines((root / "qa.jsonl").string(), rows);

  rows.clear();
  for (int i = 0; i < counts.video; ++i) {
    SceneSpec spec{static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))};
    std::snprintf(name, sizeof(name), "video/clip_%03d", i);
    const fs::path clip = root / name;
    fs::create_directories(clip);
    const int n_frames = 8;
    for (int f = 0; f < n_frames; ++f) {
      ImageTensor frame = render_scene(spec, 48);
      // shift brightness over time so frames are distinguishable
      for (double& v : frame.data) v = std::min(1.0, v * (0.6 + 0.05 * f));
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%06d.ppm", f + 1);
      write_ppm((clip / fname).string(), frame);
    }
    {
      std::ofstream meta(clip / "meta.txt", std::ios::trunc);
      meta << "duration_s=4.0 fps=2.0\n";
    }
    rows.push_back({{"dir", name}, {"caption", std::string("a ") + kColorNames[spec.color] +
                                                  " " + kShapeNames[spec.shape] + " clip"}});
  }
  write_lines((root / "video.jsonl").string(), rows);
}

std::vector<AsrRecord> load_asr_manifest(const std::string& path) {
  std::vector<AsrRecord> out;
  for (const json& row : read_lines(path))
    out.push_back({resolve(path, field(row, "wav", path)), field(row, "text", path)});
  return out;
}

std::vector<TtsRecord> load_tts_manifest(const std::string& path) {
  std::vector<TtsRecord> out;
  for (const json& row : read_lines(path))
    out.push_back({resolve(path, field(row, "wav", path)), field(row, "text", path)});
  return out;
}

std::vector<CaptionRecord> load_caption_manifest(const std::string& path) {
  std::vector<CaptionRecord> out;
  for (const json& row : read_lines(path))
    out.push_back({resolve(path, field(row, "image", path)), field(row, "caption", path)});
  return out;
}

std::vector<QaRecord> load_qa_manifest(const std::string& path) {
  std::vector<QaRecord> out;
  for (const json& row : read_lines(path))
    out.push_back({resolve(path, field(row, "image", path)), field(row, "question", path),
                   resolve(path, field(row, "question_wav", path)), field(row, "answer", path)});
  return out;
}

std::vector<VideoRecord> load_video_manifest(const std::string& path) {
  std::vector<VideoRecord> out;
  for (const json& row : read_lines(path))
    out.push_back({resolve(path, field(row, "dir", path)), field(row, "caption", path)});
  return out;
}

}  // namespace omni
