#pragma once

#include <string>
#include <vector>

#include "omni/tensor.hpp"

namespace omni {

struct Waveform {
  std::vector<double> samples;  // [-1, 1]
  int sample_rate = 0;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct MelSpectrogram {
  int64_t frames = 0;
  int64_t n_mels = 0;
  Tensor data;  // [frames x n_mels], natural log
};

struct MelConfig {
  int sample_rate = 16000;
  int win_length = 400;   // 25 ms
  int hop_length = 160;   // 10 ms
  int n_fft = 512;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double eps = 1e-10;
};

// WAV PCM16 mono little-endian; other encodings are rejected.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& wave);

Waveform resample(const Waveform& wave, int target_rate);

MelSpectrogram compute_mel(const Waveform& wave, const MelConfig& cfg = {});

// Center frequencies of the triangular filters, in Hz (test oracle support).
std::vector<double> mel_filter_centers_hz(const MelConfig& cfg);

}  // namespace omni
