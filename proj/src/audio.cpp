#include "omni/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "omni/errors.hpp"

namespace omni {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <class T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("wav: truncated file " + path);
  return v;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_points(const MelConfig& cfg) {
  const double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
  std::vector<double> pts(static_cast<size_t>(cfg.n_mels) + 2);
  for (size_t i = 0; i < pts.size(); ++i)
    pts[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / (cfg.n_mels + 1));
  return pts;
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("wav: cannot open " + path);
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw DataError("wav: not a RIFF file: " + path);
  read_pod<uint32_t>(is, path);  // riff size
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw DataError("wav: not a WAVE file: " + path);

  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  Waveform wave;
  while (is.read(tag, 4)) {
    const uint32_t size = read_pod<uint32_t>(is, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_pod<uint16_t>(is, path);
      channels = read_pod<uint16_t>(is, path);
      rate = read_pod<uint32_t>(is, path);
      read_pod<uint32_t>(is, path);  // byte rate
      read_pod<uint16_t>(is, path);  // block align
      bits = read_pod<uint16_t>(is, path);
      if (size > 16) is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav: data chunk before fmt in " + path);
      if (format != 1 || bits != 16) {
        throw DataError("wav: only PCM16 is supported (" + path + " has format " +
                        std::to_string(format) + ", " + std::to_string(bits) + " bits)");
      }
      if (channels != 1) {
        throw DataError("wav: only mono is supported (" + path + " has " +
                        std::to_string(channels) + " channels)");
      }
      const uint32_t n = size / 2;
      wave.samples.resize(n);
      for (uint32_t i = 0; i < n; ++i)
        wave.samples[i] = static_cast<double>(read_pod<int16_t>(is, path)) / 32768.0;
      wave.sample_rate = static_cast<int>(rate);
      return wave;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw DataError("wav: no data chunk in " + path);
}

void write_wav(const std::string& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw DataError("wav: invalid sample rate");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("wav: cannot open for writing: " + path);
  const uint32_t data_size = static_cast<uint32_t>(wave.samples.size() * 2);
  auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto w16 = [&](uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
  os.write("RIFF", 4);
  w32(36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(static_cast<uint32_t>(wave.sample_rate));
  w32(static_cast<uint32_t>(wave.sample_rate) * 2);
  w16(2);
  w16(16);
  os.write("data", 4);
  w32(data_size);
  for (double s : wave.samples) {
    double c = std::min(1.0, std::max(-1.0, s));
    auto v = static_cast<int16_t>(std::lround(c * 32767.0));
    os.write(reinterpret_cast<const char*>(&v), 2);
  }
  if (!os) throw DataError("wav: write failed: " + path);
}

Waveform resample(const Waveform& wave, int target_rate) {
  if (wave.sample_rate <= 0) throw DataError("resample: source rate must be positive");
  if (target_rate <= 0) throw DataError("resample: target rate must be positive");
  if (wave.samples.empty()) throw DataError("resample: empty waveform");
  if (target_rate == wave.sample_rate) return wave;
  const int64_t n = static_cast<int64_t>(wave.samples.size());
  const int64_t out_n = static_cast<int64_t>(
      std::llround(static_cast<double>(n) * target_rate / wave.sample_rate));
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(out_n));
  const double step = static_cast<double>(wave.sample_rate) / target_rate;
  for (int64_t i = 0; i < out_n; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto lo = static_cast<int64_t>(pos);
    if (lo >= n - 1) {
      out.samples[static_cast<size_t>(i)] = wave.samples[static_cast<size_t>(n - 1)];
    } else {
      const double frac = pos - static_cast<double>(lo);
      out.samples[static_cast<size_t>(i)] = (1.0 - frac) * wave.samples[static_cast<size_t>(lo)] +
                                            frac * wave.samples[static_cast<size_t>(lo + 1)];
    }
  }
  return out;
}

MelSpectrogram compute_mel(const Waveform& wave, const MelConfig& cfg) {
  if (wave.sample_rate != cfg.sample_rate) {
    throw DataError("mel: expected " + std::to_string(cfg.sample_rate) + " Hz input, got " +
                    std::to_string(wave.sample_rate) + " Hz; resample first");
  }
  const int64_t n = static_cast<int64_t>(wave.samples.size());
  if (n < cfg.win_length) {
    throw DataError("mel: waveform of " + std::to_string(n) + " samples is shorter than the " +
                    std::to_string(cfg.win_length) + "-sample window");
  }
  const int64_t frames = (n - cfg.win_length) / cfg.hop_length + 1;
  const int64_t bins = cfg.n_fft / 2 + 1;

  // Hann window (periodic)
  std::vector<double> window(static_cast<size_t>(cfg.win_length));
  for (int i = 0; i < cfg.win_length; ++i)
    window[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / cfg.win_length));

  // triangular mel filterbank over FFT bin frequencies
  const auto pts = mel_points(cfg);
  Tensor fbank({static_cast<int64_t>(cfg.n_mels), bins});
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = pts[static_cast<size_t>(m)], c = pts[static_cast<size_t>(m + 1)],
                 hi = pts[static_cast<size_t>(m + 2)];
    for (int64_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > lo && f < c) w = (f - lo) / (c - lo);
      else if (f >= c && f < hi) w = (hi - f) / (hi - c);
      fbank.at(m, k) = w;
    }
  }

  // DFT basis, tabulated once and shared by every frame
  std::vector<double> cos_t(static_cast<size_t>(bins * cfg.win_length));
  std::vector<double> sin_t(static_cast<size_t>(bins * cfg.win_length));
  for (int64_t k = 0; k < bins; ++k) {
    for (int i = 0; i < cfg.win_length; ++i) {
      const double ang = -2.0 * kPi * static_cast<double>(k) * i / cfg.n_fft;
      cos_t[static_cast<size_t>(k * cfg.win_length + i)] = std::cos(ang);
      sin_t[static_cast<size_t>(k * cfg.win_length + i)] = std::sin(ang);
    }
  }

  MelSpectrogram mel;
  mel.frames = frames;
  mel.n_mels = cfg.n_mels;
  mel.data = Tensor({frames, cfg.n_mels});
#pragma omp parallel for schedule(static)
  for (int64_t fr = 0; fr < frames; ++fr) {
    std::vector<double> power(static_cast<size_t>(bins));
    std::vector<double> frame(static_cast<size_t>(cfg.win_length));
    const int64_t start = fr * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i)
      frame[static_cast<size_t>(i)] =
          wave.samples[static_cast<size_t>(start + i)] * window[static_cast<size_t>(i)];
    // direct DFT of the windowed frame, zero-padded to n_fft
    for (int64_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      const double* ck = &cos_t[static_cast<size_t>(k * cfg.win_length)];
      const double* sk = &sin_t[static_cast<size_t>(k * cfg.win_length)];
      for (int i = 0; i < cfg.win_length; ++i) {
        re += frame[static_cast<size_t>(i)] * ck[i];
        im += frame[static_cast<size_t>(i)] * sk[i];
      }
      power[static_cast<size_t>(k)] = re * re + im * im;
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (int64_t k = 0; k < bins; ++k) e += fbank.at(m, k) * power[static_cast<size_t>(k)];
      mel.data.at(fr, m) = std::log(cfg.eps + e);
    }
  }
  return mel;
}

std::vector<double> mel_filter_centers_hz(const MelConfig& cfg) {
  const auto pts = mel_points(cfg);
  return {pts.begin() + 1, pts.end() - 1};
}

}  // namespace omni
