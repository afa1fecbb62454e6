#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "ganlip/matrix.hpp"

namespace ganlip {

struct AudioSignal {
  std::vector<double> samples;  // in [-1, 1]
  double sample_rate = 16000.0;
};

struct MelConfig {
  double sample_rate = 16000.0;
  std::size_t fft_size = 800;
  std::size_t hop = 200;
  std::size_t win_length = 800;
  std::size_t n_mels = 80;
  double fmin = 55.0;
  double fmax = 7600.0;
  // log-power is ln(power + exp(log_floor)), so silence maps to log_floor.
  double log_floor = std::log(1e-5);
  // Spectrogram columns per per-frame window (T).
  std::size_t window_frames = 27;
};

void validate(const MelConfig& cfg);

// n_mels x n_frames log-mel energies.
struct MelSpectrogram {
  Matrix values;

  std::size_t n_mels() const noexcept { return values.rows; }
  std::size_t n_frames() const noexcept { return values.cols; }
  friend bool operator==(const MelSpectrogram&, const MelSpectrogram&) = default;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed, reflect-padded (centered) magnitude spectra.
// Result: (fft_size/2 + 1) x (1 + len/hop); column t is centered on sample t*hop.
Matrix stft_magnitude(const AudioSignal& signal, const MelConfig& cfg);

// Periodic Hann window of win_length, zero-padded to fft_size, centered.
std::vector<double> analysis_window(const MelConfig& cfg);

// Center frequencies (Hz) of the n_mels filters, equally spaced on the HTK mel scale.
std::vector<double> mel_center_frequencies(const MelConfig& cfg);

// n_mels x (fft_size/2 + 1) triangular filterbank.
Matrix mel_filterbank(const MelConfig& cfg);

// Full log-mel spectrogram of a signal.
MelSpectrogram mel_spectrogram(const AudioSignal& signal, const MelConfig& cfg);

// Spectrogram column closest to the timestamp of a video frame.
std::size_t center_column(std::size_t frame_index, double fps, const MelConfig& cfg);

// window_frames columns around `center`; columns outside the spectrogram are log_floor.
MelSpectrogram slice_window(const MelSpectrogram& full, std::size_t center, const MelConfig& cfg);

// Window of the audio condition for one video frame.
MelSpectrogram mel_window_for_frame(const AudioSignal& signal, std::size_t frame_index, double fps,
                                    const MelConfig& cfg);

// "MEL1" files: magic, u32 M, u32 T, M*T float32, all little-endian.
void write_mel1(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_mel1(const std::filesystem::path& path);

}  // namespace ganlip
