#include "ganlip/melspec.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ganlip/error.hpp"

namespace ganlip {

namespace fs = std::filesystem;

void validate(const MelConfig& cfg) {
  require(cfg.sample_rate > 0.0, "mel config: sample_rate must be > 0");
  require(cfg.fft_size >= 2, "mel config: fft_size must be >= 2");
  require(cfg.hop >= 1 && cfg.hop <= cfg.win_length, "mel config: need 1 <= hop <= win_length");
  require(cfg.win_length <= cfg.fft_size, "mel config: win_length must be <= fft_size");
  require(cfg.n_mels >= 1, "mel config: n_mels must be >= 1");
  require(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax, "mel config: need 0 <= fmin < fmax");
  require(cfg.fmax <= cfg.sample_rate / 2.0, "mel config: fmax above Nyquist");
  require(cfg.window_frames >= 1, "mel config: window_frames must be >= 1");
  require(std::isfinite(cfg.log_floor), "mel config: log_floor must be finite");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> analysis_window(const MelConfig& cfg) {
  std::vector<double> w(cfg.fft_size, 0.0);
  const std::size_t offset = (cfg.fft_size - cfg.win_length) / 2;
  for (std::size_t n = 0; n < cfg.win_length; ++n) {
    w[offset + n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                         static_cast<double>(cfg.win_length));
  }
  return w;
}

Matrix stft_magnitude(const AudioSignal& signal, const MelConfig& cfg) {
  validate(cfg);
  const std::size_t len = signal.samples.size();
  if (len < cfg.win_length)
    fail(ErrorKind::InvalidArgument, "stft: signal of " + std::to_string(len) + " samples is shorter than win_length " +
                                         std::to_string(cfg.win_length));
  const std::size_t pad = cfg.fft_size / 2;
  require(len > pad, "stft: signal too short for reflect padding");

  // Reflect padding: x[-k] = x[k], x[len-1+k] = x[len-1-k].
  std::vector<double> padded(len + 2 * pad);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    const auto j = static_cast<long long>(i) - static_cast<long long>(pad);
    long long k = j < 0 ? -j : j;
    const auto last = static_cast<long long>(len) - 1;
    if (k > last) k = 2 * last - k;
    padded[i] = signal.samples[static_cast<std::size_t>(k)];
  }

  const std::vector<double> window = analysis_window(cfg);
  const std::size_t n_bins = cfg.fft_size / 2 + 1;
  const std::size_t n_cols = 1 + len / cfg.hop;
  Matrix out(n_bins, n_cols);

  Eigen::FFT<double> fft;
  std::vector<double> frame(cfg.fft_size);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t t = 0; t < n_cols; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t n = 0; n < cfg.fft_size; ++n) frame[n] = padded[start + n] * window[n];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < n_bins; ++k) out(k, t) = std::abs(spectrum[k]);
  }
  return out;
}

std::vector<double> mel_center_frequencies(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  const double step = (hi - lo) / static_cast<double>(cfg.n_mels + 1);
  std::vector<double> centers(cfg.n_mels);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) centers[m] = mel_to_hz(lo + step * static_cast<double>(m + 1));
  return centers;
}

Matrix mel_filterbank(const MelConfig& cfg) {
  validate(cfg);
  std::vector<double> edges;
  edges.push_back(cfg.fmin);
  for (double c : mel_center_frequencies(cfg)) edges.push_back(c);
  edges.push_back(cfg.fmax);

  const double bin_hz = cfg.sample_rate / static_cast<double>(cfg.fft_size);
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (std::lround(edges[i] / bin_hz) == std::lround(edges[i - 1] / bin_hz))
      fail(ErrorKind::InvalidArgument, "mel filterbank: n_mels " + std::to_string(cfg.n_mels) +
                                           " too large for fft_size " + std::to_string(cfg.fft_size) +
                                           " (adjacent filter points share an FFT bin)");
  }

  const std::size_t n_bins = cfg.fft_size / 2 + 1;
  Matrix fb(cfg.n_mels, n_bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - lo) / (center - lo);
      const double fall = (hi - f) / (hi - center);
      fb(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const AudioSignal& signal, const MelConfig& cfg) {
  const Matrix mag = stft_magnitude(signal, cfg);
  const Matrix fb = mel_filterbank(cfg);
  const double offset = std::exp(cfg.log_floor);
  MelSpectrogram mel{Matrix(cfg.n_mels, mag.cols)};
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    for (std::size_t t = 0; t < mag.cols; ++t) {
      double energy = 0.0;
      for (std::size_t k = 0; k < mag.rows; ++k) {
        const double w = fb(m, k);
        if (w != 0.0) energy += w * mag(k, t) * mag(k, t);
      }
      mel.values(m, t) = std::max(cfg.log_floor, std::log(energy + offset));
    }
  }
  return mel;
}

std::size_t center_column(std::size_t frame_index, double fps, const MelConfig& cfg) {
  require(fps > 0.0, "fps must be > 0");
  const double seconds = static_cast<double>(frame_index) / fps;
  return static_cast<std::size_t>(std::llround(seconds * cfg.sample_rate / static_cast<double>(cfg.hop)));
}

MelSpectrogram slice_window(const MelSpectrogram& full, std::size_t center, const MelConfig& cfg) {
  const std::size_t width = cfg.window_frames;
  const auto before = static_cast<long long>(width / 2);
  MelSpectrogram out{Matrix(full.n_mels(), width, cfg.log_floor)};
  for (std::size_t j = 0; j < width; ++j) {
    const long long col = static_cast<long long>(center) - before + static_cast<long long>(j);
    if (col < 0 || col >= static_cast<long long>(full.n_frames())) continue;
    for (std::size_t m = 0; m < full.n_mels(); ++m) out.values(m, j) = full.values(m, static_cast<std::size_t>(col));
  }
  return out;
}

MelSpectrogram mel_window_for_frame(const AudioSignal& signal, std::size_t frame_index, double fps,
                                    const MelConfig& cfg) {
  if (signal.samples.empty()) fail(ErrorKind::InvalidArgument, "mel window: empty signal");
  require(fps > 0.0, "mel window: fps must be > 0");
  const double t = static_cast<double>(frame_index) / fps;
  if (t * cfg.sample_rate > static_cast<double>(signal.samples.size()))
    fail(ErrorKind::InvalidArgument, "mel window: frame " + std::to_string(frame_index) + " lies beyond the audio");
  return slice_window(mel_spectrogram(signal, cfg), center_column(frame_index, fps, cfg), cfg);
}

namespace {

static_assert(std::endian::native == std::endian::little, "MEL1/EMB1/CKPT writers assume a little-endian host");

}  // namespace

void write_mel1(const fs::path& path, const MelSpectrogram& mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  const auto m = static_cast<std::uint32_t>(mel.n_mels());
  const auto t = static_cast<std::uint32_t>(mel.n_frames());
  out.write("MEL1", 4);
  out.write(reinterpret_cast<const char*>(&m), 4);
  out.write(reinterpret_cast<const char*>(&t), 4);
  std::vector<float> values(mel.values.data.begin(), mel.values.data.end());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

MelSpectrogram read_mel1(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  std::uint32_t m = 0, t = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&m), 4);
  in.read(reinterpret_cast<char*>(&t), 4);
  if (!in || std::memcmp(magic, "MEL1", 4) != 0) fail(ErrorKind::Format, path.string() + ": not a MEL1 file");
  std::vector<float> values(static_cast<std::size_t>(m) * t);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) fail(ErrorKind::Format, path.string() + ": truncated MEL1 payload");
  return MelSpectrogram{Matrix(m, t, std::vector<double>(values.begin(), values.end()))};
}

}  // namespace ganlip
