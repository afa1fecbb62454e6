#include "ganlip/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "ganlip/error.hpp"
#include "ganlip/rng.hpp"

namespace ganlip {

namespace fs = std::filesystem;

namespace {

// Coverage of a soft-edged ellipse at a pixel; edges blend over about one pixel.
double ellipse_coverage(double px, double py, double cx, double cy, double rx, double ry, double pixel) {
  const double dx = (px - cx) / rx;
  const double dy = (py - cy) / ry;
  const double r = std::sqrt(dx * dx + dy * dy);
  const double dist = (r - 1.0) * std::min(rx, ry);
  return std::clamp(0.5 - dist / pixel, 0.0, 1.0);
}

double phoneme_at(double frame_time, double omega, double phase) {
  return 0.5 + 0.5 * std::sin(omega * frame_time + phase);
}

ToySpeaker random_speaker(Rng& rng) {
  ToySpeaker s;
  for (int c = 0; c < 3; ++c) {
    s.skin[c] = rng.uniform(0.55, 0.95);
    s.background[c] = rng.uniform(0.05, 0.4);
    s.lips[c] = rng.uniform(0.0, 0.25);
  }
  s.face_cx = rng.uniform(0.45, 0.55);
  s.face_cy = rng.uniform(0.47, 0.53);
  s.face_rx = rng.uniform(0.32, 0.4);
  s.face_ry = rng.uniform(0.4, 0.46);
  s.mouth_rx = rng.uniform(0.13, 0.19);
  return s;
}

}  // namespace

ImageTensor render_toy_face(const ToySpeaker& sp, double s, std::size_t size) {
  require(size >= 8, "toy face: image_size must be >= 8");
  s = std::clamp(s, 0.0, 1.0);
  ImageTensor img(size, size, 3);
  const double pixel = 1.0 / static_cast<double>(size);
  const double eye_y = sp.face_cy - 0.15;
  const double mouth_y = sp.face_cy + 0.22;
  const double mouth_ry = 0.02 + 0.12 * s;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = (static_cast<double>(x) + 0.5) * pixel;
      const double py = (static_cast<double>(y) + 0.5) * pixel;
      const double face = ellipse_coverage(px, py, sp.face_cx, sp.face_cy, sp.face_rx, sp.face_ry, pixel);
      const double eyes = std::max(ellipse_coverage(px, py, sp.face_cx - 0.14, eye_y, 0.06, 0.05, pixel),
                                   ellipse_coverage(px, py, sp.face_cx + 0.14, eye_y, 0.06, 0.05, pixel));
      // The mouth only exists in the lower half, so the upper half is independent of s.
      const double mouth =
          py < 0.5 ? 0.0 : ellipse_coverage(px, py, sp.face_cx, mouth_y, sp.mouth_rx, mouth_ry, pixel);
      for (std::size_t c = 0; c < 3; ++c) {
        double v = sp.background[c] * (1.0 - face) + sp.skin[c] * face;
        v = v * (1.0 - eyes * face) + 0.05 * eyes * face;
        v = v * (1.0 - mouth * face) + sp.lips[c] * mouth * face;
        img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

MelConfig toy_mel_config() {
  MelConfig cfg;
  cfg.fft_size = 400;
  cfg.hop = 160;
  cfg.win_length = 400;
  cfg.n_mels = 16;
  cfg.window_frames = 9;
  return cfg;
}

ToyCorpus make_toy_dataset(const ToyCorpusConfig& cfg) {
  require(cfg.image_size >= 8, "toy corpus: image_size must be >= 8");
  require(cfg.n_videos >= 1 && cfg.frames_per_video >= 2, "toy corpus: need videos with at least two frames");
  require(cfg.n_speakers >= 1, "toy corpus: need at least one speaker");
  require(cfg.fps > 0.0, "toy corpus: fps must be > 0");

  Rng rng(cfg.seed);
  std::vector<ToySpeaker> speakers;
  for (std::size_t k = 0; k < cfg.n_speakers; ++k) speakers.push_back(random_speaker(rng));

  const double sample_rate = 16000.0;
  ToyCorpus corpus;
  corpus.config = cfg;
  for (std::size_t v = 0; v < cfg.n_videos; ++v) {
    ToyVideo video;
    const std::size_t spk = v % cfg.n_speakers;
    char id[32];
    std::snprintf(id, sizeof id, "s%02zu_v%03zu", spk, v);
    video.video_id = id;
    std::snprintf(id, sizeof id, "s%02zu", spk);
    video.speaker_id = id;
    video.speaker = speakers[spk];
    video.fps = cfg.fps;

    const double omega = rng.uniform(0.6, 1.2);  // rad per frame
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
      const double s = phoneme_at(static_cast<double>(f), omega, phase);
      video.phoneme.push_back(s);
      video.frames.push_back(std::make_shared<const ImageTensor>(render_toy_face(video.speaker, s, cfg.image_size)));
    }

    // FM/AM tone driven by the same signal, evaluated continuously in time.
    const auto n_samples =
        static_cast<std::size_t>(std::llround(static_cast<double>(cfg.frames_per_video) / cfg.fps * sample_rate));
    video.audio.sample_rate = sample_rate;
    video.audio.samples.resize(n_samples);
    double carrier = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double frame_time = static_cast<double>(k) / sample_rate * cfg.fps;
      const double s = phoneme_at(frame_time, omega, phase);
      carrier += 2.0 * std::numbers::pi * (200.0 + 1800.0 * s) / sample_rate;
      video.audio.samples[k] = (0.1 + 0.8 * s) * std::sin(carrier);
    }
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

ToyPairs toy_frame_pairs(const ToyCorpus& corpus, const MelConfig& mel, int alpha_max, std::uint64_t seed) {
  validate(mel);
  Rng rng(seed + seed_offset::pairs);
  ToyPairs out;
  for (const auto& video : corpus.videos) {
    const MelSpectrogram full = mel_spectrogram(video.audio, mel);
    std::vector<std::shared_ptr<const MelSpectrogram>> mels;
    for (std::size_t f = 0; f < video.frames.size(); ++f)
      mels.push_back(std::make_shared<const MelSpectrogram>(slice_window(full, center_column(f, video.fps, mel), mel)));

    const std::size_t n = video.frames.size();
    const std::size_t cut = n - std::max<std::size_t>(2, n / 5);
    auto emit = [&](std::size_t begin, std::size_t end, std::vector<FramePair>& dst) {
      if (end - begin < 2) return;
      const std::vector<std::shared_ptr<const ImageTensor>> frames(video.frames.begin() + begin, video.frames.begin() + end);
      const std::vector<std::shared_ptr<const MelSpectrogram>> windows(mels.begin() + begin, mels.begin() + end);
      for (FramePair& p : make_frame_pairs(frames, windows, alpha_max, rng)) {
        p.frame_index += begin;
        dst.push_back(std::move(p));
      }
    };
    emit(0, cut, out.train);
    emit(cut, n, out.held_out);
  }
  return out;
}

fs::path write_toy_corpus(const ToyCorpus& corpus, const fs::path& dir) {
  CorpusManifest manifest;
  for (const auto& video : corpus.videos) {
    const fs::path frame_dir = dir / "videos" / video.video_id;
    fs::create_directories(frame_dir);
    char name[32];
    for (std::size_t f = 0; f < video.frames.size(); ++f) {
      std::snprintf(name, sizeof name, "frame_%05zu.png", f);
      save_png(frame_dir / name, *video.frames[f]);
    }
    write_wav(frame_dir / "audio.wav", video.audio);
    ManifestEntry e;
    e.video_id = video.video_id;
    e.speaker_id = video.speaker_id;
    e.frame_dir = fs::path("videos") / video.video_id;
    e.wav = fs::path("videos") / video.video_id / "audio.wav";
    e.n_frames = video.frames.size();
    e.fps = video.fps;
    manifest.entries.push_back(std::move(e));
  }
  const fs::path path = dir / "manifest.jsonl";
  write_manifest(path, manifest);
  return path;
}

}  // namespace ganlip
