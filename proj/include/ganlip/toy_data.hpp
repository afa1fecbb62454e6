#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ganlip/image.hpp"
#include "ganlip/media_io.hpp"
#include "ganlip/melspec.hpp"

namespace ganlip {

struct ToyCorpusConfig {
  std::size_t n_videos = 20;
  std::size_t frames_per_video = 60;
  std::size_t image_size = 16;
  std::size_t n_speakers = 4;
  double fps = 25.0;
  std::uint64_t seed = 10;
};

// Appearance of one synthetic speaker. Coordinates are in units of the image side.
struct ToySpeaker {
  double skin[3] = {0.8, 0.6, 0.5};
  double background[3] = {0.2, 0.3, 0.4};
  double lips[3] = {0.3, 0.05, 0.1};
  double face_cx = 0.5;
  double face_cy = 0.5;
  double face_rx = 0.36;
  double face_ry = 0.44;
  double mouth_rx = 0.16;
};

// Face whose mouth opening grows with the phoneme signal s in [0, 1].
// Pixels depend only on (speaker, s).
ImageTensor render_toy_face(const ToySpeaker& speaker, double s, std::size_t size);

struct ToyVideo {
  std::string video_id;
  std::string speaker_id;
  ToySpeaker speaker;
  double fps = 25.0;
  std::vector<double> phoneme;  // s per frame
  std::vector<std::shared_ptr<const ImageTensor>> frames;
  AudioSignal audio;  // tone whose pitch and loudness follow s
};

struct ToyCorpus {
  ToyCorpusConfig config;
  std::vector<ToyVideo> videos;
};

ToyCorpus make_toy_dataset(const ToyCorpusConfig& cfg);

// Small mel front end sized for 16x16 toy faces.
MelConfig toy_mel_config();

struct ToyPairs {
  std::vector<FramePair> train;
  std::vector<FramePair> held_out;  // pairs within the last 20% of each video
};

ToyPairs toy_frame_pairs(const ToyCorpus& corpus, const MelConfig& mel, int alpha_max, std::uint64_t seed);

// Writes frames, WAV files and a manifest.jsonl under `dir`; returns the manifest path.
std::filesystem::path write_toy_corpus(const ToyCorpus& corpus, const std::filesystem::path& dir);

}  // namespace ganlip
