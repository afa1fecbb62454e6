#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ganlip/image.hpp"
#include "ganlip/melspec.hpp"
#include "ganlip/rng.hpp"

namespace ganlip {

// 8-bit grayscale or RGB PNG, scaled to [0, 1].
ImageTensor load_frame(const std::filesystem::path& path);
// Quantizes to 8 bits; channels must be 1 or 3.
void save_png(const std::filesystem::path& path, const ImageTensor& image);

struct BBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;
};

// Bilinear resample of the bbox region to size x size, half-pixel centered.
ImageTensor crop_and_resize(const ImageTensor& image, const BBox& bbox, std::size_t size);

// CSV with header frame_index,x,y,w,h.
std::map<std::size_t, BBox> read_bboxes(const std::filesystem::path& path);

struct FramePair {
  std::shared_ptr<const ImageTensor> target;     // S
  std::shared_ptr<const ImageTensor> reference;  // S', the frame at frame_index + alpha
  int alpha = 0;
  std::size_t frame_index = 0;
  std::shared_ptr<const MelSpectrogram> audio;           // A, synced with the target
  std::shared_ptr<const MelSpectrogram> unsynced_audio;  // A', the window at the reference frame

  std::size_t reference_index() const { return static_cast<std::size_t>(static_cast<long long>(frame_index) + alpha); }
};

// Applies the boundary policy to a drawn shift: keep it if in range, else
// flip its sign, else redraw |alpha| from the feasible set. nullopt when no
// shift in 1..alpha_max fits.
std::optional<int> resolve_shift(std::size_t index, std::size_t n_frames, int drawn, int alpha_max, Rng& rng);

// One pair per frame that admits a shift. `mels` may be empty (no audio).
std::vector<FramePair> make_frame_pairs(const std::vector<std::shared_ptr<const ImageTensor>>& frames,
                                        const std::vector<std::shared_ptr<const MelSpectrogram>>& mels,
                                        int alpha_max, Rng& rng);

struct ManifestEntry {
  std::string video_id;
  std::string speaker_id;
  std::filesystem::path frame_dir;
  std::filesystem::path wav;
  std::size_t n_frames = 0;
  double fps = 25.0;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
};

void validate(const CorpusManifest& manifest);
// JSON Lines; relative paths are resolved against the manifest's directory.
CorpusManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);

enum class SplitRole { Train, Test };

struct DatasetSplit {
  std::string name;
  std::vector<std::string> video_ids;  // sorted
  SplitRole role = SplitRole::Train;
};

struct SplitCounts {
  std::size_t small = 300;
  std::size_t full = 980;
  std::size_t test = 20;
};

inline constexpr const char* kSplitSmall = "GRIDSmall";
inline constexpr const char* kSplitFull = "GRIDFull";
inline constexpr const char* kSplitTest = "GRIDTest";

// Per speaker: test videos are drawn first, then the full training split
// from the remainder; the small split is a prefix of the full one.
std::vector<DatasetSplit> split_dataset(const CorpusManifest& manifest, const SplitCounts& per_speaker, Rng& rng);

// 16-bit PCM mono RIFF WAVE at the expected sample rate.
AudioSignal load_wav(const std::filesystem::path& path, double expected_rate = 16000.0);
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

}  // namespace ganlip
