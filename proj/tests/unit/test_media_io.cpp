#include <doctest.h>

#include <cmath>
#include <set>

#include "../oracles.hpp"
#include "ganlip/error.hpp"
#include "ganlip/media_io.hpp"
#include "helpers.hpp"

using namespace ganlip;
namespace fs = std::filesystem;

TEST_CASE("png round trip quantizes to 8 bits") {
  Rng rng(1);
  const ImageTensor img = oracle::random_image(rng, 7, 5, 3);
  const auto path = temp_dir("png") / "x.png";
  save_png(path, img);
  const ImageTensor back = load_frame(path);
  REQUIRE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-12);

  const ImageTensor gray = oracle::random_image(rng, 4, 4, 1);
  save_png(path, gray);
  CHECK(load_frame(path).channels == 1);
}

TEST_CASE("missing or corrupt frames raise errors") {
  const auto dir = temp_dir("png_bad");
  CHECK_THROWS_AS(load_frame(dir / "nope.png"), Error);
  spit(dir / "bad.png", "not a png");
  CHECK_THROWS_AS(load_frame(dir / "bad.png"), Error);
  CHECK_THROWS_AS(save_png(dir / "two.png", ImageTensor(2, 2, 2)), Error);
}

TEST_CASE("crop_and_resize matches bilinear sampling of a linear ramp") {
  // Bilinear interpolation reproduces affine images exactly away from the clamped border.
  ImageTensor img(20, 30, 1);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 30; ++x) img.at(y, x, 0) = 0.01 * x + 0.02 * y;
  const BBox box{4, 2, 16, 16};
  const ImageTensor out = crop_and_resize(img, box, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double fy = std::clamp((i + 0.5) * 2.0 - 0.5, 0.0, 15.0);
      const double fx = std::clamp((j + 0.5) * 2.0 - 0.5, 0.0, 15.0);
      CHECK(out.at(i, j, 0) == doctest::Approx(0.01 * (4 + fx) + 0.02 * (2 + fy)).epsilon(1e-12));
    }
}

TEST_CASE("crop_and_resize identity and bounds") {
  Rng rng(2);
  const ImageTensor img = oracle::random_image(rng, 12, 12, 3);
  CHECK(crop_and_resize(img, {0, 0, 12, 12}, 12) == img);
  CHECK_THROWS_AS(crop_and_resize(img, {5, 5, 10, 10}, 8), Error);
  CHECK_THROWS_AS(crop_and_resize(img, {0, 0, 1, 5}, 8), Error);
}

TEST_CASE("bbox csv parsing") {
  const auto dir = temp_dir("bbox");
  spit(dir / "b.csv", "frame_index,x,y,w,h\n0,1,2,3,4\n5,6,7,8,9\n");
  const auto boxes = read_bboxes(dir / "b.csv");
  REQUIRE(boxes.size() == 2);
  CHECK(boxes.at(5).x == 6);
  CHECK(boxes.at(5).h == 9);
  spit(dir / "bad.csv", "frame_index,x,y,w,h\n0,1,2\n");
  CHECK_THROWS_AS(read_bboxes(dir / "bad.csv"), Error);
}

TEST_CASE("resolve_shift keeps, flips or redraws") {
  Rng rng(3);
  CHECK(resolve_shift(10, 30, 4, 6, rng) == 4);
  CHECK(resolve_shift(10, 30, -4, 6, rng) == -4);
  CHECK(resolve_shift(1, 30, -4, 6, rng) == 4);   // flipped
  CHECK(resolve_shift(28, 30, 4, 6, rng) == -4);  // flipped
  // Neither sign fits in a 3-frame clip for |alpha| = 5: redraw among 1..2.
  for (int k = 0; k < 50; ++k) {
    const auto s = resolve_shift(1, 3, 5, 6, rng);
    REQUIRE(s.has_value());
    CHECK(std::abs(*s) == 1);
  }
  CHECK_FALSE(resolve_shift(0, 1, 1, 6, rng).has_value());
}

TEST_CASE("frame pairs: one per frame, shifts within bounds, audio aligned") {
  for (std::size_t n : {2u, 3u, 7u, 13u, 75u}) {
    std::vector<std::shared_ptr<const ImageTensor>> frames;
    std::vector<std::shared_ptr<const MelSpectrogram>> mels;
    for (std::size_t i = 0; i < n; ++i) {
      frames.push_back(std::make_shared<const ImageTensor>(2, 2, 1, static_cast<double>(i)));
      mels.push_back(std::make_shared<const MelSpectrogram>(MelSpectrogram{Matrix(1, 1, static_cast<double>(i))}));
    }
    Rng rng(n);
    const auto pairs = make_frame_pairs(frames, mels, 6, rng);
    CHECK(pairs.size() == n);
    std::set<int> seen;
    for (const auto& p : pairs) {
      CHECK(std::abs(p.alpha) >= 1);
      CHECK(std::abs(p.alpha) <= 6);
      REQUIRE(p.reference_index() < n);
      CHECK(p.target->data[0] == static_cast<double>(p.frame_index));
      CHECK(p.reference->data[0] == static_cast<double>(p.reference_index()));
      CHECK(p.audio->values.data[0] == static_cast<double>(p.frame_index));
      CHECK(p.unsynced_audio->values.data[0] == static_cast<double>(p.reference_index()));
      seen.insert(p.alpha);
    }
    if (n >= 75) CHECK(seen.size() == 12);  // every shift in +-1..6 shows up
  }
  Rng rng(9);
  CHECK_THROWS_AS(make_frame_pairs({}, {}, 6, rng), Error);
}

TEST_CASE("frame pairs are seed-deterministic") {
  std::vector<std::shared_ptr<const ImageTensor>> frames(30, std::make_shared<const ImageTensor>(1, 1, 1));
  Rng a(5), b(5);
  const auto pa = make_frame_pairs(frames, {}, 6, a), pb = make_frame_pairs(frames, {}, 6, b);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].alpha == pb[i].alpha);
}

namespace {
CorpusManifest synthetic_manifest(int speakers, int videos_per_speaker) {
  CorpusManifest m;
  for (int s = 0; s < speakers; ++s)
    for (int v = 0; v < videos_per_speaker; ++v) {
      ManifestEntry e;
      e.speaker_id = "s" + std::to_string(s);
      e.video_id = e.speaker_id + "_v" + std::to_string(v);
      e.frame_dir = e.video_id;
      e.wav = e.video_id + ".wav";
      e.n_frames = 75;
      m.entries.push_back(e);
    }
  return m;
}
}  // namespace

TEST_CASE("manifest round trip and validation") {
  const auto dir = temp_dir("manifest");
  CorpusManifest m = synthetic_manifest(2, 3);
  write_manifest(dir / "m.jsonl", m);
  const CorpusManifest back = read_manifest(dir / "m.jsonl");
  REQUIRE(back.entries.size() == 6);
  CHECK(back.entries[4].video_id == "s1_v1");
  CHECK(back.entries[4].frame_dir == dir / "s1_v1");  // resolved against the manifest directory

  m.entries.push_back(m.entries.front());
  CHECK_THROWS_AS(validate(m), Error);
  spit(dir / "broken.jsonl", "{\"video_id\": 3}\n");
  CHECK_THROWS_AS(read_manifest(dir / "broken.jsonl"), Error);
}

TEST_CASE("split_dataset structure") {
  const CorpusManifest m = synthetic_manifest(3, 40);
  Rng rng(7);
  const auto splits = split_dataset(m, SplitCounts{10, 30, 5}, rng);
  REQUIRE(splits.size() == 3);
  std::map<std::string, std::set<std::string>> by;
  for (const auto& s : splits) by[s.name] = {s.video_ids.begin(), s.video_ids.end()};
  CHECK(by[kSplitSmall].size() == 30);
  CHECK(by[kSplitFull].size() == 90);
  CHECK(by[kSplitTest].size() == 15);
  for (const auto& id : by[kSplitSmall]) CHECK(by[kSplitFull].count(id) == 1);
  for (const auto& id : by[kSplitTest]) CHECK(by[kSplitFull].count(id) == 0);

  Rng again(7);
  const auto splits2 = split_dataset(m, SplitCounts{10, 30, 5}, again);
  for (std::size_t i = 0; i < 3; ++i) CHECK(splits[i].video_ids == splits2[i].video_ids);

  Rng r3(1);
  CHECK_THROWS_AS(split_dataset(m, SplitCounts{10, 36, 5}, r3), Error);  // 41 > 40 per speaker
  CHECK_THROWS_AS(split_dataset(m, SplitCounts{31, 30, 5}, r3), Error);  // small larger than full
}

TEST_CASE("wav round trip, header arithmetic and rate check") {
  const auto dir = temp_dir("wav");
  AudioSignal s;
  s.sample_rate = 16000;
  for (int i = 0; i < 16000; ++i) s.samples.push_back(0.5 * std::sin(i * 0.01));
  write_wav(dir / "a.wav", s);
  CHECK(fs::file_size(dir / "a.wav") == 44 + 2 * 16000);
  const AudioSignal back = load_wav(dir / "a.wav", 16000);
  REQUIRE(back.samples.size() == 16000);
  for (std::size_t i = 0; i < back.samples.size(); i += 97) CHECK(std::abs(back.samples[i] - s.samples[i]) < 1.0 / 32767);
  CHECK_THROWS_AS(load_wav(dir / "a.wav", 22050), Error);
  CHECK_THROWS_AS(load_wav(dir / "none.wav"), Error);
}
