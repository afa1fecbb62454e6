#include "ganlip/media_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ganlip/error.hpp"

namespace ganlip {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorKind::Io, "cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

ImageTensor load_frame(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    fail(ErrorKind::Format, path.string() + ": not a PNG file");

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Io, "libpng initialisation failed");
  }

  ImageTensor image;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  int bit_depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Format, path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Format, path.string() + ": unsupported bit depth 16");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Format, path.string() + ": unsupported channel count " + std::to_string(channels));
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  image = ImageTensor(height, width, static_cast<std::size_t>(channels));
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t i = 0; i < width * image.channels; ++i) {
      image.data[y * width * image.channels + i] = pixels[y * stride + i] / 255.0;
    }
  }
  return image;
}

void save_png(const fs::path& path, const ImageTensor& image) {
  require(image.channels == 1 || image.channels == 3, "save_png: channels must be 1 or 3");
  require(image.height > 0 && image.width > 0, "save_png: empty image");
  FilePtr file = open_file(path, "wb");

  std::vector<png_byte> pixels(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.data[i], 0.0, 1.0);
    pixels[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  std::vector<png_bytep> rows(image.height);
  const std::size_t stride = image.width * image.channels;
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = pixels.data() + y * stride;

  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageTensor crop_and_resize(const ImageTensor& image, const BBox& bbox, std::size_t size) {
  require(size >= 2, "crop_and_resize: output size must be >= 2");
  if (bbox.w < 2 || bbox.h < 2) fail(ErrorKind::InvalidArgument, "crop_and_resize: degenerate bbox");
  if (bbox.x + bbox.w > image.width || bbox.y + bbox.h > image.height)
    fail(ErrorKind::InvalidArgument, "crop_and_resize: bbox out of image bounds");

  ImageTensor out(size, size, image.channels);
  const double sy = static_cast<double>(bbox.h) / static_cast<double>(size);
  const double sx = static_cast<double>(bbox.w) / static_cast<double>(size);
  const double max_y = static_cast<double>(bbox.h - 1);
  const double max_x = static_cast<double>(bbox.w - 1);
  for (std::size_t i = 0; i < size; ++i) {
    const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, bbox.h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t j = 0; j < size; ++j) {
      const double fx = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, bbox.w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double a = image.at(bbox.y + y0, bbox.x + x0, c);
        const double b = image.at(bbox.y + y0, bbox.x + x1, c);
        const double d = image.at(bbox.y + y1, bbox.x + x0, c);
        const double e = image.at(bbox.y + y1, bbox.x + x1, c);
        const double top = wx == 0.0 ? a : (1.0 - wx) * a + wx * b;
        const double bottom = wx == 0.0 ? d : (1.0 - wx) * d + wx * e;
        out.at(i, j, c) = wy == 0.0 ? top : (1.0 - wy) * top + wy * bottom;
      }
    }
  }
  return out;
}

std::map<std::size_t, BBox> read_bboxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::map<std::size_t, BBox> boxes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("frame_index", 0) == 0) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<long long> v;
    while (std::getline(row, cell, ',')) {
      try {
        v.push_back(std::stoll(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 5 || std::any_of(v.begin(), v.end(), [](long long x) { return x < 0; }))
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": expected frame_index,x,y,w,h");
    boxes[static_cast<std::size_t>(v[0])] = BBox{static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2]),
                                                 static_cast<std::size_t>(v[3]), static_cast<std::size_t>(v[4])};
  }
  return boxes;
}

std::optional<int> resolve_shift(std::size_t index, std::size_t n_frames, int drawn, int alpha_max, Rng& rng) {
  require(alpha_max >= 1, "alpha_max must be >= 1");
  const auto n = static_cast<long long>(n_frames);
  const auto i = static_cast<long long>(index);
  auto in_range = [&](long long j) { return j >= 0 && j < n; };
  if (in_range(i + drawn)) return drawn;
  if (in_range(i - drawn)) return -drawn;

  std::vector<int> feasible;
  for (int a = 1; a <= alpha_max; ++a) {
    if (in_range(i + a)) feasible.push_back(a);
    if (in_range(i - a)) feasible.push_back(-a);
  }
  if (feasible.empty()) return std::nullopt;
  // Redraw the magnitude uniformly, then the sign among the feasible ones.
  std::vector<int> magnitudes;
  for (int s : feasible)
    if (std::find(magnitudes.begin(), magnitudes.end(), std::abs(s)) == magnitudes.end())
      magnitudes.push_back(std::abs(s));
  const int mag = magnitudes[rng.below(magnitudes.size())];
  const bool up = in_range(i + mag), down = in_range(i - mag);
  if (up && down) return rng.coin() ? mag : -mag;
  return up ? mag : -mag;
}

std::vector<FramePair> make_frame_pairs(const std::vector<std::shared_ptr<const ImageTensor>>& frames,
                                        const std::vector<std::shared_ptr<const MelSpectrogram>>& mels,
                                        int alpha_max, Rng& rng) {
  if (frames.empty()) fail(ErrorKind::InvalidArgument, "make_frame_pairs: empty frame list");
  require(alpha_max >= 1, "make_frame_pairs: alpha_max must be >= 1");
  require(mels.empty() || mels.size() == frames.size(), "make_frame_pairs: frames and mels are not aligned");

  std::vector<FramePair> pairs;
  pairs.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const int magnitude = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(alpha_max)));
    const int drawn = rng.coin() ? magnitude : -magnitude;
    const auto shift = resolve_shift(i, frames.size(), drawn, alpha_max, rng);
    if (!shift) continue;
    FramePair p;
    p.frame_index = i;
    p.alpha = *shift;
    p.target = frames[i];
    p.reference = frames[p.reference_index()];
    if (!mels.empty()) {
      p.audio = mels[i];
      p.unsynced_audio = mels[p.reference_index()];
    }
    require(p.target->same_shape(*p.reference), "make_frame_pairs: frames differ in size");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void validate(const CorpusManifest& manifest) {
  std::set<std::string> ids;
  for (const auto& e : manifest.entries) {
    if (e.video_id.empty()) fail(ErrorKind::Format, "manifest: empty video_id");
    if (!ids.insert(e.video_id).second) fail(ErrorKind::Format, "manifest: duplicate video_id " + e.video_id);
    if (e.n_frames < 1) fail(ErrorKind::Format, "manifest: " + e.video_id + " has n_frames < 1");
    if (!(e.fps > 0.0)) fail(ErrorKind::Format, "manifest: " + e.video_id + " has fps <= 0");
  }
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  CorpusManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.video_id = j.at("video_id").get<std::string>();
      e.speaker_id = j.at("speaker_id").get<std::string>();
      e.frame_dir = resolve(j.at("frame_dir").get<std::string>());
      e.wav = resolve(j.at("wav").get<std::string>());
      const auto n = j.at("n_frames").get<long long>();
      if (n < 1) fail(ErrorKind::Format, "manifest: " + e.video_id + " has n_frames < 1");
      e.n_frames = static_cast<std::size_t>(n);
      e.fps = j.at("fps").get<double>();
      manifest.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  validate(manifest);
  return manifest;
}

void write_manifest(const fs::path& path, const CorpusManifest& manifest) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["video_id"] = e.video_id;
    j["speaker_id"] = e.speaker_id;
    j["frame_dir"] = e.frame_dir.string();
    j["wav"] = e.wav.string();
    j["n_frames"] = e.n_frames;
    j["fps"] = e.fps;
    out << j.dump() << '\n';
  }
}

std::vector<DatasetSplit> split_dataset(const CorpusManifest& manifest, const SplitCounts& per_speaker, Rng& rng) {
  validate(manifest);
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& e : manifest.entries) by_speaker[e.speaker_id].push_back(e.video_id);

  require(per_speaker.small <= per_speaker.full, "split_dataset: small split cannot exceed the full split");
  const std::size_t need = per_speaker.full + per_speaker.test;

  DatasetSplit small{kSplitSmall, {}, SplitRole::Train};
  DatasetSplit full{kSplitFull, {}, SplitRole::Train};
  DatasetSplit test{kSplitTest, {}, SplitRole::Test};
  for (auto& [speaker, videos] : by_speaker) {
    if (videos.size() < need)
      fail(ErrorKind::InvalidArgument, "split_dataset: speaker " + speaker + " has " +
                                           std::to_string(videos.size()) + " videos, needs " +
                                           std::to_string(need));
    std::sort(videos.begin(), videos.end());
    rng.shuffle(videos.begin(), videos.end());
    auto it = videos.begin();
    test.video_ids.insert(test.video_ids.end(), it, it + static_cast<std::ptrdiff_t>(per_speaker.test));
    it += static_cast<std::ptrdiff_t>(per_speaker.test);
    full.video_ids.insert(full.video_ids.end(), it, it + static_cast<std::ptrdiff_t>(per_speaker.full));
    small.video_ids.insert(small.video_ids.end(), it, it + static_cast<std::ptrdiff_t>(per_speaker.small));
  }
  for (auto* s : {&small, &full, &test}) std::sort(s->video_ids.begin(), s->video_ids.end());
  return {small, full, test};
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioSignal load_wav(const fs::path& path, double expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorKind::Format, name + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = read_u32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) fail(ErrorKind::Format, name + ": truncated chunk");
    if (std::memcmp(&bytes[pos], "fmt ", 4) == 0) {
      if (len < 16) fail(ErrorKind::Format, name + ": short fmt chunk");
      format = read_u16(&bytes[body]);
      channels = read_u16(&bytes[body + 2]);
      rate = read_u32(&bytes[body + 4]);
      bits = read_u16(&bytes[body + 14]);
      have_fmt = true;
    } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
      if (!have_fmt) fail(ErrorKind::Format, name + ": data chunk before fmt chunk");
      if (format != 1) fail(ErrorKind::Format, name + ": compressed or non-PCM format " + std::to_string(format));
      if (channels != 1) fail(ErrorKind::Format, name + ": expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16) fail(ErrorKind::Format, name + ": expected 16-bit samples, got " + std::to_string(bits));
      if (static_cast<double>(rate) != expected_rate)
        fail(ErrorKind::Format, name + ": sample rate " + std::to_string(rate) + " Hz, expected " +
                                    std::to_string(static_cast<long long>(expected_rate)) + " Hz");
      AudioSignal signal;
      signal.sample_rate = rate;
      signal.samples.resize(len / 2);
      for (std::size_t i = 0; i < signal.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(&bytes[body + 2 * i]));
        signal.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return signal;
    }
    pos = body + len + (len & 1);
  }
  fail(ErrorKind::Format, name + ": no data chunk");
}

void write_wav(const fs::path& path, const AudioSignal& signal) {
  const auto rate = static_cast<std::uint32_t>(signal.sample_rate);
  const auto data_len = static_cast<std::uint32_t>(signal.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (double s : signal.samples) {
    const long v = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace ganlip
