#include "ganlip/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "ganlip/error.hpp"
#include "ganlip/nn.hpp"

namespace ganlip {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string numbered(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, i);
  return buf;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// JSON has no infinities; non-finite values are written as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double get_num(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    if (s == "nan") return std::nan("");
    fail(ErrorKind::Format, "expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

MelConfig mel_from_json(const json& j) {
  for (const char* key : {"sample_rate", "fft_size", "hop", "win_length", "n_mels", "fmin", "fmax", "log_floor",
                          "window_frames"})
    if (!j.contains(key)) fail(ErrorKind::Format, std::string("mel_config.json: missing ") + key);
  return apply_mel_overrides(MelConfig{}, j);
}

std::string pairs_csv(const std::vector<FramePair>& pairs) {
  std::string out = "frame_index,alpha\n";
  for (const auto& p : pairs) out += std::to_string(p.frame_index) + "," + std::to_string(p.alpha) + "\n";
  return out;
}

std::vector<std::pair<std::size_t, int>> read_pairs_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("frame_index,alpha", 0) != 0) fail(ErrorKind::Format, path.string() + ": bad header");
  std::vector<std::pair<std::size_t, int>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t idx = 0;
    int alpha = 0;
    if (std::sscanf(line.c_str(), "%zu,%d", &idx, &alpha) != 2)
      fail(ErrorKind::Format, path.string() + ": bad row '" + line + "'");
    out.emplace_back(idx, alpha);
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const MelConfig& m) {
  ordered_json j;
  j["sample_rate"] = m.sample_rate;
  j["fft_size"] = m.fft_size;
  j["hop"] = m.hop;
  j["win_length"] = m.win_length;
  j["n_mels"] = m.n_mels;
  j["fmin"] = m.fmin;
  j["fmax"] = m.fmax;
  j["log_floor"] = m.log_floor;
  j["window_frames"] = m.window_frames;
  return j;
}

MelConfig apply_mel_overrides(MelConfig m, const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::Format, "mel settings must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      auto count = [&key](const json& x) {
        if (!x.is_number_integer() || x.get<long long>() < 0)
          fail(ErrorKind::Format, "mel setting '" + key + "' must be a non-negative integer");
        return x.get<std::size_t>();
      };
      if (key == "sample_rate") m.sample_rate = v.get<double>();
      else if (key == "fft_size") m.fft_size = count(v);
      else if (key == "hop") m.hop = count(v);
      else if (key == "win_length") m.win_length = count(v);
      else if (key == "n_mels") m.n_mels = count(v);
      else if (key == "fmin") m.fmin = v.get<double>();
      else if (key == "fmax") m.fmax = v.get<double>();
      else if (key == "log_floor") m.log_floor = v.get<double>();
      else if (key == "window_frames") m.window_frames = count(v);
      else if (key == "image_size" || key == "alpha_max" || key == "seed") continue;  // store metadata
      else fail(ErrorKind::Format, "unknown mel setting '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("mel settings: ") + e.what());
  }
  validate(m);
  return m;
}

PreprocessSummary preprocess(const PreprocessOptions& opts) {
  validate(opts.mel);
  require(opts.image_size >= 2, "preprocess: image size must be >= 2");
  require(opts.alpha_max >= 1, "preprocess: alpha_max must be >= 1");
  const CorpusManifest manifest = read_manifest(opts.manifest);
  if (manifest.entries.empty()) fail(ErrorKind::InvalidArgument, "preprocess: manifest has no videos");

  std::optional<std::vector<DatasetSplit>> splits;
  if (opts.splits) {
    Rng split_rng(opts.seed + seed_offset::splits);
    splits = split_dataset(manifest, *opts.splits, split_rng);
  }

  fs::create_directories(opts.out_dir / "videos");
  Rng pair_rng(opts.seed + seed_offset::pairs);
  PreprocessSummary summary;
  std::string index;
  for (const auto& e : manifest.entries) {
    const fs::path dst = opts.out_dir / "videos" / e.video_id;
    fs::create_directories(dst);
    std::map<std::size_t, BBox> boxes;
    if (fs::exists(e.frame_dir / "bboxes.csv")) boxes = read_bboxes(e.frame_dir / "bboxes.csv");

    std::vector<std::shared_ptr<const ImageTensor>> frames;
    for (std::size_t i = 0; i < e.n_frames; ++i) {
      const fs::path src = e.frame_dir / numbered("frame_%05zu.png", i);
      if (!fs::exists(src)) fail(ErrorKind::Io, "missing frame " + src.string());
      const ImageTensor raw = load_frame(src);
      const auto it = boxes.find(i);
      const BBox box = it != boxes.end() ? it->second : BBox{0, 0, raw.width, raw.height};
      auto face = std::make_shared<const ImageTensor>(crop_and_resize(raw, box, opts.image_size));
      save_png(dst / numbered("frame_%05zu.png", i), *face);
      frames.push_back(std::move(face));
    }

    if (!fs::exists(e.wav)) fail(ErrorKind::Io, "missing audio " + e.wav.string());
    const AudioSignal audio = load_wav(e.wav, opts.mel.sample_rate);
    if (audio.samples.empty()) fail(ErrorKind::Format, e.wav.string() + ": no samples");
    const MelSpectrogram full = mel_spectrogram(audio, opts.mel);
    std::vector<std::shared_ptr<const MelSpectrogram>> mels;
    for (std::size_t i = 0; i < e.n_frames; ++i) {
      if (static_cast<double>(i) / e.fps * opts.mel.sample_rate > static_cast<double>(audio.samples.size()))
        fail(ErrorKind::InvalidArgument, e.video_id + ": frame " + std::to_string(i) + " lies beyond the audio");
      auto mel = std::make_shared<const MelSpectrogram>(slice_window(full, center_column(i, e.fps, opts.mel), opts.mel));
      write_mel1(dst / numbered("mel_%05zu.mel", i), *mel);
      mels.push_back(std::move(mel));
      ++summary.n_mel_files;
    }

    const std::vector<FramePair> pairs = make_frame_pairs(frames, mels, opts.alpha_max, pair_rng);
    write_text(dst / "pairs.csv", pairs_csv(pairs));

    ordered_json row;
    row["video_id"] = e.video_id;
    row["speaker_id"] = e.speaker_id;
    row["n_frames"] = e.n_frames;
    row["fps"] = e.fps;
    row["n_pairs"] = pairs.size();
    index += row.dump() + "\n";
    ++summary.n_videos;
    summary.n_frames += e.n_frames;
    summary.n_pairs += pairs.size();
  }
  write_text(opts.out_dir / "index.jsonl", index);
  ordered_json mel = to_json(opts.mel);
  mel["image_size"] = opts.image_size;
  mel["alpha_max"] = opts.alpha_max;
  mel["seed"] = opts.seed;
  write_text(opts.out_dir / "mel_config.json", mel.dump(2) + "\n");
  if (splits) {
    ordered_json j;
    for (const auto& s : *splits) {
      j[s.name]["role"] = s.role == SplitRole::Test ? "test" : "train";
      j[s.name]["video_ids"] = s.video_ids;
    }
    write_text(opts.out_dir / "splits.json", j.dump(2) + "\n");
  }
  return summary;
}

PairSet load_store(const fs::path& dir, const std::string& split) {
  PairSet set;
  set.mel = mel_from_json(read_json(dir / "mel_config.json"));

  std::optional<std::set<std::string>> wanted;
  if (!split.empty()) {
    const json splits = read_json(dir / "splits.json");
    if (!splits.contains(split)) fail(ErrorKind::InvalidArgument, "store has no split named " + split);
    wanted = splits[split].at("video_ids").get<std::set<std::string>>();
  }

  std::ifstream in(dir / "index.jsonl");
  if (!in) fail(ErrorKind::Io, "cannot open " + (dir / "index.jsonl").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::Format, "index.jsonl: " + std::string(e.what()));
    }
    const std::string id = row.at("video_id").get<std::string>();
    if (wanted && !wanted->count(id)) continue;
    const auto n = row.at("n_frames").get<std::size_t>();
    const fs::path vdir = dir / "videos" / id;
    std::vector<std::shared_ptr<const ImageTensor>> frames(n);
    std::vector<std::shared_ptr<const MelSpectrogram>> mels(n);
    for (std::size_t i = 0; i < n; ++i) {
      frames[i] = std::make_shared<const ImageTensor>(load_frame(vdir / numbered("frame_%05zu.png", i)));
      mels[i] = std::make_shared<const MelSpectrogram>(read_mel1(vdir / numbered("mel_%05zu.mel", i)));
    }
    for (const auto& [idx, alpha] : read_pairs_csv(vdir / "pairs.csv")) {
      FramePair p;
      p.frame_index = idx;
      p.alpha = alpha;
      if (idx >= n || p.reference_index() >= n || alpha == 0)
        fail(ErrorKind::Format, id + "/pairs.csv: pair out of range");
      p.target = frames[idx];
      p.reference = frames[p.reference_index()];
      p.audio = mels[idx];
      p.unsynced_audio = mels[p.reference_index()];
      set.pairs.push_back(std::move(p));
      set.video_ids.push_back(id);
    }
  }
  if (set.pairs.empty()) fail(ErrorKind::InvalidArgument, "store " + dir.string() + " holds no pairs" +
                                                               (split.empty() ? "" : " for split " + split));
  return set;
}

PairSet toy_pair_set(std::uint64_t seed, bool held_out) {
  ToyCorpusConfig cfg;
  cfg.seed = seed;
  const ToyCorpus corpus = make_toy_dataset(cfg);
  PairSet set;
  set.mel = toy_mel_config();
  ToyPairs pairs = toy_frame_pairs(corpus, set.mel, 6, seed);
  set.pairs = held_out ? std::move(pairs.held_out) : std::move(pairs.train);
  for (const auto& p : set.pairs) {
    // Pairs are emitted video by video; recover ids by matching the shared frame.
    for (const auto& v : corpus.videos) {
      if (p.frame_index < v.frames.size() && v.frames[p.frame_index] == p.target) {
        set.video_ids.push_back(v.video_id);
        break;
      }
    }
  }
  return set;
}

ImageTensor sample_grid(const std::vector<ImageTensor>& generated, const std::vector<ImageTensor>& truth,
                        std::size_t pairs_per_row) {
  require(generated.size() == truth.size() && !generated.empty(), "sample grid: need matching non-empty lists");
  require(pairs_per_row >= 1, "sample grid: pairs_per_row must be >= 1");
  const std::size_t h = generated[0].height, w = generated[0].width, c = generated[0].channels;
  const std::size_t rows = (generated.size() + pairs_per_row - 1) / pairs_per_row;
  const std::size_t cols = std::min(pairs_per_row, generated.size());
  ImageTensor grid(rows * h, cols * 2 * w, c, 1.0);
  for (std::size_t k = 0; k < generated.size(); ++k) {
    const std::size_t oy = (k / pairs_per_row) * h;
    const std::size_t ox = (k % pairs_per_row) * 2 * w;
    for (int side = 0; side < 2; ++side) {
      const ImageTensor& img = side == 0 ? generated[k] : truth[k];
      require(img.height == h && img.width == w && img.channels == c, "sample grid: tiles differ in size");
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          for (std::size_t ch = 0; ch < c; ++ch) grid.at(oy + y, ox + side * w + x, ch) = img.at(y, x, ch);
    }
  }
  return grid;
}

TrainLog run_training(const TrainRunOptions& opts) {
  validate(opts.config);
  const PairSet set = opts.toy ? toy_pair_set(opts.config.seed, false) : load_store(opts.data_dir, opts.split);
  const TrainingData data = make_training_data(set.pairs, set.mel.log_floor);
  fs::create_directories(opts.out_dir / "samples");

  // Fixed, evenly spaced sample pairs.
  const std::size_t count = std::min(opts.config.sample_count, set.pairs.size());
  std::vector<const ImageTensor*> refs, truth_ptrs;
  std::vector<const MelSpectrogram*> auds;
  std::vector<ImageTensor> truth;
  for (std::size_t k = 0; k < count; ++k) {
    const FramePair& p = set.pairs[k * set.pairs.size() / count];
    refs.push_back(p.reference.get());
    auds.push_back(p.audio.get());
    truth.push_back(*p.target);
  }

  TrainHooks hooks;
  if (count > 0) {
    hooks.on_sample = [&](std::size_t iter, std::size_t epoch, const ToyGenerator& g) {
      const std::string name = opts.config.sample_every > 0 ? numbered("iter_%06zu.png", iter)
                                                            : numbered("epoch_%03zu.png", epoch);
      save_png(opts.out_dir / "samples" / name, sample_grid(generate_batch(g, refs, auds), truth));
    };
  }
  TrainResult result = train(opts.model, opts.config, data, hooks);

  write_train_log(opts.out_dir / "train_log.csv", result.log);
  ordered_json snapshot;
  snapshot["model"] = to_string(opts.model);
  snapshot["toy"] = opts.toy;
  snapshot["data"] = opts.toy ? "" : opts.data_dir.string();
  snapshot["split"] = opts.split;
  snapshot["n_pairs"] = set.pairs.size();
  snapshot["iterations"] = result.log.iterations;
  snapshot["generator_updates"] = result.log.generator_updates;
  snapshot["discriminator_updates"] = result.log.discriminator_updates;
  snapshot["train_config"] = to_json(opts.config);
  write_text(opts.out_dir / "config.json", snapshot.dump(2) + "\n");
  write_checkpoint(opts.out_dir / "model.ckpt", to_tensors(result.models));
  return std::move(result.log);
}

std::size_t evaluation_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GANLIP_THREADS")) {
      const long cap = std::strtol(env, nullptr, 10);
      if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    }
  }
  return std::max<std::size_t>(1, n);
}

nlohmann::json to_json(const MetricsSummary& s) {
  ordered_json j;
  j["mean"] = num(s.mean);
  j["median"] = num(s.median);
  j["max"] = num(s.max);
  j["min"] = num(s.min);
  j["q1"] = num(s.q1);
  j["q3"] = num(s.q3);
  j["lower_fence"] = num(s.lower_fence);
  j["upper_fence"] = num(s.upper_fence);
  j["whisker_low"] = num(s.whisker_low);
  j["whisker_high"] = num(s.whisker_high);
  j["n"] = s.n;
  j["n_outliers"] = s.n_outliers;
  return j;
}

namespace {

MetricsSummary summary_from_json(const json& j) {
  MetricsSummary s;
  s.mean = get_num(j.at("mean"));
  s.median = get_num(j.at("median"));
  s.max = get_num(j.at("max"));
  s.min = get_num(j.at("min"));
  s.q1 = get_num(j.at("q1"));
  s.q3 = get_num(j.at("q3"));
  s.lower_fence = get_num(j.at("lower_fence"));
  s.upper_fence = get_num(j.at("upper_fence"));
  s.whisker_low = get_num(j.at("whisker_low"));
  s.whisker_high = get_num(j.at("whisker_high"));
  s.n = j.at("n").get<std::size_t>();
  s.n_outliers = j.at("n_outliers").get<std::size_t>();
  return s;
}

}  // namespace

nlohmann::json summary_json(const std::string& metric, const std::string& model, const MetricsSummary& s,
                            std::size_t n_infinite) {
  ordered_json j;
  j["metric"] = metric;
  j["model"] = model;
  j["mean"] = num(s.mean);
  j["median"] = num(s.median);
  j["max"] = num(s.max);
  j["min"] = num(s.min);
  j["q1"] = num(s.q1);
  j["q3"] = num(s.q3);
  j["n"] = s.n;
  j["n_outliers"] = s.n_outliers;
  j["n_infinite"] = n_infinite;
  return j;
}

nlohmann::json to_json(const RunReport& r) {
  ordered_json j;
  j["model"] = r.model;
  j["split"] = r.split;
  j["fid"] = num(r.fid);
  j["embedder"] = r.embedder;
  j["ssim"] = to_json(r.ssim);
  j["psnr"] = to_json(r.psnr);
  j["psnr_infinite"] = r.psnr_infinite;
  j["config"] = r.config;
  return j;
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    r.model = j.at("model").get<std::string>();
    r.split = j.value("split", "");
    r.fid = get_num(j.at("fid"));
    r.embedder = j.at("embedder").get<std::string>();
    r.ssim = summary_from_json(j.at("ssim"));
    r.psnr = summary_from_json(j.at("psnr"));
    r.psnr_infinite = j.value("psnr_infinite", std::size_t{0});
    r.config = j.value("config", json::object());
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("report: ") + e.what());
  }
  return r;
}

RunReport load_report(const fs::path& path) { return report_from_json(read_json(path)); }

RunReport evaluate(const EvaluateOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const PairSet set = opts.toy ? toy_pair_set(opts.seed, true) : load_store(opts.data_dir, opts.split);
  const std::size_t n = set.pairs.size();

  std::vector<ImageTensor> generated;
  if (opts.ground_truth) {
    for (const auto& p : set.pairs) generated.push_back(*p.target);
  } else {
    const ModelPair models = from_tensors(read_checkpoint(opts.checkpoint));
    const ToyGenerator& g = models.generator;
    const ImageTensor& t0 = *set.pairs.front().target;
    const MelSpectrogram& a0 = *set.pairs.front().audio;
    if (g.face_shape() != FaceShape{t0.height, t0.width, t0.channels} ||
        g.audio_shape() != AudioShape{a0.n_mels(), a0.n_frames()})
      fail(ErrorKind::InvalidArgument, "evaluate: checkpoint shapes do not match the test data");
    constexpr std::size_t kChunk = 256;
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
      const std::size_t end = std::min(n, begin + kChunk);
      std::vector<const ImageTensor*> refs;
      std::vector<const MelSpectrogram*> auds;
      for (std::size_t i = begin; i < end; ++i) {
        refs.push_back(set.pairs[i].reference.get());
        auds.push_back(set.pairs[i].audio.get());
      }
      for (auto& img : generate_batch(g, refs, auds)) generated.push_back(std::move(img));
    }
  }

  // Per-frame metrics in parallel; each worker owns a strided set of indices.
  std::vector<double> ssim_scores(n), psnr_scores(n);
  const std::size_t workers = std::min(evaluation_threads(opts.threads), std::max<std::size_t>(1, n));
  {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) {
            ssim_scores[i] = ssim(generated[i], *set.pairs[i].target);
            psnr_scores[i] = psnr(generated[i], *set.pairs[i].target);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  RunReport report;
  report.model = !opts.model_label.empty() ? opts.model_label
                 : opts.ground_truth       ? "ground-truth"
                                           : opts.checkpoint.stem().string();
  report.split = opts.toy ? "toy-held-out" : (opts.split.empty() ? "all" : opts.split);
  report.ssim = summarize(ssim_scores);
  std::vector<double> finite_psnr;
  for (double v : psnr_scores) {
    if (std::isinf(v)) ++report.psnr_infinite;
    else finite_psnr.push_back(v);
  }
  if (!finite_psnr.empty()) {
    report.psnr = summarize(finite_psnr);
  } else {
    // Every frame is an exact match: all statistics are +inf.
    const double inf = HUGE_VAL;
    report.psnr.mean = report.psnr.median = report.psnr.max = report.psnr.min = inf;
    report.psnr.q1 = report.psnr.q3 = inf;
    report.psnr.lower_fence = report.psnr.upper_fence = report.psnr.whisker_low = report.psnr.whisker_high = inf;
  }

  if (!opts.embeddings_real.empty() || !opts.embeddings_fake.empty()) {
    require(!opts.embeddings_real.empty() && !opts.embeddings_fake.empty(),
            "evaluate: give both real and generated embedding files");
    const EmbeddingSet real = read_emb1(opts.embeddings_real);
    const EmbeddingSet fake = read_emb1(opts.embeddings_fake);
    report.fid = frechet_distance(gaussian_stats(real), gaussian_stats(fake));
    report.embedder = "EMB1:" + opts.embeddings_real.filename().string();
  } else {
    std::vector<ImageTensor> targets;
    for (const auto& p : set.pairs) targets.push_back(*p.target);
    const ToyEmbedder embedder(targets.front().size(), 64, opts.seed + seed_offset::embedder);
    report.fid = frechet_distance(gaussian_stats(embedder.embed_all(targets)), gaussian_stats(embedder.embed_all(generated)));
    report.embedder = embedder.label();
  }

  ordered_json cfg;
  cfg["checkpoint"] = opts.ground_truth ? "" : opts.checkpoint.string();
  cfg["data"] = opts.toy ? "" : opts.data_dir.string();
  cfg["split"] = opts.split;
  cfg["toy"] = opts.toy;
  cfg["seed"] = opts.seed;
  cfg["ground_truth"] = opts.ground_truth;
  cfg["embeddings_real"] = opts.embeddings_real.string();
  cfg["embeddings_fake"] = opts.embeddings_fake.string();
  report.config = cfg;

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    std::string csv = "video_id,frame_index,ssim,psnr_db\n";
    for (std::size_t i = 0; i < n; ++i)
      csv += set.video_ids[i] + "," + std::to_string(set.pairs[i].frame_index) + "," + fmt(ssim_scores[i]) + "," +
             fmt(psnr_scores[i]) + "\n";
    write_text(opts.out_dir / "per_frame.csv", csv);
    const json summaries = json::array({summary_json("ssim", report.model, report.ssim, 0),
                                        summary_json("psnr_db", report.model, report.psnr, report.psnr_infinite)});
    write_text(opts.out_dir / "summary.json", summaries.dump(2) + "\n");
    write_text(opts.out_dir / "report.json", to_json(report).dump(2) + "\n");
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!opts.out_dir.empty()) {
    ordered_json timing;
    timing["wall_time_s"] = report.wall_time_s;
    write_text(opts.out_dir / "timing.json", timing.dump(2) + "\n");
  }
  return report;
}

namespace {

struct Row {
  std::string label;
  bool lower_is_better;
  double (*get)(const RunReport&);
};

const Row kRows[] = {
    {"FID", true, [](const RunReport& r) { return r.fid; }},
    {"SSIM mean", false, [](const RunReport& r) { return r.ssim.mean; }},
    {"SSIM median", false, [](const RunReport& r) { return r.ssim.median; }},
    {"SSIM max", false, [](const RunReport& r) { return r.ssim.max; }},
    {"SSIM min", false, [](const RunReport& r) { return r.ssim.min; }},
    {"PSNR mean", false, [](const RunReport& r) { return r.psnr.mean; }},
    {"PSNR median", false, [](const RunReport& r) { return r.psnr.median; }},
    {"PSNR max", false, [](const RunReport& r) { return r.psnr.max; }},
    {"PSNR min", false, [](const RunReport& r) { return r.psnr.min; }},
};

ordered_json box_json(const MetricsSummary& s) {
  ordered_json j;
  j["q1"] = num(s.q1);
  j["median"] = num(s.median);
  j["q3"] = num(s.q3);
  j["lower_fence"] = num(s.lower_fence);
  j["upper_fence"] = num(s.upper_fence);
  j["whisker_low"] = num(s.whisker_low);
  j["whisker_high"] = num(s.whisker_high);
  j["n_outliers_omitted"] = s.n_outliers;
  return j;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

Comparison compare_reports(const std::vector<RunReport>& reports) {
  if (reports.empty()) fail(ErrorKind::InvalidArgument, "report: need at least one run report");
  for (const auto& r : reports)
    if (r.embedder != reports.front().embedder)
      fail(ErrorKind::InvalidArgument, "report: incompatible metric sets (FID embedders '" + reports.front().embedder +
                                           "' and '" + r.embedder + "')");
  const bool mark = reports.size() > 1;

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"metric"};
  for (const auto& r : reports) header.push_back(r.model);
  cells.push_back(header);
  std::string csv = "metric";
  for (const auto& r : reports) csv += "," + r.model;
  csv += mark ? ",best\n" : "\n";

  for (const Row& row : kRows) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < reports.size(); ++k) {
      const double v = row.get(reports[k]), b = row.get(reports[best]);
      if (row.lower_is_better ? v < b : v > b) best = k;
    }
    std::vector<std::string> line{row.label + (row.lower_is_better ? " (lower)" : " (higher)")};
    csv += row.label;
    for (std::size_t k = 0; k < reports.size(); ++k) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.4f", row.get(reports[k]));
      line.push_back(std::string(buf) + (mark && k == best ? " *" : ""));
      csv += "," + fmt(row.get(reports[k]));
    }
    if (mark) csv += "," + reports[best].model;
    csv += "\n";
    cells.push_back(line);
  }

  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
  std::ostringstream text;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) text << (c ? "  " : "") << pad(cells[r][c], widths[c]);
    text << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w + 2;
      text << std::string(total - 2, '-') << '\n';
    }
  }
  text << "FID embedder: " << reports.front().embedder << '\n';
  if (mark) text << "* best per row\n";

  ordered_json box;
  box["outliers_omitted"] = true;
  box["models"] = json::array();
  for (const auto& r : reports) {
    ordered_json m;
    m["model"] = r.model;
    m["ssim"] = box_json(r.ssim);
    m["psnr"] = box_json(r.psnr);
    box["models"].push_back(m);
  }
  return {text.str(), csv, box};
}

Comparison write_comparison(const std::vector<RunReport>& reports, const fs::path& out_dir) {
  Comparison c = compare_reports(reports);
  fs::create_directories(out_dir);
  write_text(out_dir / "comparison.txt", c.table_text);
  write_text(out_dir / "comparison.csv", c.table_csv);
  write_text(out_dir / "boxplot.json", c.boxplot.dump(2) + "\n");
  return c;
}

}  // namespace ganlip
