#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganlip/media_io.hpp"
#include "ganlip/melspec.hpp"
#include "ganlip/metrics.hpp"
#include "ganlip/toy_data.hpp"
#include "ganlip/trainer.hpp"

namespace ganlip {

// Preprocessed store layout:
//   index.jsonl, mel_config.json, splits.json (optional)
//   videos/<id>/frame_%05d.png, videos/<id>/mel_%05d.mel, videos/<id>/pairs.csv
struct PreprocessOptions {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  MelConfig mel;
  std::size_t image_size = 96;
  int alpha_max = 6;
  std::uint64_t seed = 10;
  std::optional<SplitCounts> splits;
};

struct PreprocessSummary {
  std::size_t n_videos = 0;
  std::size_t n_frames = 0;
  std::size_t n_pairs = 0;
  std::size_t n_mel_files = 0;
};

PreprocessSummary preprocess(const PreprocessOptions& opts);

// Copies the keys present in `j` over `base`; unknown keys are rejected.
MelConfig apply_mel_overrides(MelConfig base, const nlohmann::json& j);
nlohmann::json to_json(const MelConfig& m);

struct PairSet {
  std::vector<FramePair> pairs;
  std::vector<std::string> video_ids;  // per pair
  MelConfig mel;
};

// Loads every pair of the store, or only those of the named split.
PairSet load_store(const std::filesystem::path& dir, const std::string& split = "");

// Toy corpus pairs: the training part or the held-out part.
PairSet toy_pair_set(std::uint64_t seed, bool held_out);

struct TrainRunOptions {
  ModelKind model = ModelKind::L1WganGp;
  TrainConfig config;
  std::filesystem::path data_dir;  // preprocessed store; ignored with toy
  std::string split;
  bool toy = false;
  std::filesystem::path out_dir;
};

// Writes train_log.csv, config.json, model.ckpt and samples/epoch_%03d.png.
TrainLog run_training(const TrainRunOptions& opts);

struct RunReport {
  std::string model;
  std::string split;
  MetricsSummary ssim;
  MetricsSummary psnr;
  std::size_t psnr_infinite = 0;
  double fid = 0.0;
  std::string embedder;
  nlohmann::json config;
  double wall_time_s = 0.0;
};

struct EvaluateOptions {
  std::filesystem::path checkpoint;  // ignored with ground_truth
  std::filesystem::path data_dir;
  std::string split;
  bool toy = false;
  std::uint64_t seed = 10;
  // Scores the targets against themselves instead of generated frames.
  bool ground_truth = false;
  std::filesystem::path embeddings_real;  // EMB1 files; both or neither
  std::filesystem::path embeddings_fake;
  std::string model_label;
  std::filesystem::path out_dir;
  std::size_t threads = 0;  // 0: GANLIP_THREADS or hardware concurrency
};

// Writes per_frame.csv, summary.json and report.json.
RunReport evaluate(const EvaluateOptions& opts);

nlohmann::json to_json(const MetricsSummary& s);
nlohmann::json summary_json(const std::string& metric, const std::string& model, const MetricsSummary& s,
                            std::size_t n_infinite);
nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);
RunReport load_report(const std::filesystem::path& path);

struct Comparison {
  std::string table_text;
  std::string table_csv;
  nlohmann::json boxplot;
};

// Best entry per row is marked '*': FID lower, SSIM/PSNR higher. No marks for a single report.
Comparison compare_reports(const std::vector<RunReport>& reports);
// Writes comparison.txt, comparison.csv and boxplot.json.
Comparison write_comparison(const std::vector<RunReport>& reports, const std::filesystem::path& out_dir);

// Sample grid: each row holds pairs of tiles (generated, ground truth).
ImageTensor sample_grid(const std::vector<ImageTensor>& generated, const std::vector<ImageTensor>& truth,
                        std::size_t pairs_per_row = 5);

std::size_t evaluation_threads(std::size_t requested);

}  // namespace ganlip
