#include <doctest.h>

#include <cmath>

#include "ganlip/error.hpp"
#include "ganlip/ganlip.h"
#include "ganlip/pipeline.hpp"
#include "ganlip/toy_data.hpp"
#include "helpers.hpp"

using namespace ganlip;
namespace fs = std::filesystem;

namespace {

fs::path small_corpus(const std::string& name) {
  ToyCorpusConfig cfg;
  cfg.n_videos = 2;
  cfg.frames_per_video = 10;
  return write_toy_corpus(make_toy_dataset(cfg), temp_dir(name));
}

PreprocessOptions small_options(const fs::path& manifest, const fs::path& out) {
  PreprocessOptions o;
  o.manifest = manifest;
  o.out_dir = out;
  o.image_size = 16;
  return o;
}

std::string dir_bytes(const fs::path& dir) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + slurp(f);
  return all;
}

}  // namespace

TEST_CASE("preprocess writes a deterministic store") {
  const fs::path manifest = small_corpus("pre_corpus");
  const fs::path root = temp_dir("pre_out");
  const PreprocessSummary s = preprocess(small_options(manifest, root / "a"));
  CHECK(s.n_videos == 2);
  CHECK(s.n_frames == 20);
  CHECK(s.n_pairs == 20);
  CHECK(s.n_mel_files == 20);
  preprocess(small_options(manifest, root / "b"));
  CHECK(dir_bytes(root / "a") == dir_bytes(root / "b"));

  const PairSet set = load_store(root / "a");
  REQUIRE(set.pairs.size() == 20);
  CHECK(set.video_ids.size() == 20);
  CHECK(set.pairs[0].audio->n_mels() == 80);
  CHECK(set.pairs[0].audio->n_frames() == 27);
  CHECK(set.pairs[0].target->height == 16);
  CHECK_THROWS_AS(load_store(root / "a", "train_small"), Error);  // no splits written
}

TEST_CASE("preprocess input errors") {
  const fs::path manifest = small_corpus("pre_err");
  const fs::path out = temp_dir("pre_err_out");

  spit(out / "empty.jsonl", "");
  try {
    preprocess(small_options(out / "empty.jsonl", out / "x"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }

  PreprocessOptions rate = small_options(manifest, out / "rate");
  rate.mel.sample_rate = 22050;
  rate.mel.fmax = 7600;
  CHECK_THROWS_AS(preprocess(rate), Error);

  // Remove one frame of the first video.
  for (const auto& e : fs::recursive_directory_iterator(manifest.parent_path()))
    if (e.path().filename() == "frame_00003.png") {
      fs::remove(e.path());
      break;
    }
  CHECK_THROWS_AS(preprocess(small_options(manifest, out / "missing")), Error);
}

TEST_CASE("mel overrides") {
  const MelConfig m = apply_mel_overrides(MelConfig{}, nlohmann::json{{"n_mels", 40}, {"hop", 160}});
  CHECK(m.n_mels == 40);
  CHECK(m.hop == 160);
  CHECK(m.fft_size == 800);
  CHECK(apply_mel_overrides(MelConfig{}, to_json(m)).n_mels == 40);
  CHECK_THROWS_AS(apply_mel_overrides(MelConfig{}, nlohmann::json{{"hopp", 1}}), Error);
  CHECK_THROWS_AS(apply_mel_overrides(MelConfig{}, nlohmann::json{{"hop", -200}}), Error);
  CHECK_THROWS_AS(apply_mel_overrides(MelConfig{}, nlohmann::json{{"n_mels", 2.5}}), Error);
}

TEST_CASE("ground-truth evaluation on a store") {
  const fs::path manifest = small_corpus("gt_corpus");
  const fs::path root = temp_dir("gt_out");
  preprocess(small_options(manifest, root / "store"));
  EvaluateOptions o;
  o.data_dir = root / "store";
  o.ground_truth = true;
  o.out_dir = root / "eval";
  const RunReport r = evaluate(o);
  CHECK(r.fid == 0.0);
  CHECK(r.ssim.mean == doctest::Approx(1.0));
  CHECK(r.psnr_infinite == 20);
  CHECK(std::isinf(r.psnr.mean));
  for (const char* f : {"per_frame.csv", "summary.json", "report.json", "timing.json"}) CHECK(fs::exists(o.out_dir / f));
  const RunReport back = load_report(o.out_dir / "report.json");
  CHECK(std::isinf(back.psnr.median));
  CHECK(back.psnr_infinite == 20);
  CHECK(back.embedder == r.embedder);
}

TEST_CASE("checkpoint evaluation: thread count does not change results") {
  const fs::path root = temp_dir("eval_threads");
  TrainRunOptions t;
  t.model = ModelKind::LipGan;
  t.toy = true;
  t.config.batch_size = 32;
  t.config.max_iterations = 10;
  t.config.hidden_width = 32;
  t.config.sample_count = 4;
  t.out_dir = root / "run";
  run_training(t);
  CHECK(fs::exists(root / "run" / "model.ckpt"));
  CHECK(fs::exists(root / "run" / "train_log.csv"));

  EvaluateOptions o;
  o.checkpoint = root / "run" / "model.ckpt";
  o.toy = true;
  o.threads = 1;
  o.out_dir = root / "e1";
  const RunReport a = evaluate(o);
  o.threads = 4;
  o.out_dir = root / "e4";
  const RunReport b = evaluate(o);
  CHECK(slurp(root / "e1" / "per_frame.csv") == slurp(root / "e4" / "per_frame.csv"));
  CHECK(slurp(root / "e1" / "report.json") == slurp(root / "e4" / "report.json"));
  CHECK(a.fid == b.fid);
  CHECK(a.fid > 0.0);

  // A checkpoint for a different face size does not fit the toy pairs.
  const fs::path store_manifest = small_corpus("eval_mismatch");
  PreprocessOptions p = small_options(store_manifest, root / "store24");
  p.image_size = 24;
  preprocess(p);
  o.toy = false;
  o.data_dir = root / "store24";
  o.out_dir = root / "bad";
  try {
    evaluate(o);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("comparison refuses reports from different embedders") {
  RunReport a, b;
  a.model = "a";
  b.model = "b";
  a.ssim = b.ssim = summarize(std::vector<double>{0.5, 0.6});
  a.psnr = b.psnr = summarize(std::vector<double>{20, 21});
  a.embedder = "toy-embedder";
  b.embedder = "emb1";
  CHECK_THROWS_AS(compare_reports({a, b}), Error);
  b.embedder = a.embedder;
  b.fid = -1;
  CHECK_NOTHROW(compare_reports({a, b}));
  CHECK_THROWS_AS(compare_reports({}), Error);
}

TEST_CASE("sample grid layout") {
  std::vector<ImageTensor> gen(3, ImageTensor(4, 4, 3, 0.25)), truth(3, ImageTensor(4, 4, 3, 0.75));
  const ImageTensor g = sample_grid(gen, truth, 2);
  CHECK(g.channels == 3);
  CHECK(g.height == 8);
  CHECK(g.width == 16);
  CHECK(g.at(0, 0, 0) == 0.25);
  CHECK(g.at(0, 5, 0) == 0.75);
  CHECK(g.at(4, 1, 0) == 0.25);
  CHECK(g.at(4, 9, 0) == 1.0);  // empty slot stays white
  CHECK_THROWS_AS(sample_grid(gen, std::vector<ImageTensor>(2, ImageTensor(4, 4, 3)), 2), Error);
}

TEST_CASE("c api: status codes and exit codes") {
  CHECK(std::string(ganlip_status_name(GANLIP_OK)) == "ok");
  CHECK(ganlip_status_exit_code(GANLIP_OK) == 0);
  CHECK(ganlip_status_exit_code(GANLIP_INVALID_ARGUMENT) == 2);
  CHECK(ganlip_status_exit_code(GANLIP_IO) == 2);
  CHECK(ganlip_status_exit_code(GANLIP_FORMAT) == 2);
  CHECK(ganlip_status_exit_code(GANLIP_NUMERIC) == 1);
  CHECK(ganlip_status_exit_code(GANLIP_INTERNAL) == 1);

  ganlip_image* img = nullptr;
  CHECK(ganlip_image_load("/nonexistent/x.png", &img) != GANLIP_OK);
  CHECK(img == nullptr);
  CHECK(std::string(ganlip_last_error()).size() > 0);

  ganlip_image *a = nullptr, *b = nullptr;
  const std::vector<double> pixels(256, 0.5);
  REQUIRE(ganlip_image_create(16, 16, 1, pixels.data(), &a) == GANLIP_OK);
  REQUIRE(ganlip_image_create(16, 16, 1, pixels.data(), &b) == GANLIP_OK);
  double s = 0;
  CHECK(ganlip_ssim(a, b, &s) == GANLIP_OK);
  CHECK(s == doctest::Approx(1.0));
  double p = 0;
  CHECK(ganlip_psnr(a, b, &p) == GANLIP_OK);
  CHECK(std::isinf(p));
  CHECK(ganlip_ssim(a, nullptr, &s) == GANLIP_INVALID_ARGUMENT);
  ganlip_image_free(a);
  ganlip_image_free(b);

  ganlip_config* cfg = nullptr;
  REQUIRE(ganlip_config_new(&cfg) == GANLIP_OK);
  CHECK(ganlip_config_set(cfg, "n_critic", "3") == GANLIP_OK);
  CHECK(ganlip_config_set(cfg, "n_critic", "-3") != GANLIP_OK);
  CHECK(ganlip_config_set(cfg, "nope", "1") != GANLIP_OK);
  char* json = nullptr;
  REQUIRE(ganlip_config_to_json(cfg, &json) == GANLIP_OK);
  CHECK(nlohmann::json::parse(json)["n_critic"] == 3);
  ganlip_string_free(json);
  ganlip_config_free(cfg);

  ganlip_preprocess_options opts;
  ganlip_preprocess_options_init(&opts);
  const fs::path dir = temp_dir("capi");
  spit(dir / "empty.jsonl", "");
  const std::string manifest = (dir / "empty.jsonl").string(), out = (dir / "out").string();
  opts.manifest = manifest.c_str();
  opts.out_dir = out.c_str();
  ganlip_preprocess_summary summary;
  CHECK(ganlip_preprocess(&opts, &summary) == GANLIP_INVALID_ARGUMENT);
}
