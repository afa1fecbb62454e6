// ganlip command-line tool. Talks to the library only through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ganlip/ganlip.h"

namespace {

// Thrown after a failed C call; carries the status for the exit code.
struct CallFailed {
  ganlip_status status;
};

void check(ganlip_status s, const char* what) {
  if (s == GANLIP_OK) return;
  std::fprintf(stderr, "ganlip %s: %s: %s\n", what, ganlip_status_name(s), ganlip_last_error());
  throw CallFailed{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ganlip_string_free(s);
  return out;
}

// Handle owner for the C API's free functions.
template <class T, void (*Free)(T*)>
struct Owned {
  T* p = nullptr;
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  Owned(Owned&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~Owned() { Free(p); }
};
using Config = Owned<ganlip_config, ganlip_config_free>;
using Report = Owned<ganlip_report, ganlip_report_free>;
using Log = Owned<ganlip_train_log, ganlip_train_log_free>;

std::string json_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ganlip: talking-face GAN training and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ganlip_version()));

  // preprocess
  std::string pp_manifest, pp_out, pp_mel_config;
  std::size_t pp_image_size = 96;
  int pp_alpha_max = 6;
  std::uint64_t pp_seed = 10;
  bool pp_splits = false;
  std::map<std::string, double> pp_mel;
  auto* pp = app.add_subcommand("preprocess", "Crop frames, compute mel windows and draw frame pairs");
  pp->add_option("manifest", pp_manifest, "Corpus manifest (JSON lines)")->required();
  pp->add_option("--out", pp_out, "Output store directory")->required();
  pp->add_option("--seed", pp_seed, "Root seed");
  pp->add_option("--image-size", pp_image_size, "Side of the square face crops")->check(CLI::Range(2, 4096));
  pp->add_option("--alpha-max", pp_alpha_max, "Largest reference frame shift")->check(CLI::Range(1, 1000));
  pp->add_flag("--splits", pp_splits, "Also write the small/full/test video partition");
  pp->add_option("--mel-config", pp_mel_config, "JSON file with mel settings")->check(CLI::ExistingFile);
  for (const char* key : {"sample-rate", "fft-size", "hop", "win-length", "n-mels", "fmin", "fmax", "window-frames"}) {
    std::string name = key;
    pp->add_option_function<double>("--" + name, [&pp_mel, name](double v) { pp_mel[name] = v; },
                                    "Mel setting override");
  }

  // train
  std::string tr_model = "l1wgan-gp", tr_config, tr_data, tr_split, tr_out;
  bool tr_toy = false;
  std::vector<std::string> tr_sets;
  std::vector<std::pair<std::string, std::string>> tr_overrides;
  auto* tr = app.add_subcommand("train", "Train LipGAN or L1WGAN-GP");
  tr->add_option("--model", tr_model, "Model to train")->check(CLI::IsMember({"lipgan", "l1wgan-gp"}));
  tr->add_option("--config", tr_config, "TrainConfig JSON file")->check(CLI::ExistingFile);
  tr->add_option("--data", tr_data, "Preprocessed store");
  tr->add_option("--split", tr_split, "Split name from the store's splits.json");
  tr->add_flag("--toy", tr_toy, "Train on the synthetic toy corpus");
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--set", tr_sets, "Override any config field, KEY=VALUE");
  const std::vector<std::pair<std::string, std::string>> tr_flag_keys = {
      {"seed", "seed"},
      {"epochs", "epochs"},
      {"batch-size", "batch_size"},
      {"n-critic", "n_critic"},
      {"lambda-gp", "lambda_gp"},
      {"gp-mode", "gp_input_mode"},
      {"lr", "learning_rate"},
      {"max-iterations", "max_iterations"},
      {"log-every", "loss_log_every"},
      {"sample-every", "sample_every"},
      {"sample-count", "sample_count"},
  };
  for (const auto& [flag, key] : tr_flag_keys) {
    auto* opt = tr->add_option_function<std::string>(
        "--" + flag, [&tr_overrides, k = key](const std::string& v) { tr_overrides.emplace_back(k, v); },
        "Sets " + key);
    if (flag == "gp-mode") opt->check(CLI::IsMember({"interp", "gen"}));
  }

  // evaluate
  std::string ev_checkpoint, ev_data, ev_split, ev_real, ev_fake, ev_label, ev_out;
  bool ev_toy = false, ev_truth = false;
  std::uint64_t ev_seed = 10;
  std::size_t ev_threads = 0;
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on test pairs (SSIM, PSNR, FID)");
  ev->add_option("--checkpoint", ev_checkpoint, "Model checkpoint (model.ckpt)");
  ev->add_option("--data", ev_data, "Preprocessed store");
  ev->add_option("--split", ev_split, "Split name, e.g. test");
  ev->add_flag("--toy", ev_toy, "Use the held-out part of the toy corpus");
  ev->add_option("--seed", ev_seed, "Root seed of the toy corpus and embedder");
  ev->add_flag("--ground-truth", ev_truth, "Score the targets against themselves");
  ev->add_option("--emb-real", ev_real, "EMB1 embeddings of real frames")->check(CLI::ExistingFile);
  ev->add_option("--emb-fake", ev_fake, "EMB1 embeddings of generated frames")->check(CLI::ExistingFile);
  ev->add_option("--label", ev_label, "Model name used in reports");
  ev->add_option("--threads", ev_threads, "Worker threads (default: GANLIP_THREADS or all cores)");
  ev->add_option("--out", ev_out, "Output directory")->required();

  // report
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  auto* rp = app.add_subcommand("report", "Compare run reports side by side");
  rp->add_option("reports", rp_inputs, "report.json files or evaluate output directories")->required();
  rp->add_option("--out", rp_out, "Directory for comparison.txt/csv and boxplot.json");

  // toy-corpus
  std::string tc_out;
  std::uint64_t tc_seed = 10;
  std::size_t tc_videos = 0, tc_frames = 0, tc_size = 0;
  auto* tc = app.add_subcommand("toy-corpus", "Write the synthetic corpus as PNG/WAV files with a manifest");
  tc->add_option("--out", tc_out, "Output directory")->required();
  tc->add_option("--seed", tc_seed, "Root seed");
  tc->add_option("--videos", tc_videos, "Number of videos");
  tc->add_option("--frames", tc_frames, "Frames per video");
  tc->add_option("--image-size", tc_size, "Frame side in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (pp->parsed()) {
      std::string overrides = "{";
      if (!pp_mel_config.empty()) {
        // File settings first; flag values are appended and win on duplicate keys.
        std::FILE* f = std::fopen(pp_mel_config.c_str(), "rb");
        if (!f) {
          std::fprintf(stderr, "ganlip preprocess: cannot open %s\n", pp_mel_config.c_str());
          return 2;
        }
        std::string text;
        char buf[4096];
        for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, n);
        std::fclose(f);
        const auto open = text.find('{'), close = text.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open) {
          std::fprintf(stderr, "ganlip preprocess: %s is not a JSON object\n", pp_mel_config.c_str());
          return 2;
        }
        overrides += text.substr(open + 1, close - open - 1);
      }
      for (const auto& [flag, v] : pp_mel) {
        std::string key = flag;
        for (auto& c : key)
          if (c == '-') c = '_';
        if (overrides.find_first_not_of(" \t\r\n", 1) != std::string::npos) overrides += ",";
        overrides += "\"" + key + "\":" + json_number(v);
      }
      overrides += "}";
      ganlip_preprocess_options o;
      ganlip_preprocess_options_init(&o);
      o.manifest = pp_manifest.c_str();
      o.out_dir = pp_out.c_str();
      o.mel_overrides_json = overrides.c_str();
      o.image_size = pp_image_size;
      o.alpha_max = pp_alpha_max;
      o.seed = pp_seed;
      o.write_splits = pp_splits;
      ganlip_preprocess_summary s{};
      check(ganlip_preprocess(&o, &s), "preprocess");
      std::printf("videos %zu  frames %zu  pairs %zu  mel files %zu\nstore: %s\n", s.n_videos, s.n_frames, s.n_pairs,
                  s.n_mel_files, pp_out.c_str());
    } else if (tr->parsed()) {
      if (!tr_toy && tr_data.empty()) {
        std::fprintf(stderr, "ganlip train: give --data DIR or --toy\n");
        return 2;
      }
      Config cfg;
      if (!tr_config.empty()) check(ganlip_config_load(tr_config.c_str(), &cfg.p), "train");
      else check(ganlip_config_new(&cfg.p), "train");
      for (const auto& [k, v] : tr_overrides) check(ganlip_config_set(cfg.p, k.c_str(), v.c_str()), "train");
      for (const auto& kv : tr_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::fprintf(stderr, "ganlip train: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
          return 2;
        }
        check(ganlip_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "train");
      }
      Log log;
      check(ganlip_train(tr_model.c_str(), cfg.p, tr_data.c_str(), tr_split.c_str(), tr_toy, tr_out.c_str(), &log.p),
            "train");
      std::size_t iters = 0, g = 0, d = 0, rows = 0;
      check(ganlip_train_log_counts(log.p, &iters, &g, &d, &rows), "train");
      std::printf("%s: %zu iterations, %zu generator updates, %zu critic updates, %zu log rows\nrun: %s\n",
                  tr_model.c_str(), iters, g, d, rows, tr_out.c_str());
    } else if (ev->parsed()) {
      if (!ev_toy && ev_data.empty()) {
        std::fprintf(stderr, "ganlip evaluate: give --data DIR or --toy\n");
        return 2;
      }
      if (!ev_truth && ev_checkpoint.empty()) {
        std::fprintf(stderr, "ganlip evaluate: give --checkpoint FILE or --ground-truth\n");
        return 2;
      }
      ganlip_evaluate_options o;
      ganlip_evaluate_options_init(&o);
      o.checkpoint = ev_checkpoint.c_str();
      o.data_dir = ev_data.c_str();
      o.split = ev_split.c_str();
      o.toy = ev_toy;
      o.seed = ev_seed;
      o.ground_truth = ev_truth;
      o.embeddings_real = ev_real.c_str();
      o.embeddings_fake = ev_fake.c_str();
      o.model_label = ev_label.c_str();
      o.out_dir = ev_out.c_str();
      o.threads = ev_threads;
      Report report;
      check(ganlip_evaluate(&o, &report.p), "evaluate");
      char* text = nullptr;
      const ganlip_report* one[] = {report.p};
      check(ganlip_compare_reports(one, 1, nullptr, &text), "evaluate");
      double secs = 0;
      check(ganlip_report_wall_time(report.p, &secs), "evaluate");
      std::printf("%swall time %.2f s\nreport: %s\n", take(text).c_str(), secs,
                  (std::filesystem::path(ev_out) / "report.json").c_str());
    } else if (rp->parsed()) {
      std::vector<Report> reports;
      std::vector<const ganlip_report*> ptrs;
      for (const auto& in : rp_inputs) {
        std::filesystem::path path = in;
        if (std::filesystem::is_directory(path)) path /= "report.json";
        Report r;
        check(ganlip_report_load(path.c_str(), &r.p), "report");
        ptrs.push_back(r.p);
        reports.push_back(std::move(r));
      }
      char* text = nullptr;
      check(ganlip_compare_reports(ptrs.data(), ptrs.size(), rp_out.empty() ? nullptr : rp_out.c_str(), &text),
            "report");
      std::fputs(take(text).c_str(), stdout);
    } else if (tc->parsed()) {
      char* manifest = nullptr;
      check(ganlip_write_toy_corpus(tc_seed, tc_videos, tc_frames, tc_size, tc_out.c_str(), &manifest), "toy-corpus");
      std::printf("manifest: %s\n", take(manifest).c_str());
    }
  } catch (const CallFailed& f) {
    return ganlip_status_exit_code(f.status);
  }
  return 0;
}
