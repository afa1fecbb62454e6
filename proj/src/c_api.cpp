#include "ganlip/ganlip.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "ganlip/error.hpp"
#include "ganlip/media_io.hpp"
#include "ganlip/metrics.hpp"
#include "ganlip/pipeline.hpp"
#include "ganlip/toy_data.hpp"
#include "ganlip/trainer.hpp"

struct ganlip_image {
  ganlip::ImageTensor tensor;
};
struct ganlip_config {
  ganlip::TrainConfig config;
};
struct ganlip_train_log {
  ganlip::TrainLog log;
};
struct ganlip_report {
  ganlip::RunReport report;
};

namespace {

thread_local std::string g_last_error;

ganlip_status status_of(ganlip::ErrorKind kind) {
  switch (kind) {
    case ganlip::ErrorKind::InvalidArgument: return GANLIP_INVALID_ARGUMENT;
    case ganlip::ErrorKind::Io: return GANLIP_IO;
    case ganlip::ErrorKind::Format: return GANLIP_FORMAT;
    case ganlip::ErrorKind::Numeric: return GANLIP_NUMERIC;
  }
  return GANLIP_INTERNAL;
}

// Runs f, translating exceptions into status codes.
template <class F>
ganlip_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return GANLIP_OK;
  } catch (const ganlip::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return GANLIP_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GANLIP_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GANLIP_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return GANLIP_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) ganlip::fail(ganlip::ErrorKind::InvalidArgument, std::string(what) + " must not be NULL");
}

std::string str(const char* s) { return s ? s : ""; }

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ganlip_version(void) { return "0.1.0"; }

const char* ganlip_last_error(void) { return g_last_error.c_str(); }

const char* ganlip_status_name(ganlip_status status) {
  switch (status) {
    case GANLIP_OK: return "ok";
    case GANLIP_INVALID_ARGUMENT: return "invalid argument";
    case GANLIP_IO: return "io error";
    case GANLIP_FORMAT: return "format error";
    case GANLIP_NUMERIC: return "numeric error";
    case GANLIP_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int ganlip_status_exit_code(ganlip_status status) {
  switch (status) {
    case GANLIP_OK: return 0;
    case GANLIP_INVALID_ARGUMENT:
    case GANLIP_IO:
    case GANLIP_FORMAT: return 2;
    default: return 1;
  }
}

void ganlip_string_free(char* s) { std::free(s); }

ganlip_status ganlip_image_create(size_t height, size_t width, size_t channels, const double* data,
                                  ganlip_image** out) {
  return guarded([&] {
    need(out, "out");
    need(data, "data");
    ganlip::require(height > 0 && width > 0 && (channels == 1 || channels == 3), "image: bad shape");
    auto img = new ganlip_image{ganlip::ImageTensor(height, width, channels)};
    std::memcpy(img->tensor.data.data(), data, img->tensor.size() * sizeof(double));
    *out = img;
  });
}

ganlip_status ganlip_image_load(const char* path, ganlip_image** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ganlip_image{ganlip::load_frame(path)};
  });
}

ganlip_status ganlip_image_save(const ganlip_image* image, const char* path) {
  return guarded([&] {
    need(image, "image");
    need(path, "path");
    ganlip::save_png(path, image->tensor);
  });
}

ganlip_status ganlip_image_shape(const ganlip_image* image, size_t* height, size_t* width, size_t* channels) {
  return guarded([&] {
    need(image, "image");
    if (height) *height = image->tensor.height;
    if (width) *width = image->tensor.width;
    if (channels) *channels = image->tensor.channels;
  });
}

const double* ganlip_image_data(const ganlip_image* image) { return image ? image->tensor.data.data() : nullptr; }

void ganlip_image_free(ganlip_image* image) { delete image; }

ganlip_status ganlip_ssim(const ganlip_image* a, const ganlip_image* b, double* out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = ganlip::ssim(a->tensor, b->tensor);
  });
}

ganlip_status ganlip_psnr(const ganlip_image* a, const ganlip_image* b, double* out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = ganlip::psnr(a->tensor, b->tensor);
  });
}

ganlip_status ganlip_fid_from_files(const char* real_emb1, const char* fake_emb1, double* out) {
  return guarded([&] {
    need(real_emb1, "real_emb1");
    need(fake_emb1, "fake_emb1");
    need(out, "out");
    *out = ganlip::frechet_distance(ganlip::gaussian_stats(ganlip::read_emb1(real_emb1)),
                                    ganlip::gaussian_stats(ganlip::read_emb1(fake_emb1)));
  });
}

ganlip_status ganlip_config_new(ganlip_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ganlip_config{};
  });
}

ganlip_status ganlip_config_load(const char* path, ganlip_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ganlip_config{ganlip::load_train_config(path)};
  });
}

ganlip_status ganlip_config_set(ganlip_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    ganlip::set_field(config->config, key, value);
  });
}

ganlip_status ganlip_config_to_json(const ganlip_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup(ganlip::to_json(config->config).dump(2));
  });
}

void ganlip_config_free(ganlip_config* config) { delete config; }

void ganlip_preprocess_options_init(ganlip_preprocess_options* opts) {
  if (!opts) return;
  const ganlip::PreprocessOptions defaults;
  *opts = ganlip_preprocess_options{};
  opts->image_size = defaults.image_size;
  opts->alpha_max = defaults.alpha_max;
  opts->seed = defaults.seed;
}

ganlip_status ganlip_preprocess(const ganlip_preprocess_options* opts, ganlip_preprocess_summary* out) {
  return guarded([&] {
    need(opts, "opts");
    need(opts->manifest, "manifest");
    need(opts->out_dir, "out_dir");
    ganlip::PreprocessOptions p;
    p.manifest = opts->manifest;
    p.out_dir = opts->out_dir;
    if (opts->mel_overrides_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(opts->mel_overrides_json);
      } catch (const nlohmann::json::exception& e) {
        ganlip::fail(ganlip::ErrorKind::InvalidArgument, std::string("mel overrides: ") + e.what());
      }
      p.mel = ganlip::apply_mel_overrides(p.mel, j);
    }
    p.image_size = opts->image_size;
    p.alpha_max = opts->alpha_max;
    p.seed = opts->seed;
    if (opts->write_splits) p.splits = ganlip::SplitCounts{};
    const ganlip::PreprocessSummary s = ganlip::preprocess(p);
    if (out) *out = {s.n_videos, s.n_frames, s.n_pairs, s.n_mel_files};
  });
}

ganlip_status ganlip_write_toy_corpus(uint64_t seed, size_t n_videos, size_t frames_per_video, size_t image_size,
                                      const char* dir, char** manifest_path) {
  return guarded([&] {
    need(dir, "dir");
    ganlip::ToyCorpusConfig cfg;
    cfg.seed = seed;
    if (n_videos) cfg.n_videos = n_videos;
    if (frames_per_video) cfg.frames_per_video = frames_per_video;
    if (image_size) cfg.image_size = image_size;
    const auto path = ganlip::write_toy_corpus(ganlip::make_toy_dataset(cfg), dir);
    if (manifest_path) *manifest_path = dup(path.string());
  });
}

ganlip_status ganlip_train(const char* model, const ganlip_config* config, const char* data_dir, const char* split,
                           int toy, const char* out_dir, ganlip_train_log** out) {
  return guarded([&] {
    need(model, "model");
    need(config, "config");
    need(out_dir, "out_dir");
    ganlip::TrainRunOptions o;
    o.model = ganlip::parse_model_kind(model);
    o.config = config->config;
    o.toy = toy != 0;
    if (!o.toy) {
      ganlip::require(data_dir && *data_dir, "train: a data directory is required without --toy");
      o.data_dir = data_dir;
    }
    o.split = str(split);
    o.out_dir = out_dir;
    auto log = new ganlip_train_log{ganlip::run_training(o)};
    if (out) *out = log;
    else delete log;
  });
}

ganlip_status ganlip_train_log_counts(const ganlip_train_log* log, size_t* iterations, size_t* generator_updates,
                                      size_t* discriminator_updates, size_t* records) {
  return guarded([&] {
    need(log, "log");
    if (iterations) *iterations = log->log.iterations;
    if (generator_updates) *generator_updates = log->log.generator_updates;
    if (discriminator_updates) *discriminator_updates = log->log.discriminator_updates;
    if (records) *records = log->log.records.size();
  });
}

ganlip_status ganlip_train_log_csv(const ganlip_train_log* log, char** out) {
  return guarded([&] {
    need(log, "log");
    need(out, "out");
    *out = dup(ganlip::train_log_csv(log->log));
  });
}

void ganlip_train_log_free(ganlip_train_log* log) { delete log; }

void ganlip_evaluate_options_init(ganlip_evaluate_options* opts) {
  if (!opts) return;
  *opts = ganlip_evaluate_options{};
  opts->seed = ganlip::EvaluateOptions{}.seed;
}

ganlip_status ganlip_evaluate(const ganlip_evaluate_options* opts, ganlip_report** out) {
  return guarded([&] {
    need(opts, "opts");
    ganlip::EvaluateOptions e;
    e.ground_truth = opts->ground_truth != 0;
    if (!e.ground_truth) {
      ganlip::require(opts->checkpoint && *opts->checkpoint, "evaluate: a checkpoint is required");
      e.checkpoint = opts->checkpoint;
    }
    e.toy = opts->toy != 0;
    if (!e.toy) {
      ganlip::require(opts->data_dir && *opts->data_dir, "evaluate: a data directory is required without --toy");
      e.data_dir = opts->data_dir;
    }
    e.split = str(opts->split);
    e.seed = opts->seed;
    e.embeddings_real = str(opts->embeddings_real);
    e.embeddings_fake = str(opts->embeddings_fake);
    e.model_label = str(opts->model_label);
    e.out_dir = str(opts->out_dir);
    e.threads = opts->threads;
    auto report = new ganlip_report{ganlip::evaluate(e)};
    if (out) *out = report;
    else delete report;
  });
}

ganlip_status ganlip_report_load(const char* path, ganlip_report** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ganlip_report{ganlip::load_report(path)};
  });
}

ganlip_status ganlip_report_json(const ganlip_report* report, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    *out = dup(ganlip::to_json(report->report).dump(2));
  });
}

ganlip_status ganlip_report_wall_time(const ganlip_report* report, double* seconds) {
  return guarded([&] {
    need(report, "report");
    need(seconds, "seconds");
    *seconds = report->report.wall_time_s;
  });
}

void ganlip_report_free(ganlip_report* report) { delete report; }

ganlip_status ganlip_compare_reports(const ganlip_report* const* reports, size_t n, const char* out_dir,
                                     char** table_text) {
  return guarded([&] {
    need(reports, "reports");
    std::vector<ganlip::RunReport> list;
    for (size_t i = 0; i < n; ++i) {
      need(reports[i], "report");
      list.push_back(reports[i]->report);
    }
    const ganlip::Comparison c =
        out_dir ? ganlip::write_comparison(list, out_dir) : ganlip::compare_reports(list);
    if (table_text) *table_text = dup(c.table_text);
  });
}

}  // extern "C"
