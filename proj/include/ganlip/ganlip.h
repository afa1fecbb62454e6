/* C interface of the ganlip shared library.
 *
 * Every fallible call returns a ganlip_status. On failure the message is
 * available from ganlip_last_error() on the same thread until the next call.
 * Strings returned through char** are owned by the caller and released with
 * ganlip_string_free(). Handles are released with their *_free function;
 * passing NULL to a free function is a no-op.
 */
#ifndef GANLIP_H
#define GANLIP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GANLIP_API __declspec(dllexport)
#else
#define GANLIP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ganlip_status {
  GANLIP_OK = 0,
  GANLIP_INVALID_ARGUMENT = 1,
  GANLIP_IO = 2,
  GANLIP_FORMAT = 3,
  GANLIP_NUMERIC = 4,
  GANLIP_INTERNAL = 5
} ganlip_status;

GANLIP_API const char* ganlip_version(void);
GANLIP_API const char* ganlip_last_error(void);
GANLIP_API const char* ganlip_status_name(ganlip_status status);
/* Process exit code for a status: 0 ok, 1 numeric/internal, 2 usage/input. */
GANLIP_API int ganlip_status_exit_code(ganlip_status status);
GANLIP_API void ganlip_string_free(char* s);

/* Images: H x W x C doubles in [0, 1], row-major with interleaved channels. */
typedef struct ganlip_image ganlip_image;

GANLIP_API ganlip_status ganlip_image_create(size_t height, size_t width, size_t channels, const double* data,
                                             ganlip_image** out);
GANLIP_API ganlip_status ganlip_image_load(const char* path, ganlip_image** out);
GANLIP_API ganlip_status ganlip_image_save(const ganlip_image* image, const char* path);
GANLIP_API ganlip_status ganlip_image_shape(const ganlip_image* image, size_t* height, size_t* width,
                                            size_t* channels);
GANLIP_API const double* ganlip_image_data(const ganlip_image* image);
GANLIP_API void ganlip_image_free(ganlip_image* image);

GANLIP_API ganlip_status ganlip_ssim(const ganlip_image* a, const ganlip_image* b, double* out);
/* +inf for identical images. */
GANLIP_API ganlip_status ganlip_psnr(const ganlip_image* a, const ganlip_image* b, double* out);
/* Frechet distance between Gaussians fitted to two EMB1 embedding files. */
GANLIP_API ganlip_status ganlip_fid_from_files(const char* real_emb1, const char* fake_emb1, double* out);

/* Training configuration. Defaults follow the reference protocol. */
typedef struct ganlip_config ganlip_config;

GANLIP_API ganlip_status ganlip_config_new(ganlip_config** out);
/* Unknown keys in the JSON file are rejected. */
GANLIP_API ganlip_status ganlip_config_load(const char* path, ganlip_config** out);
/* Sets one field from text, e.g. ("n_critic", "5") or ("gp_input_mode", "gen"). */
GANLIP_API ganlip_status ganlip_config_set(ganlip_config* config, const char* key, const char* value);
GANLIP_API ganlip_status ganlip_config_to_json(const ganlip_config* config, char** out);
GANLIP_API void ganlip_config_free(ganlip_config* config);

typedef struct ganlip_preprocess_options {
  const char* manifest;
  const char* out_dir;
  /* JSON object overriding mel settings (sample_rate, fft_size, hop, ...). NULL keeps defaults. */
  const char* mel_overrides_json;
  size_t image_size;
  int alpha_max;
  uint64_t seed;
  /* Nonzero writes splits.json with the small/full/test partition. */
  int write_splits;
} ganlip_preprocess_options;

typedef struct ganlip_preprocess_summary {
  size_t n_videos;
  size_t n_frames;
  size_t n_pairs;
  size_t n_mel_files;
} ganlip_preprocess_summary;

GANLIP_API void ganlip_preprocess_options_init(ganlip_preprocess_options* opts);
GANLIP_API ganlip_status ganlip_preprocess(const ganlip_preprocess_options* opts, ganlip_preprocess_summary* out);

/* Writes a synthetic corpus (PNG frames, WAV audio, manifest.jsonl) under dir. */
GANLIP_API ganlip_status ganlip_write_toy_corpus(uint64_t seed, size_t n_videos, size_t frames_per_video,
                                                 size_t image_size, const char* dir, char** manifest_path);

/* Training. model is "lipgan" or "l1wgan-gp". data_dir is ignored when toy is nonzero. */
typedef struct ganlip_train_log ganlip_train_log;

GANLIP_API ganlip_status ganlip_train(const char* model, const ganlip_config* config, const char* data_dir,
                                      const char* split, int toy, const char* out_dir, ganlip_train_log** out);
GANLIP_API ganlip_status ganlip_train_log_counts(const ganlip_train_log* log, size_t* iterations,
                                                 size_t* generator_updates, size_t* discriminator_updates,
                                                 size_t* records);
GANLIP_API ganlip_status ganlip_train_log_csv(const ganlip_train_log* log, char** out);
GANLIP_API void ganlip_train_log_free(ganlip_train_log* log);

typedef struct ganlip_evaluate_options {
  const char* checkpoint; /* ignored with ground_truth */
  const char* data_dir;
  const char* split;
  int toy;
  uint64_t seed;
  int ground_truth;
  const char* embeddings_real; /* EMB1 files: both or neither */
  const char* embeddings_fake;
  const char* model_label;
  const char* out_dir;
  size_t threads; /* 0: GANLIP_THREADS or hardware concurrency */
} ganlip_evaluate_options;

typedef struct ganlip_report ganlip_report;

GANLIP_API void ganlip_evaluate_options_init(ganlip_evaluate_options* opts);
GANLIP_API ganlip_status ganlip_evaluate(const ganlip_evaluate_options* opts, ganlip_report** out);
GANLIP_API ganlip_status ganlip_report_load(const char* path, ganlip_report** out);
GANLIP_API ganlip_status ganlip_report_json(const ganlip_report* report, char** out);
GANLIP_API ganlip_status ganlip_report_wall_time(const ganlip_report* report, double* seconds);
GANLIP_API void ganlip_report_free(ganlip_report* report);

/* Side-by-side comparison of n run reports; writes comparison.txt, comparison.csv
 * and boxplot.json into out_dir when it is not NULL. */
GANLIP_API ganlip_status ganlip_compare_reports(const ganlip_report* const* reports, size_t n, const char* out_dir,
                                                char** table_text);

#ifdef __cplusplus
}
#endif

#endif /* GANLIP_H */
