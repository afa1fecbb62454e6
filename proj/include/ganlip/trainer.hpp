#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganlip/losses.hpp"
#include "ganlip/media_io.hpp"
#include "ganlip/nn.hpp"

namespace ganlip {

enum class ModelKind { LipGan, L1WganGp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);  // "lipgan" | "l1wgan-gp"
std::string to_string(GpMode mode);
GpMode parse_gp_mode(const std::string& name);  // "interp" | "gen"

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  std::size_t n_critic = 5;
  double lambda_gp = 10.0;
  std::uint64_t seed = 10;
  std::size_t sample_every = 0;  // 0: once per epoch
  std::size_t loss_log_every = 600;
  GpMode gp_input_mode = GpMode::Interpolated;
  double l1_weight = 1.0;
  double adv_weight = 1.0;
  std::size_t hidden_width = 256;
  std::size_t noise_dim = 0;
  std::size_t max_iterations = 0;  // 0: epochs * floor(n / batch_size)
  std::size_t sample_count = 20;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
// Unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);
// Sets one field from its textual value, e.g. ("gp_input_mode", "gen").
void set_field(TrainConfig& cfg, const std::string& key, const std::string& value);

std::size_t iterations_per_epoch(const TrainConfig& cfg, std::size_t n_samples);
std::size_t total_iterations(const TrainConfig& cfg, std::size_t n_samples);

// Pairs flattened into model-range batches, one row per pair.
struct TrainingData {
  FaceShape face;
  AudioShape audio;
  double log_floor = 0.0;
  Matrix targets;     // S
  Matrix references;  // S'
  Matrix synced;      // A
  Matrix unsynced;    // A'
  std::size_t size() const noexcept { return targets.rows; }
};

TrainingData make_training_data(const std::vector<FramePair>& pairs, double log_floor);

// Unset values are NaN and written as empty CSV fields.
struct TrainRecord {
  std::size_t iter = 0;
  double loss_G = 0.0;
  double loss_D = 0.0;
  double loss_face = 0.0;
  double loss_audio = 0.0;
  double gp = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
  double l1 = 0.0;  // reconstruction term of the logged batch; kept in memory only
};

struct TrainLog {
  ModelKind model = ModelKind::LipGan;
  std::vector<TrainRecord> records;
  // Mean |grad_x D| over the penalty points, one entry per iteration (L1WGAN-GP only).
  std::vector<double> critic_grad_norms;
  std::size_t generator_updates = 0;
  std::size_t discriminator_updates = 0;
  std::size_t iterations = 0;
};

// iter,loss_G,loss_D,loss_face,loss_audio,gp,ssim,psnr
std::string train_log_csv(const TrainLog& log);
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

ModelPair make_models(const FaceShape& face, const AudioShape& audio, double log_floor, const TrainConfig& cfg);

struct TrainHooks {
  std::function<void(const TrainRecord&)> on_log;
  // Called at every sampling point with the number of completed iterations.
  std::function<void(std::size_t iter, std::size_t epoch, const ToyGenerator&)> on_sample;
};

struct TrainResult {
  TrainLog log;
  ModelPair models;
};

TrainResult train_l1wgan_gp(const TrainConfig& cfg, const TrainingData& data, const TrainHooks& hooks = {});
TrainResult train_lipgan(const TrainConfig& cfg, const TrainingData& data, const TrainHooks& hooks = {});
TrainResult train(ModelKind kind, const TrainConfig& cfg, const TrainingData& data, const TrainHooks& hooks = {});

}  // namespace ganlip
