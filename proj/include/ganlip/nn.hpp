#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ganlip/autodiff.hpp"
#include "ganlip/image.hpp"
#include "ganlip/matrix.hpp"
#include "ganlip/melspec.hpp"
#include "ganlip/rng.hpp"

namespace ganlip {

enum class Activation { Identity, Relu, LeakyRelu, Tanh };

// Stack of dense layers. Every layer acts on each sample independently;
// there is no layer kind that mixes statistics across a batch.
class Mlp {
 public:
  Mlp() = default;
  // widths = {input, hidden..., output}. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
  Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, Rng& rng);

  // W0, b0, W1, b1, ...; W is fan_in x fan_out, b is 1 x fan_out.
  std::vector<Matrix>& parameters() noexcept { return params_; }
  const std::vector<Matrix>& parameters() const noexcept { return params_; }
  const std::vector<Activation>& activations() const noexcept { return activations_; }

  std::vector<ad::Value> bind(ad::Tape& tape) const;
  ad::Value forward(std::span<const ad::Value> params, ad::Value x) const;

  std::size_t input_dim() const { return params_.front().rows; }
  std::size_t output_dim() const { return params_.back().cols; }
  std::size_t parameter_count() const;

 private:
  std::vector<Matrix> params_;
  std::vector<Activation> activations_;
};

struct FaceShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const FaceShape&, const FaceShape&) = default;
};

struct AudioShape {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::size_t size() const noexcept { return n_mels * n_frames; }
  friend bool operator==(const AudioShape&, const AudioShape&) = default;
};

// Storage range [0, 1] <-> training range [-1, 1].
std::vector<double> to_model_range(const ImageTensor& image);
ImageTensor from_model_range(std::span<const double> values, const FaceShape& shape);
// Log-mel values rescaled so that silence maps to 0.
std::vector<double> audio_features(const MelSpectrogram& mel, double log_floor);

// Maps (S', A[, z]) to a face in [-1, 1] through relu hidden layers and a tanh output.
class ToyGenerator {
 public:
  ToyGenerator() = default;
  ToyGenerator(FaceShape face, AudioShape audio, std::size_t hidden, std::size_t noise_dim, double log_floor,
               Rng& rng);

  // reference: N x face.size(), audio: N x audio.size(), noise: N x noise_dim
  // (ignored when noise_dim == 0). Returns N x face.size() in [-1, 1].
  ad::Value forward(std::span<const ad::Value> params, ad::Value reference, ad::Value audio,
                    ad::Value noise = {}) const;

  Mlp& net() noexcept { return net_; }
  const Mlp& net() const noexcept { return net_; }
  const FaceShape& face_shape() const noexcept { return face_; }
  const AudioShape& audio_shape() const noexcept { return audio_; }
  std::size_t noise_dim() const noexcept { return noise_dim_; }
  double log_floor() const noexcept { return log_floor_; }

 private:
  FaceShape face_;
  AudioShape audio_;
  std::size_t noise_dim_ = 0;
  double log_floor_ = 0.0;
  Mlp net_;
};

// Scores (face, audio) with leaky_relu(0.2) hidden layers and a linear output.
class ToyDiscriminator {
 public:
  ToyDiscriminator() = default;
  ToyDiscriminator(FaceShape face, AudioShape audio, std::size_t hidden, Rng& rng);

  // Returns N x 1 raw scores (critic values, or logits for the LipGAN loss).
  ad::Value forward(std::span<const ad::Value> params, ad::Value face, ad::Value audio) const;

  // True when no layer computes statistics over the batch.
  bool per_sample_only() const;

  Mlp& net() noexcept { return net_; }
  const Mlp& net() const noexcept { return net_; }
  const FaceShape& face_shape() const noexcept { return face_; }
  const AudioShape& audio_shape() const noexcept { return audio_; }

 private:
  FaceShape face_;
  AudioShape audio_;
  Mlp net_;
};

// Generates S-hat for one reference frame and audio window, in storage range.
ImageTensor generate(const ToyGenerator& generator, const ImageTensor& reference, const MelSpectrogram& audio);
// generate() for many pairs in one pass. Rows agree with generate() up to rounding.
std::vector<ImageTensor> generate_batch(const ToyGenerator& generator, std::span<const ImageTensor* const> references,
                                        std::span<const MelSpectrogram* const> audio);

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t t = 0;
};

// Bias-corrected ADAM update, in place.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state, const AdamHyper& hyper);

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

// "CKPT", u32 count, then per tensor: u32 name length, name, u32 rank, u32 dims, float32 data (LE).
void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

struct ModelPair {
  ToyGenerator generator;
  ToyDiscriminator discriminator;
};

std::vector<NamedTensor> to_tensors(const ModelPair& models);
ModelPair from_tensors(std::span<const NamedTensor> tensors);

}  // namespace ganlip
