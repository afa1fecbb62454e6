#include "ganlip/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "ganlip/error.hpp"

namespace ganlip {

namespace fs = std::filesystem;

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, Rng& rng) {
  require(widths.size() >= 2, "mlp: need at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    require(fan_in > 0 && fan_out > 0, "mlp: zero-width layer");
    Matrix w(fan_in, fan_out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    params_.push_back(std::move(w));
    params_.emplace_back(1, fan_out, 0.0);
    activations_.push_back(l + 2 == widths.size() ? output : hidden);
  }
}

std::vector<ad::Value> Mlp::bind(ad::Tape& tape) const {
  std::vector<ad::Value> out;
  out.reserve(params_.size());
  for (const Matrix& p : params_) out.push_back(tape.leaf(p));
  return out;
}

ad::Value Mlp::forward(std::span<const ad::Value> params, ad::Value x) const {
  require(params.size() == params_.size(), "mlp: parameter count mismatch");
  for (std::size_t l = 0; l < activations_.size(); ++l) {
    x = ad::dense(x, params[2 * l], params[2 * l + 1]);
    switch (activations_[l]) {
      case Activation::Identity:
        break;
      case Activation::Relu:
        x = ad::relu(x);
        break;
      case Activation::LeakyRelu:
        x = ad::leaky_relu(x, 0.2);
        break;
      case Activation::Tanh:
        x = ad::tanh(x);
        break;
    }
  }
  return x;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& p : params_) n += p.size();
  return n;
}

std::vector<double> to_model_range(const ImageTensor& image) {
  std::vector<double> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = 2.0 * image.data[i] - 1.0;
  return out;
}

ImageTensor from_model_range(std::span<const double> values, const FaceShape& shape) {
  require(values.size() == shape.size(), "from_model_range: size mismatch");
  ImageTensor img(shape.height, shape.width, shape.channels);
  for (std::size_t i = 0; i < values.size(); ++i) img.data[i] = std::clamp(0.5 * (values[i] + 1.0), 0.0, 1.0);
  return img;
}

std::vector<double> audio_features(const MelSpectrogram& mel, double log_floor) {
  const double scale = std::max(1.0, std::fabs(log_floor));
  std::vector<double> out(mel.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (mel.values.data[i] - log_floor) / scale;
  return out;
}

ToyGenerator::ToyGenerator(FaceShape face, AudioShape audio, std::size_t hidden, std::size_t noise_dim,
                           double log_floor, Rng& rng)
    : face_(face),
      audio_(audio),
      noise_dim_(noise_dim),
      log_floor_(log_floor),
      net_({face.size() + audio.size() + noise_dim, hidden, hidden, face.size()}, Activation::Relu, Activation::Tanh,
           rng) {}

ad::Value ToyGenerator::forward(std::span<const ad::Value> params, ad::Value reference, ad::Value audio,
                                ad::Value noise) const {
  if (reference.cols() != face_.size() || audio.cols() != audio_.size())
    fail(ErrorKind::InvalidArgument, "generator: input shape does not match the model configuration");
  std::vector<ad::Value> parts{reference, audio};
  if (noise_dim_ > 0) {
    require(noise.valid() && noise.cols() == noise_dim_, "generator: noise input required");
    parts.push_back(noise);
  }
  return net_.forward(params, ad::concat(parts));
}

ToyDiscriminator::ToyDiscriminator(FaceShape face, AudioShape audio, std::size_t hidden, Rng& rng)
    : face_(face),
      audio_(audio),
      net_({face.size() + audio.size(), hidden, hidden, 1}, Activation::LeakyRelu, Activation::Identity, rng) {}

ad::Value ToyDiscriminator::forward(std::span<const ad::Value> params, ad::Value face, ad::Value audio) const {
  if (face.cols() != face_.size() || audio.cols() != audio_.size())
    fail(ErrorKind::InvalidArgument, "discriminator: input shape does not match the model configuration");
  return net_.forward(params, ad::concat(face, audio));
}

bool ToyDiscriminator::per_sample_only() const {
  // Dense layers and pointwise activations are the only layer kinds.
  return std::all_of(net_.activations().begin(), net_.activations().end(), [](Activation a) {
    return a == Activation::Identity || a == Activation::Relu || a == Activation::LeakyRelu ||
           a == Activation::Tanh;
  });
}

std::vector<ImageTensor> generate_batch(const ToyGenerator& generator, std::span<const ImageTensor* const> references,
                                        std::span<const MelSpectrogram* const> audio) {
  require(references.size() == audio.size(), "generate: references and audio windows are not aligned");
  const FaceShape& fs = generator.face_shape();
  const AudioShape& as = generator.audio_shape();
  const std::size_t n = references.size();
  if (n == 0) return {};
  Matrix ref(n, fs.size());
  Matrix aud(n, as.size());
  for (std::size_t i = 0; i < n; ++i) {
    const ImageTensor& r = *references[i];
    const MelSpectrogram& a = *audio[i];
    if (r.height != fs.height || r.width != fs.width || r.channels != fs.channels)
      fail(ErrorKind::InvalidArgument, "generate: reference frame does not match the generator's face shape");
    if (a.n_mels() != as.n_mels || a.n_frames() != as.n_frames)
      fail(ErrorKind::InvalidArgument, "generate: audio window does not match the generator's audio shape");
    const auto rv = to_model_range(r);
    const auto av = audio_features(a, generator.log_floor());
    std::copy(rv.begin(), rv.end(), ref.row(i).begin());
    std::copy(av.begin(), av.end(), aud.row(i).begin());
  }
  ad::Tape tape;
  const auto params = generator.net().bind(tape);
  ad::Value noise;
  if (generator.noise_dim() > 0) noise = tape.zeros(n, generator.noise_dim());
  const ad::Value out = generator.forward(params, tape.leaf(std::move(ref)), tape.leaf(std::move(aud)), noise);
  std::vector<ImageTensor> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) images.push_back(from_model_range(out.data().row(i), fs));
  return images;
}

ImageTensor generate(const ToyGenerator& generator, const ImageTensor& reference, const MelSpectrogram& audio) {
  const ImageTensor* r[] = {&reference};
  const MelSpectrogram* a[] = {&audio};
  return std::move(generate_batch(generator, r, a).front());
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state, const AdamHyper& hyper) {
  require(params.size() == grads.size(), "adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Matrix& p : params) {
      state.m.emplace_back(p.rows, p.cols, 0.0);
      state.v.emplace_back(p.rows, p.cols, 0.0);
    }
  }
  require(state.m.size() == params.size(), "adam: state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k].same_shape(grads[k]) && params[k].same_shape(state.m[k]), "adam: shape mismatch");
    for (double g : grads[k].data)
      if (!std::isfinite(g)) fail(ErrorKind::Numeric, "adam: non-finite gradient");
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data;
    const auto& g = grads[k].data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::ifstream& in, const fs::path& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) fail(ErrorKind::Format, path.string() + ": truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(const fs::path& path, std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write("CKPT", 4);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    require(count == t.values.size(), "checkpoint: tensor " + t.name + " has inconsistent dims");
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CKPT", 4) != 0) fail(ErrorKind::Format, path.string() + ": not a CKPT file");
  const std::uint32_t count = get_u32(in, path);
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    const std::uint32_t name_len = get_u32(in, path);
    if (name_len > 4096) fail(ErrorKind::Format, path.string() + ": implausible tensor name length");
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const std::uint32_t rank = get_u32(in, path);
    if (rank > 8) fail(ErrorKind::Format, path.string() + ": implausible tensor rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(get_u32(in, path));
      n *= t.dims.back();
    }
    t.values.resize(n);
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * 4));
    if (!in) fail(ErrorKind::Format, path.string() + ": truncated tensor " + t.name);
  }
  return tensors;
}

namespace {

NamedTensor matrix_tensor(const std::string& name, const Matrix& m) {
  return {name,
          {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)},
          std::vector<float>(m.data.begin(), m.data.end())};
}

NamedTensor meta_tensor(const std::string& name, std::vector<double> values) {
  return {name, {static_cast<std::uint32_t>(values.size())}, std::vector<float>(values.begin(), values.end())};
}

void append_mlp(std::vector<NamedTensor>& out, const std::string& prefix, const Mlp& net) {
  const auto& p = net.parameters();
  for (std::size_t l = 0; l * 2 < p.size(); ++l) {
    out.push_back(matrix_tensor(prefix + ".layer" + std::to_string(l) + ".weight", p[2 * l]));
    out.push_back(matrix_tensor(prefix + ".layer" + std::to_string(l) + ".bias", p[2 * l + 1]));
  }
}

void load_mlp(Mlp& net, const std::string& prefix, const std::map<std::string, const NamedTensor*>& by_name) {
  auto& p = net.parameters();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const std::string name = prefix + ".layer" + std::to_string(k / 2) + (k % 2 == 0 ? ".weight" : ".bias");
    const auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::Format, "checkpoint: missing tensor " + name);
    const NamedTensor& t = *it->second;
    if (t.dims.size() != 2 || t.dims[0] != p[k].rows || t.dims[1] != p[k].cols)
      fail(ErrorKind::Format, "checkpoint: tensor " + name + " has unexpected shape");
    std::copy(t.values.begin(), t.values.end(), p[k].data.begin());
  }
}

}  // namespace

std::vector<NamedTensor> to_tensors(const ModelPair& models) {
  const ToyGenerator& g = models.generator;
  std::vector<NamedTensor> out;
  out.push_back(meta_tensor("meta.face_shape", {static_cast<double>(g.face_shape().height),
                                                static_cast<double>(g.face_shape().width),
                                                static_cast<double>(g.face_shape().channels)}));
  out.push_back(meta_tensor("meta.audio_shape", {static_cast<double>(g.audio_shape().n_mels),
                                                 static_cast<double>(g.audio_shape().n_frames)}));
  out.push_back(meta_tensor("meta.noise_dim", {static_cast<double>(g.noise_dim())}));
  out.push_back(meta_tensor("meta.log_floor", {g.log_floor()}));
  out.push_back(meta_tensor("meta.hidden", {static_cast<double>(g.net().parameters().front().cols)}));
  append_mlp(out, "generator", g.net());
  append_mlp(out, "discriminator", models.discriminator.net());
  return out;
}

ModelPair from_tensors(std::span<const NamedTensor> tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  auto meta = [&](const std::string& name, std::size_t n) -> const std::vector<float>& {
    const auto it = by_name.find(name);
    if (it == by_name.end() || it->second->values.size() != n)
      fail(ErrorKind::Format, "checkpoint: missing or malformed " + name);
    return it->second->values;
  };
  auto count = [](float v) { return static_cast<std::size_t>(std::lround(v)); };
  const auto& fsh = meta("meta.face_shape", 3);
  const auto& ash = meta("meta.audio_shape", 2);
  const FaceShape face{count(fsh[0]), count(fsh[1]), count(fsh[2])};
  const AudioShape audio{count(ash[0]), count(ash[1])};
  const std::size_t noise = count(meta("meta.noise_dim", 1)[0]);
  const double log_floor = meta("meta.log_floor", 1)[0];
  const std::size_t hidden = count(meta("meta.hidden", 1)[0]);

  Rng unused(0);
  ModelPair models{ToyGenerator(face, audio, hidden, noise, log_floor, unused),
                   ToyDiscriminator(face, audio, hidden, unused)};
  load_mlp(models.generator.net(), "generator", by_name);
  load_mlp(models.discriminator.net(), "discriminator", by_name);
  return models;
}

}  // namespace ganlip
