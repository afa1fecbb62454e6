#include "ganlip/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ganlip/error.hpp"
#include "ganlip/metrics.hpp"

namespace ganlip {

namespace fs = std::filesystem;
using ad::Value;

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::LipGan ? "lipgan" : "l1wgan-gp"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "lipgan") return ModelKind::LipGan;
  if (name == "l1wgan-gp") return ModelKind::L1WganGp;
  fail(ErrorKind::InvalidArgument, "unknown model '" + name + "' (expected lipgan or l1wgan-gp)");
}

std::string to_string(GpMode mode) { return mode == GpMode::Interpolated ? "interp" : "gen"; }

GpMode parse_gp_mode(const std::string& name) {
  if (name == "interp" || name == "interpolated") return GpMode::Interpolated;
  if (name == "gen" || name == "generator_output") return GpMode::GeneratorOutput;
  fail(ErrorKind::InvalidArgument, "unknown gp mode '" + name + "' (expected interp or gen)");
}

void validate(const TrainConfig& c) {
  require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "config: learning_rate must be > 0");
  require(c.beta1 >= 0.0 && c.beta1 < 1.0, "config: beta1 must be in [0, 1)");
  require(c.beta2 >= 0.0 && c.beta2 < 1.0, "config: beta2 must be in [0, 1)");
  require(c.batch_size >= 1, "config: batch_size must be >= 1");
  require(c.n_critic >= 1, "config: n_critic must be >= 1");
  require(c.lambda_gp >= 0.0 && std::isfinite(c.lambda_gp), "config: lambda_gp must be >= 0");
  require(c.loss_log_every >= 1, "config: loss_log_every must be >= 1");
  require(c.hidden_width >= 1, "config: hidden_width must be >= 1");
  require(c.l1_weight >= 0.0 && c.adv_weight >= 0.0, "config: loss weights must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["n_critic"] = c.n_critic;
  j["lambda_gp"] = c.lambda_gp;
  j["seed"] = c.seed;
  j["sample_every"] = c.sample_every;
  j["loss_log_every"] = c.loss_log_every;
  j["gp_input_mode"] = to_string(c.gp_input_mode);
  j["l1_weight"] = c.l1_weight;
  j["adv_weight"] = c.adv_weight;
  j["hidden_width"] = c.hidden_width;
  j["noise_dim"] = c.noise_dim;
  j["max_iterations"] = c.max_iterations;
  j["sample_count"] = c.sample_count;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::Format, "config: expected a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    // get<std::size_t>() would wrap negative numbers around.
    auto count = [&key](const nlohmann::json& v) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        fail(ErrorKind::Format, "config: '" + key + "' must be a non-negative integer");
      return v.get<std::uint64_t>();
    };
    try {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "batch_size") c.batch_size = count(value);
      else if (key == "epochs") c.epochs = count(value);
      else if (key == "n_critic") c.n_critic = count(value);
      else if (key == "lambda_gp") c.lambda_gp = value.get<double>();
      else if (key == "seed") c.seed = count(value);
      else if (key == "sample_every") c.sample_every = count(value);
      else if (key == "loss_log_every") c.loss_log_every = count(value);
      else if (key == "gp_input_mode") c.gp_input_mode = parse_gp_mode(value.get<std::string>());
      else if (key == "l1_weight") c.l1_weight = value.get<double>();
      else if (key == "adv_weight") c.adv_weight = value.get<double>();
      else if (key == "hidden_width") c.hidden_width = count(value);
      else if (key == "noise_dim") c.noise_dim = count(value);
      else if (key == "max_iterations") c.max_iterations = count(value);
      else if (key == "sample_count") c.sample_count = count(value);
      else fail(ErrorKind::Format, "config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, "config: bad value for '" + key + "': " + e.what());
    }
  }
  validate(c);
  return c;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

void set_field(TrainConfig& cfg, const std::string& key, const std::string& value) {
  nlohmann::json j = to_json(cfg);
  if (!j.contains(key)) fail(ErrorKind::InvalidArgument, "config: unknown key '" + key + "'");
  if (j[key].is_string()) {
    j[key] = value;
  } else {
    try {
      j[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::InvalidArgument, "config: bad value '" + value + "' for " + key);
    }
    if (j[key].is_number_float() && !to_json(cfg)[key].is_number_float()) {
      fail(ErrorKind::InvalidArgument, "config: " + key + " expects an integer");
    }
  }
  try {
    cfg = train_config_from_json(j);
  } catch (const Error& e) {
    fail(ErrorKind::InvalidArgument, e.what());
  }
}

std::size_t iterations_per_epoch(const TrainConfig& cfg, std::size_t n_samples) {
  if (n_samples == 0) return 0;
  return std::max<std::size_t>(1, n_samples / cfg.batch_size);
}

std::size_t total_iterations(const TrainConfig& cfg, std::size_t n_samples) {
  if (cfg.max_iterations > 0) return cfg.max_iterations;
  return cfg.epochs * iterations_per_epoch(cfg, n_samples);
}

TrainingData make_training_data(const std::vector<FramePair>& pairs, double log_floor) {
  if (pairs.empty()) fail(ErrorKind::InvalidArgument, "training data: no frame pairs");
  const FramePair& first = pairs.front();
  require(first.audio && first.unsynced_audio, "training data: pairs carry no audio");
  TrainingData d;
  d.face = {first.target->height, first.target->width, first.target->channels};
  d.audio = {first.audio->n_mels(), first.audio->n_frames()};
  d.log_floor = log_floor;
  const std::size_t n = pairs.size();
  d.targets = Matrix(n, d.face.size());
  d.references = Matrix(n, d.face.size());
  d.synced = Matrix(n, d.audio.size());
  d.unsynced = Matrix(n, d.audio.size());
  auto put = [](Matrix& m, std::size_t row, const std::vector<double>& v) {
    std::copy(v.begin(), v.end(), m.row(row).begin());
  };
  for (std::size_t i = 0; i < n; ++i) {
    const FramePair& p = pairs[i];
    require(p.audio && p.unsynced_audio, "training data: pairs carry no audio");
    if (p.target->size() != d.face.size() || p.reference->size() != d.face.size() ||
        p.audio->values.size() != d.audio.size() || p.unsynced_audio->values.size() != d.audio.size() ||
        p.audio->n_mels() != d.audio.n_mels)
      fail(ErrorKind::InvalidArgument, "training data: pairs differ in face or audio shape");
    put(d.targets, i, to_model_range(*p.target));
    put(d.references, i, to_model_range(*p.reference));
    put(d.synced, i, audio_features(*p.audio, log_floor));
    put(d.unsynced, i, audio_features(*p.unsynced_audio, log_floor));
  }
  return d;
}

namespace {

void put_field(std::ostringstream& out, double v) {
  out << ',';
  if (std::isnan(v)) return;
  if (std::isinf(v)) {
    out << (v > 0 ? "inf" : "-inf");
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out << buf;
}

}  // namespace

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "iter,loss_G,loss_D,loss_face,loss_audio,gp,ssim,psnr\n";
  for (const auto& r : log.records) {
    out << r.iter;
    for (double v : {r.loss_G, r.loss_D, r.loss_face, r.loss_audio, r.gp, r.ssim, r.psnr}) put_field(out, v);
    out << '\n';
  }
  return out.str();
}

void write_train_log(const fs::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << train_log_csv(log);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

ModelPair make_models(const FaceShape& face, const AudioShape& audio, double log_floor, const TrainConfig& cfg) {
  Rng g_rng(cfg.seed + seed_offset::generator_init);
  Rng d_rng(cfg.seed + seed_offset::discriminator_init);
  return {ToyGenerator(face, audio, cfg.hidden_width, cfg.noise_dim, log_floor, g_rng),
          ToyDiscriminator(face, audio, cfg.hidden_width, d_rng)};
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

struct Batch {
  Matrix targets, references, synced, unsynced;
};

// Epoch-wise shuffled minibatches; the order depends only on the seed.
class BatchStream {
 public:
  BatchStream(const TrainingData& data, const TrainConfig& cfg)
      : data_(data),
        batch_(std::min(cfg.batch_size, data.size())),
        per_epoch_(iterations_per_epoch(cfg, data.size())),
        rng_(cfg.seed + seed_offset::shuffle),
        order_(data.size()) {}

  std::size_t per_epoch() const { return per_epoch_; }

  Batch next() {
    if (pos_ == 0) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      rng_.shuffle(order_.begin(), order_.end());
    }
    const std::span<const std::size_t> rows(order_.data() + pos_ * batch_, batch_);
    pos_ = (pos_ + 1) % per_epoch_;
    return {gather_rows(data_.targets, rows), gather_rows(data_.references, rows), gather_rows(data_.synced, rows),
            gather_rows(data_.unsynced, rows)};
  }

 private:
  const TrainingData& data_;
  std::size_t batch_;
  std::size_t per_epoch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::vector<Matrix> detach(const ad::Gradients& g) {
  std::vector<Matrix> out;
  out.reserve(g.values.size());
  for (const Value& v : g.values) out.push_back(v.data());
  return out;
}

// Mean SSIM / PSNR of the first few samples of a batch, in storage range.
void sample_quality(const Matrix& generated, const Matrix& targets, const FaceShape& face, TrainRecord& rec) {
  const std::size_t n = std::min<std::size_t>(4, generated.rows);
  double s = 0.0, p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ImageTensor a = from_model_range(generated.row(i), face);
    const ImageTensor b = from_model_range(targets.row(i), face);
    if (std::min(face.height, face.width) >= SsimParams{}.window) s += ssim(a, b);
    p += psnr(a, b);
  }
  rec.ssim = std::min(face.height, face.width) >= SsimParams{}.window ? s / static_cast<double>(n) : kUnset;
  rec.psnr = p / static_cast<double>(n);
}

const TrainConfig& checked(const TrainConfig& c) {
  validate(c);
  return c;
}

struct Session {
  const TrainConfig& cfg;
  const TrainingData& data;
  const TrainHooks& hooks;
  ModelPair models;
  AdamState g_state, d_state;
  AdamHyper hyper;
  TrainLog log;
  BatchStream stream;
  Rng noise_rng;
  Rng penalty_rng;
  std::size_t total;

  Session(ModelKind kind, const TrainConfig& c, const TrainingData& d, const TrainHooks& h)
      : cfg(checked(c)),
        data(d),
        hooks(h),
        models(make_models(d.face, d.audio, d.log_floor, c)),
        hyper{c.learning_rate, c.beta1, c.beta2, 1e-8},
        stream(d, c),
        noise_rng(c.seed + seed_offset::noise),
        penalty_rng(c.seed + seed_offset::penalty),
        total(total_iterations(c, d.size())) {
    log.model = kind;
  }

  Value noise(ad::Tape& tape, std::size_t rows) {
    if (cfg.noise_dim == 0) return {};
    Matrix z(rows, cfg.noise_dim);
    for (double& v : z.data) v = noise_rng.normal();
    return tape.leaf(std::move(z));
  }

  void update(Mlp& net, AdamState& state, const ad::Gradients& g) {
    std::vector<Matrix> grads = detach(g);
    adam_step(net.parameters(), grads, state, hyper);
  }

  bool logged(std::size_t iter) const { return iter % cfg.loss_log_every == 0; }

  void finish_iteration(std::size_t iter, TrainRecord* rec) {
    if (rec) {
      log.records.push_back(*rec);
      if (hooks.on_log) hooks.on_log(*rec);
    }
    const std::size_t done = iter + 1;
    if (hooks.on_sample) {
      const std::size_t epoch = done / stream.per_epoch();
      const bool due = cfg.sample_every > 0 ? done % cfg.sample_every == 0 : done % stream.per_epoch() == 0;
      if (due || done == total) hooks.on_sample(done, epoch, models.generator);
    }
  }

  template <class Step>
  TrainResult run(Step step) {
    for (std::size_t iter = 0; iter < total; ++iter) {
      try {
        step(iter);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numeric)
          fail(ErrorKind::Numeric, "training aborted at iteration " + std::to_string(iter) + ": " + e.what());
        throw;
      }
    }
    log.iterations = total;
    if (total == 0 && hooks.on_sample) hooks.on_sample(0, 0, models.generator);
    return {std::move(log), std::move(models)};
  }
};

TrainRecord blank_record(std::size_t iter) {
  TrainRecord r;
  r.iter = iter;
  r.loss_G = r.loss_D = r.loss_face = r.loss_audio = r.gp = r.ssim = r.psnr = r.l1 = kUnset;
  return r;
}

}  // namespace

TrainResult train_l1wgan_gp(const TrainConfig& cfg, const TrainingData& data, const TrainHooks& hooks) {
  Session s(ModelKind::L1WganGp, cfg, data, hooks);
  auto& G = s.models.generator;
  auto& D = s.models.discriminator;
  require(D.per_sample_only(), "l1wgan-gp: the critic must not use batch statistics");

  return s.run([&](std::size_t iter) {
    const Batch b = s.stream.next();
    ad::Tape tape;
    const Value real = tape.leaf(b.targets);
    const Value ref = tape.leaf(b.references);
    const Value aud = tape.leaf(b.synced);
    const std::vector<Value> g_params = G.net().bind(tape);
    const Value fake = G.forward(g_params, ref, aud, s.noise(tape, b.targets.rows));
    const Matrix fake_values = fake.data();

    // Critic step on detached samples.
    const std::vector<Value> d_params = D.net().bind(tape);
    const Value fake_const = tape.leaf(fake_values);
    const Value d_real = D.forward(d_params, real, aud);
    const Value d_fake = D.forward(d_params, fake_const, aud);
    const FaceCritic critic = [&](Value x) { return D.forward(d_params, x, aud); };
    const PenaltyResult gp = gradient_penalty(tape, critic, b.targets, fake_values, cfg.gp_input_mode, s.penalty_rng);
    const Value loss_D = wgan_gp_loss(d_fake, d_real, gp.penalty, cfg.lambda_gp);
    s.update(D.net(), s.d_state, ad::grad(loss_D, d_params));
    ++s.log.discriminator_updates;
    s.log.critic_grad_norms.push_back(std::accumulate(gp.grad_norms.begin(), gp.grad_norms.end(), 0.0) /
                                      static_cast<double>(gp.grad_norms.size()));

    const bool g_step = iter % cfg.n_critic == 0;
    const bool log_now = s.logged(iter);
    TrainRecord rec = blank_record(iter);
    if (g_step || log_now) {
      // Generator loss against the updated critic.
      const std::vector<Value> d_now = D.net().bind(tape);
      const Value l1 = l1_reconstruction_loss(fake, real);
      const Value loss_G = wgan_generator_loss(D.forward(d_now, fake, aud), l1, cfg.l1_weight);
      rec.loss_G = loss_G.item();
      rec.l1 = l1.item();
      if (g_step) {
        s.update(G.net(), s.g_state, ad::grad(loss_G, g_params));
        ++s.log.generator_updates;
      }
    }
    if (log_now) {
      rec.loss_D = loss_D.item();
      rec.gp = gp.penalty.item();
      sample_quality(fake_values, b.targets, data.face, rec);
    }
    s.finish_iteration(iter, log_now ? &rec : nullptr);
  });
}

TrainResult train_lipgan(const TrainConfig& cfg, const TrainingData& data, const TrainHooks& hooks) {
  Session s(ModelKind::LipGan, cfg, data, hooks);
  auto& G = s.models.generator;
  auto& D = s.models.discriminator;

  return s.run([&](std::size_t iter) {
    const Batch b = s.stream.next();
    ad::Tape tape;
    const Value real = tape.leaf(b.targets);
    const Value ref = tape.leaf(b.references);
    const Value aud = tape.leaf(b.synced);
    const Value unsynced = tape.leaf(b.unsynced);
    const std::vector<Value> g_params = G.net().bind(tape);
    const Value fake = G.forward(g_params, ref, aud, s.noise(tape, b.targets.rows));
    const Matrix fake_values = fake.data();

    const std::vector<Value> d_params = D.net().bind(tape);
    const PairCritic critic = [&](Value f, Value a) { return D.forward(d_params, f, a); };
    const LipGanLosses d_losses = lipgan_losses(critic, real, tape.leaf(fake_values), aud, unsynced);
    s.update(D.net(), s.d_state, ad::grad(d_losses.loss_D, d_params));
    ++s.log.discriminator_updates;

    const std::vector<Value> d_now = D.net().bind(tape);
    const Value l1 = l1_reconstruction_loss(fake, real);
    const Value adv = bce_with_logits(D.forward(d_now, fake, aud), true);
    const Value loss_G = lipgan_generator_loss(l1, adv, cfg.adv_weight);
    s.update(G.net(), s.g_state, ad::grad(loss_G, g_params));
    ++s.log.generator_updates;

    const bool log_now = s.logged(iter);
    TrainRecord rec = blank_record(iter);
    if (log_now) {
      rec.loss_G = loss_G.item();
      rec.loss_D = d_losses.loss_D.item();
      rec.loss_face = d_losses.loss_face.item();
      rec.loss_audio = d_losses.loss_audio.item();
      rec.l1 = l1.item();
      sample_quality(fake_values, b.targets, data.face, rec);
    }
    s.finish_iteration(iter, log_now ? &rec : nullptr);
  });
}

TrainResult train(ModelKind kind, const TrainConfig& cfg, const TrainingData& data, const TrainHooks& hooks) {
  return kind == ModelKind::LipGan ? train_lipgan(cfg, data, hooks) : train_l1wgan_gp(cfg, data, hooks);
}

}  // namespace ganlip
