#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "ganlip/error.hpp"
#include "ganlip/losses.hpp"
#include "ganlip/nn.hpp"
#include "ganlip/pipeline.hpp"
#include "ganlip/toy_data.hpp"
#include "ganlip/trainer.hpp"
#include "helpers.hpp"

using namespace ganlip;
namespace ad = ganlip::ad;

namespace {

// A small slice of the toy corpus keeps the training tests fast.
const TrainingData& small_data() {
  static const TrainingData data = [] {
    ToyCorpusConfig cfg;
    cfg.n_videos = 4;
    cfg.frames_per_video = 20;
    const ToyPairs pairs = toy_frame_pairs(make_toy_dataset(cfg), toy_mel_config(), 6, 10);
    return make_training_data(pairs.train, toy_mel_config().log_floor);
  }();
  return data;
}

TrainConfig small_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.hidden_width = 16;
  c.max_iterations = 23;
  c.loss_log_every = 1;
  return c;
}

}  // namespace

TEST_CASE("adam follows the bias-corrected recurrence") {
  Rng rng(21);
  std::vector<Matrix> params{oracle::random_matrix(rng, 2, 3)};
  std::vector<double> p = params[0].data, m(6, 0.0), v(6, 0.0);
  AdamState state;
  const AdamHyper hyper{0.01, 0.5, 0.9, 1e-8};
  for (int t = 1; t <= 4; ++t) {
    const std::vector<Matrix> grads{oracle::random_matrix(rng, 2, 3)};
    adam_step(params, grads, state, hyper);
    for (std::size_t i = 0; i < 6; ++i) {
      const double g = grads[0].data[i];
      m[i] = 0.5 * m[i] + 0.5 * g;
      v[i] = 0.9 * v[i] + 0.1 * g * g;
      p[i] -= 0.01 * (m[i] / (1 - std::pow(0.5, t))) / (std::sqrt(v[i] / (1 - std::pow(0.9, t))) + 1e-8);
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(params[0].data[i] == doctest::Approx(p[i]).epsilon(1e-14));
  }
  CHECK(state.t == 4);
  std::vector<Matrix> bad{Matrix(2, 3, NAN)};
  CHECK_THROWS_AS(adam_step(params, bad, state, hyper), Error);
}

TEST_CASE("first adam step moves every coordinate by about the learning rate") {
  std::vector<Matrix> params{Matrix(1, 3, 0.0)};
  AdamState state;
  adam_step(params, std::vector<Matrix>{Matrix(1, 3, std::vector<double>{5, -0.1, 1e-3})}, state, AdamHyper{});
  CHECK(params[0].data[0] == doctest::Approx(-1e-4).epsilon(1e-6));
  CHECK(params[0].data[1] == doctest::Approx(1e-4).epsilon(1e-6));
  CHECK(params[0].data[2] == doctest::Approx(-1e-4).epsilon(1e-4));
}

TEST_CASE("model range conversion") {
  ImageTensor img(1, 2, 1);
  img.data = {0.0, 1.0};
  const auto v = to_model_range(img);
  CHECK(v == std::vector<double>{-1.0, 1.0});
  CHECK(from_model_range(v, FaceShape{1, 2, 1}) == img);
}

TEST_CASE("critic scores each row independently") {
  Rng rng(22);
  const FaceShape face{4, 4, 3};
  const AudioShape audio{3, 5};
  const ToyDiscriminator d(face, audio, 8, rng);
  CHECK(d.per_sample_only());
  const Matrix faces = oracle::random_matrix(rng, 5, face.size()), auds = oracle::random_matrix(rng, 5, audio.size());
  ad::Tape t;
  const auto params = d.net().bind(t);
  const ad::Value all = d.forward(params, t.leaf(faces), t.leaf(auds));
  for (std::size_t i = 0; i < 5; ++i) {
    Matrix f1(1, face.size()), a1(1, audio.size());
    std::copy(faces.row(i).begin(), faces.row(i).end(), f1.data.begin());
    std::copy(auds.row(i).begin(), auds.row(i).end(), a1.data.begin());
    CHECK(d.forward(params, t.leaf(f1), t.leaf(a1)).item() == doctest::Approx(all.data()(i, 0)).epsilon(1e-13));
  }
}

TEST_CASE("generate_batch agrees with generate") {
  Rng rng(23);
  const FaceShape face{6, 6, 3};
  const AudioShape audio{4, 5};
  const ToyGenerator g(face, audio, 16, 0, -5.0, rng);
  std::vector<ImageTensor> refs;
  std::vector<MelSpectrogram> mels;
  for (int i = 0; i < 4; ++i) {
    refs.push_back(oracle::random_image(rng, 6, 6, 3));
    mels.push_back(MelSpectrogram{oracle::random_matrix(rng, 4, 5, -5, 1)});
  }
  std::vector<const ImageTensor*> rp;
  std::vector<const MelSpectrogram*> mp;
  for (int i = 0; i < 4; ++i) rp.push_back(&refs[i]), mp.push_back(&mels[i]);
  const auto batch = generate_batch(g, rp, mp);
  for (int i = 0; i < 4; ++i) {
    const ImageTensor one = generate(g, refs[i], mels[i]);
    for (std::size_t k = 0; k < one.size(); ++k) CHECK(batch[i].data[k] == doctest::Approx(one.data[k]).epsilon(1e-12));
    for (double v : one.data) CHECK((v >= 0.0 && v <= 1.0));
  }
  CHECK_THROWS_AS(generate(g, ImageTensor(5, 6, 3), mels[0]), Error);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(24);
  ModelPair models{ToyGenerator({4, 4, 1}, {2, 3}, 8, 2, -7.0, rng), ToyDiscriminator({4, 4, 1}, {2, 3}, 8, rng)};
  const auto dir = temp_dir("ckpt");
  write_checkpoint(dir / "m.ckpt", to_tensors(models));
  const auto tensors = read_checkpoint(dir / "m.ckpt");
  const ModelPair back = from_tensors(tensors);
  CHECK(back.generator.face_shape() == models.generator.face_shape());
  CHECK(back.generator.audio_shape() == models.generator.audio_shape());
  CHECK(back.generator.noise_dim() == 2);
  CHECK(back.generator.log_floor() == -7.0);
  const auto& p0 = models.generator.net().parameters();
  const auto& p1 = back.generator.net().parameters();
  REQUIRE(p0.size() == p1.size());
  for (std::size_t k = 0; k < p0.size(); ++k)
    for (std::size_t i = 0; i < p0[k].size(); ++i)
      CHECK(p1[k].data[i] == static_cast<double>(static_cast<float>(p0[k].data[i])));
  // Saving the reloaded models reproduces the file bytes.
  write_checkpoint(dir / "again.ckpt", to_tensors(back));
  CHECK(slurp(dir / "m.ckpt") == slurp(dir / "again.ckpt"));

  spit(dir / "trunc.ckpt", slurp(dir / "m.ckpt").substr(0, 40));
  CHECK_THROWS_AS(read_checkpoint(dir / "trunc.ckpt"), Error);
  auto missing = tensors;
  missing.pop_back();
  CHECK_THROWS_AS(from_tensors(missing), Error);
}

TEST_CASE("loss reductions on hand-computed values") {
  ad::Tape t;
  const ad::Value fake = t.leaf(Matrix(2, 1, std::vector<double>{1.0, 3.0}));
  const ad::Value real = t.leaf(Matrix(2, 1, std::vector<double>{-1.0, 0.0}));
  CHECK(wgan_gp_loss(fake, real, t.scalar(0.5), 10.0).item() == doctest::Approx(2.0 + 0.5 + 5.0));
  CHECK(wgan_generator_loss(fake, t.scalar(4.0), 2.0).item() == doctest::Approx(-2.0 + 8.0));
  CHECK(lipgan_generator_loss(t.scalar(4.0), t.scalar(0.25), 2.0).item() == doctest::Approx(4.5));

  // BCE against an explicit formula.
  const ad::Value logits = t.leaf(Matrix(3, 1, std::vector<double>{-2.0, 0.3, 1.7}));
  double want1 = 0, want0 = 0;
  for (double z : {-2.0, 0.3, 1.7}) {
    const double p = 1 / (1 + std::exp(-z));
    want1 -= std::log(p) / 3;
    want0 -= std::log(1 - p) / 3;
  }
  CHECK(bce_with_logits(logits, true).item() == doctest::Approx(want1).epsilon(1e-12));
  CHECK(bce_with_logits(logits, false).item() == doctest::Approx(want0).epsilon(1e-12));
  // Saturated logits stay finite thanks to the probability clamp.
  const ad::Value huge = t.leaf(Matrix(1, 1, 80.0));
  CHECK(bce_with_logits(huge, false).item() == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
}

TEST_CASE("lipgan losses combine the three critic terms") {
  ad::Tape t;
  const ad::Value r = t.leaf(Matrix(2, 1, std::vector<double>{1.0, 2.0}));
  const ad::Value f = t.leaf(Matrix(2, 1, std::vector<double>{-1.0, 0.5}));
  const ad::Value u = t.leaf(Matrix(2, 1, std::vector<double>{0.0, -3.0}));
  const LipGanLosses l = lipgan_losses_from_logits(r, f, u);
  CHECK(l.loss_real.item() == doctest::Approx(bce_with_logits(r, true).item()));
  CHECK(l.loss_face.item() == doctest::Approx(bce_with_logits(f, false).item()));
  CHECK(l.loss_audio.item() == doctest::Approx(bce_with_logits(u, false).item()));
  CHECK(l.loss_D.item() == doctest::Approx(l.loss_real.item() + 0.5 * (l.loss_face.item() + l.loss_audio.item())));
}

TEST_CASE("penalty points per mode") {
  Rng rng(25);
  const Matrix real = oracle::random_matrix(rng, 6, 5), fake = oracle::random_matrix(rng, 6, 5);
  Rng r1(1);
  CHECK(penalty_points(real, fake, GpMode::GeneratorOutput, r1) == fake);
  Rng r2(1);
  const Matrix x = penalty_points(real, fake, GpMode::Interpolated, r2);
  for (std::size_t i = 0; i < 6; ++i) {
    // One eps per sample: x = eps * real + (1 - eps) * fake on every column.
    const double eps = (x(i, 0) - fake(i, 0)) / (real(i, 0) - fake(i, 0));
    CHECK(eps >= 0.0);
    CHECK(eps <= 1.0);
    for (std::size_t j = 0; j < 5; ++j) CHECK(x(i, j) == doctest::Approx(eps * real(i, j) + (1 - eps) * fake(i, j)));
  }
  CHECK_THROWS_AS(penalty_points(real, Matrix(5, 5), GpMode::Interpolated, r2), Error);
}

TEST_CASE("train config json round trip, overrides and validation") {
  TrainConfig c;
  c.n_critic = 3;
  c.gp_input_mode = GpMode::GeneratorOutput;
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  set_field(c, "batch_size", "32");
  CHECK(c.batch_size == 32);
  set_field(c, "gp_input_mode", "interp");
  CHECK(c.gp_input_mode == GpMode::Interpolated);
  set_field(c, "lambda_gp", "5");
  CHECK(c.lambda_gp == 5.0);
  CHECK_THROWS_AS(set_field(c, "batch_size", "2.5"), Error);
  CHECK_THROWS_AS(set_field(c, "batch_size", "0"), Error);
  CHECK_THROWS_AS(set_field(c, "bogus", "1"), Error);
  CHECK_THROWS_AS(set_field(c, "gp_input_mode", "sideways"), Error);

  nlohmann::json j = to_json(TrainConfig{});
  j["extra"] = 1;
  CHECK_THROWS_AS(train_config_from_json(j), Error);
  j = to_json(TrainConfig{});
  j["epochs"] = -1;
  CHECK_THROWS_AS(train_config_from_json(j), Error);

  const auto path = temp_dir("cfg") / "c.json";
  spit(path, R"({"n_critic": 2, "seed": 4})");
  const TrainConfig loaded = load_train_config(path);
  CHECK(loaded.n_critic == 2);
  CHECK(loaded.seed == 4);
  CHECK(loaded.batch_size == 128);
}

TEST_CASE("iteration arithmetic") {
  TrainConfig c;
  c.batch_size = 128;
  c.epochs = 20;
  CHECK(iterations_per_epoch(c, 1000) == 7);
  CHECK(total_iterations(c, 1000) == 140);
  CHECK(iterations_per_epoch(c, 50) == 1);
  c.max_iterations = 9;
  CHECK(total_iterations(c, 1000) == 9);
}

TEST_CASE("wgan schedule: generator every n_critic iterations") {
  // loss_G is measured at every logged row, but applied only on generator steps.
  TrainConfig c = small_config();
  c.n_critic = 5;
  const TrainResult r = train_l1wgan_gp(c, small_data());
  CHECK(r.log.iterations == 23);
  CHECK(r.log.discriminator_updates == 23);
  CHECK(r.log.generator_updates == 5);  // iterations 0, 5, 10, 15, 20
  CHECK(r.log.critic_grad_norms.size() == 23);
  REQUIRE(r.log.records.size() == 23);
  for (const auto& rec : r.log.records) {
    CHECK(std::isfinite(rec.loss_G));
    CHECK(std::isfinite(rec.loss_D));
    CHECK(std::isfinite(rec.gp));
    CHECK(std::isnan(rec.loss_face));
  }
}

TEST_CASE("lipgan schedule: one generator and one critic step per iteration") {
  TrainConfig c = small_config();
  c.loss_log_every = 10;
  const TrainResult r = train_lipgan(c, small_data());
  CHECK(r.log.generator_updates == 23);
  CHECK(r.log.discriminator_updates == 23);
  CHECK(r.log.critic_grad_norms.empty());
  REQUIRE(r.log.records.size() == 3);
  CHECK(r.log.records[2].iter == 20);
  for (const auto& rec : r.log.records) {
    CHECK(std::isfinite(rec.loss_face));
    CHECK(std::isfinite(rec.loss_audio));
    CHECK(std::isnan(rec.gp));
  }
}

TEST_CASE("training is deterministic and the csv writes NaN as empty") {
  TrainConfig c = small_config();
  c.loss_log_every = 4;
  const std::string a = train_log_csv(train_l1wgan_gp(c, small_data()).log);
  const std::string b = train_log_csv(train_l1wgan_gp(c, small_data()).log);
  CHECK(a == b);
  CHECK(a.rfind("iter,loss_G,loss_D,loss_face,loss_audio,gp,ssim,psnr\n", 0) == 0);
  CHECK(a.find(",,,") != std::string::npos);  // loss_face and loss_audio are unset for this model
  c.seed = 11;
  CHECK(train_log_csv(train_l1wgan_gp(c, small_data()).log) != a);
}

TEST_CASE("both penalty modes train") {
  TrainConfig c = small_config();
  c.gp_input_mode = GpMode::GeneratorOutput;
  c.max_iterations = 6;
  CHECK(train_l1wgan_gp(c, small_data()).log.generator_updates == 2);
}

TEST_CASE("divergence aborts with a numeric error") {
  TrainConfig c = small_config();
  c.learning_rate = 1e300;
  try {
    train_lipgan(c, small_data());
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("training aborted at iteration") != std::string::npos);
  }
}

TEST_CASE("sampling hook fires once per epoch and at the end") {
  TrainConfig c = small_config();
  c.max_iterations = 0;
  c.epochs = 3;
  std::vector<std::size_t> epochs;
  TrainHooks hooks;
  hooks.on_sample = [&](std::size_t, std::size_t epoch, const ToyGenerator&) { epochs.push_back(epoch); };
  train_lipgan(c, small_data(), hooks);
  CHECK(epochs == std::vector<std::size_t>{1, 2, 3});
}
