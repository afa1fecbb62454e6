#include "ganlip/losses.hpp"

#include <cmath>
#include <string>

#include "ganlip/error.hpp"

namespace ganlip {

using ad::Value;

ad::Value l1_reconstruction_loss(Value generated, Value targets) {
  if (!generated.data().same_shape(targets.data()) || generated.rows() == 0)
    fail(ErrorKind::InvalidArgument, "l1 loss: generated and target batches differ in shape");
  return ad::scale(ad::sum(ad::abs(generated - targets)), 1.0 / static_cast<double>(generated.rows()));
}

double l1_reconstruction_loss(const Matrix& generated, const Matrix& targets) {
  if (!generated.same_shape(targets) || generated.rows == 0)
    fail(ErrorKind::InvalidArgument, "l1 loss: generated and target batches differ in shape");
  double total = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) total += std::fabs(generated.data[i] - targets.data[i]);
  return total / static_cast<double>(generated.rows);
}

Matrix penalty_points(const Matrix& real, const Matrix& fake, GpMode mode, Rng& rng) {
  if (!real.same_shape(fake) || real.rows == 0)
    fail(ErrorKind::InvalidArgument, "gradient penalty: real and fake batches differ in shape");
  if (mode == GpMode::GeneratorOutput) return fake;
  Matrix out(real.rows, real.cols);
  for (std::size_t i = 0; i < real.rows; ++i) {
    const double eps = rng.uniform();
    for (std::size_t j = 0; j < real.cols; ++j) out(i, j) = eps * real(i, j) + (1.0 - eps) * fake(i, j);
  }
  return out;
}

PenaltyResult gradient_penalty_at(ad::Tape& tape, const FaceCritic& critic, const Matrix& points) {
  const Value x = tape.leaf(points);
  const Value scores = critic(x);
  if (scores.rows() != points.rows || scores.cols() != 1)
    fail(ErrorKind::InvalidArgument, "gradient penalty: critic must return one score per sample");

  // Rows are scored independently, so the gradient of the summed scores
  // holds each sample's own input gradient in its row.
  const Value x_list[] = {x};
  const ad::Gradients g = ad::grad(ad::sum(scores), x_list, /*create_graph=*/true);
  const Value norms = ad::l2_norm_rows(g.values[0]);

  PenaltyResult result;
  result.grad_norms = norms.data().data;
  for (double n : result.grad_norms)
    if (!std::isfinite(n)) fail(ErrorKind::Numeric, "gradient penalty: non-finite input gradient");
  result.penalty = ad::mean(ad::square(ad::add_scalar(norms, -1.0)));
  return result;
}

PenaltyResult gradient_penalty(ad::Tape& tape, const FaceCritic& critic, const Matrix& real, const Matrix& fake,
                               GpMode mode, Rng& rng) {
  return gradient_penalty_at(tape, critic, penalty_points(real, fake, mode, rng));
}

ad::Value wgan_gp_loss(Value d_fake, Value d_real, Value gp, double lambda_gp) {
  require(d_fake.data().size() > 0 && d_real.data().size() > 0, "wgan loss: empty score batch");
  return ad::mean(d_fake) - ad::mean(d_real) + ad::scale(gp, lambda_gp);
}

ad::Value wgan_generator_loss(Value d_fake, Value l1, double l1_weight) {
  require(d_fake.data().size() > 0, "wgan generator loss: empty score batch");
  return ad::scale(ad::mean(d_fake), -1.0) + ad::scale(l1, l1_weight);
}

ad::Value bce_with_logits(Value logits, bool label) {
  require(logits.data().size() > 0, "bce: empty batch");
  Value p = ad::clamp(ad::sigmoid(logits), kProbClampLow, kProbClampHigh);
  if (!label) p = ad::add_scalar(ad::scale(p, -1.0), 1.0);
  return ad::scale(ad::mean(ad::log(p)), -1.0);
}

LipGanLosses lipgan_losses_from_logits(Value real_logits, Value fake_logits, Value unsynced_logits) {
  if (real_logits.rows() != fake_logits.rows() || real_logits.rows() != unsynced_logits.rows())
    fail(ErrorKind::InvalidArgument, "lipgan losses: batches are not aligned");
  LipGanLosses out;
  out.loss_real = bce_with_logits(real_logits, true);
  out.loss_face = bce_with_logits(fake_logits, false);
  out.loss_audio = bce_with_logits(unsynced_logits, false);
  out.loss_D = out.loss_real + ad::scale(out.loss_face + out.loss_audio, 0.5);
  return out;
}

LipGanLosses lipgan_losses(const PairCritic& critic, Value real_faces, Value fake_faces, Value audio,
                           Value unsynced_audio) {
  if (!real_faces.data().same_shape(fake_faces.data()) || !audio.data().same_shape(unsynced_audio.data()) ||
      real_faces.rows() != audio.rows())
    fail(ErrorKind::InvalidArgument, "lipgan losses: face/audio batches are not aligned");
  return lipgan_losses_from_logits(critic(real_faces, audio), critic(fake_faces, audio),
                                   critic(real_faces, unsynced_audio));
}

ad::Value lipgan_generator_loss(Value l1, Value loss_adv, double adv_weight) {
  return l1 + ad::scale(loss_adv, adv_weight);
}

}  // namespace ganlip
