#pragma once

#include <functional>
#include <vector>

#include "ganlip/autodiff.hpp"
#include "ganlip/matrix.hpp"
#include "ganlip/rng.hpp"

namespace ganlip {

// Batch rows are flattened samples.
// (1/N) sum_i |S_i - S-hat_i|_1
ad::Value l1_reconstruction_loss(ad::Value generated, ad::Value targets);
double l1_reconstruction_loss(const Matrix& generated, const Matrix& targets);

enum class GpMode {
  Interpolated,     // x-hat = eps * real + (1 - eps) * fake, eps ~ U[0, 1] per sample
  GeneratorOutput,  // x-hat = fake
};

// Scores a batch of faces (N x D) with the audio condition bound in; returns N x 1.
// Must score every row independently of the others.
using FaceCritic = std::function<ad::Value(ad::Value faces)>;

struct PenaltyResult {
  ad::Value penalty;             // 1 x 1, differentiable w.r.t. the critic parameters
  std::vector<double> grad_norms;  // |grad_x D(x-hat_i)|_2 per sample
};

// mean_i (|grad_x D(x-hat_i)|_2 - 1)^2 at the given penalty points.
PenaltyResult gradient_penalty_at(ad::Tape& tape, const FaceCritic& critic, const Matrix& points);

// Builds the penalty points from detached real and fake batches, then
// evaluates the penalty there.
PenaltyResult gradient_penalty(ad::Tape& tape, const FaceCritic& critic, const Matrix& real, const Matrix& fake,
                               GpMode mode, Rng& rng);

Matrix penalty_points(const Matrix& real, const Matrix& fake, GpMode mode, Rng& rng);

// mean(d_fake) - mean(d_real) + lambda * gp
ad::Value wgan_gp_loss(ad::Value d_fake, ad::Value d_real, ad::Value gp, double lambda_gp);

// -mean(d_fake) + l1_weight * l1
ad::Value wgan_generator_loss(ad::Value d_fake, ad::Value l1, double l1_weight);

inline constexpr double kProbClampLow = 1e-7;
inline constexpr double kProbClampHigh = 1.0 - 1e-7;

// Mean binary cross-entropy of sigmoid(logits) against a constant label.
ad::Value bce_with_logits(ad::Value logits, bool label);

using PairCritic = std::function<ad::Value(ad::Value faces, ad::Value audio)>;

struct LipGanLosses {
  ad::Value loss_D;
  ad::Value loss_face;   // fake face, synced audio, label 0
  ad::Value loss_audio;  // real face, unsynced audio, label 0
  ad::Value loss_real;   // real face, synced audio, label 1
};

// loss_D = loss_real + (loss_face + loss_audio) / 2
LipGanLosses lipgan_losses(const PairCritic& critic, ad::Value real_faces, ad::Value fake_faces, ad::Value audio,
                           ad::Value unsynced_audio);
LipGanLosses lipgan_losses_from_logits(ad::Value real_logits, ad::Value fake_logits, ad::Value unsynced_logits);

// l1 + adv_weight * loss_adv, with loss_adv = BCE(p(S-hat, A), 1).
ad::Value lipgan_generator_loss(ad::Value l1, ad::Value loss_adv, double adv_weight);

}  // namespace ganlip
