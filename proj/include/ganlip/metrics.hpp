#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ganlip/image.hpp"
#include "ganlip/matrix.hpp"

namespace ganlip {

inline constexpr double kInfiniteDb = std::numeric_limits<double>::infinity();

// 10 log10(max^2 / MSE); +inf when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b, double max_val = 1.0);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(std::size_t window, double sigma);

// Mean SSIM over all window positions lying fully inside the image
// (weighted statistics, no border padding); channels are averaged.
double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params = {});

// n x dim embeddings, one row per image.
struct EmbeddingSet {
  Matrix vectors;
  std::size_t n() const noexcept { return vectors.rows; }
  std::size_t dim() const noexcept { return vectors.cols; }
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

// Sample mean and unbiased covariance (divisor n - 1), symmetrized.
GaussianStats gaussian_stats(const EmbeddingSet& e);

// Symmetric PSD square root via eigendecomposition. Eigenvalues below
// 1e-8 * max eigenvalue (including negative ones) are treated as zero.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a, double symmetry_tol = 1e-9);

// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), clamped at zero.
double frechet_distance(const GaussianStats& g1, const GaussianStats& g2);

struct MetricsSummary {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lower_fence = 0.0;
  double upper_fence = 0.0;
  // Box-plot whisker ends: the data extremes, or the most extreme values
  // inside the fences when outliers are omitted.
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::size_t n = 0;
  std::size_t n_outliers = 0;
};

// Linear-interpolation quantile of sorted data, position p * (n - 1).
double quantile_sorted(std::span<const double> sorted, double p);

struct Fences {
  double lower;
  double upper;
};
// Tukey fences at 1.5 IQR.
Fences tukey_fences(double q1, double q3);

MetricsSummary summarize(std::span<const double> scores, bool omit_outliers_in_quartile_plot = true);

// "EMB1": magic, u32 n, u32 dim, n*dim float32, little-endian.
void write_emb1(const std::filesystem::path& path, const EmbeddingSet& e);
EmbeddingSet read_emb1(const std::filesystem::path& path);

// Fixed seeded random projection of a flattened image. Not an Inception
// network: scores are only comparable between runs using the same embedder.
class ToyEmbedder {
 public:
  ToyEmbedder(std::size_t input_dim, std::size_t output_dim = 64, std::uint64_t seed = 10);

  std::vector<double> embed(const ImageTensor& image) const;
  EmbeddingSet embed_all(std::span<const ImageTensor> images) const;
  std::string label() const;

 private:
  std::size_t input_dim_;
  std::size_t output_dim_;
  std::uint64_t seed_;
  Matrix projection_;  // output_dim x input_dim
};

}  // namespace ganlip
