#include "ganlip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ganlip/error.hpp"
#include "ganlip/rng.hpp"

namespace ganlip {

namespace fs = std::filesystem;

double psnr(const ImageTensor& a, const ImageTensor& b, double max_val) {
  if (!a.same_shape(b)) fail(ErrorKind::InvalidArgument, "psnr: image dimensions differ");
  require(max_val > 0.0, "psnr: max_val must be > 0");
  require(a.size() > 0, "psnr: empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kInfiniteDb;
  return 10.0 * std::log10(max_val * max_val / mse);
}

std::vector<double> gaussian_taps(std::size_t window, double sigma) {
  require(window >= 1 && window % 2 == 1, "gaussian window size must be odd");
  require(sigma > 0.0, "gaussian sigma must be > 0");
  std::vector<double> taps(window);
  const double half = static_cast<double>(window / 2);
  for (std::size_t i = 0; i < window; ++i) {
    const double x = static_cast<double>(i) - half;
    taps[i] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= total;
  return taps;
}

namespace {

// Valid-mode separable filtering of one channel plane (h x w) -> (h-k+1) x (w-k+1).
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> horiz(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * plane[y * w + x + t];
      horiz[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += taps[t] * horiz[(y + t) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params) {
  if (!a.same_shape(b)) fail(ErrorKind::InvalidArgument, "ssim: image dimensions differ");
  if (std::min(a.height, a.width) < params.window)
    fail(ErrorKind::InvalidArgument, "ssim: image smaller than the " + std::to_string(params.window) + "px window");
  const auto taps = gaussian_taps(params.window, params.sigma);
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
  const std::size_t h = a.height, w = a.width, plane_size = h * w;

  double total = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    std::vector<double> pa(plane_size), pb(plane_size), paa(plane_size), pbb(plane_size), pab(plane_size);
    for (std::size_t i = 0; i < plane_size; ++i) {
      pa[i] = a.data[i * a.channels + c];
      pb[i] = b.data[i * a.channels + c];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, taps);
    const auto mu_b = filter_valid(pb, h, w, taps);
    const auto e_aa = filter_valid(paa, h, w, taps);
    const auto e_bb = filter_valid(pbb, h, w, taps);
    const auto e_ab = filter_valid(pab, h, w, taps);
    double channel_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      channel_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total += channel_sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(a.channels);
}

GaussianStats gaussian_stats(const EmbeddingSet& e) {
  if (e.n() < 2) fail(ErrorKind::InvalidArgument, "gaussian_stats: need at least two embeddings");
  const auto n = static_cast<Eigen::Index>(e.n());
  const auto d = static_cast<Eigen::Index>(e.dim());
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      e.vectors.data.data(), n, d);
  GaussianStats g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  const Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(n - 1);
  g.cov = 0.5 * (c + c.transpose());
  return g;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a, double symmetry_tol) {
  require(a.rows() == a.cols(), "matrix_sqrt_psd: matrix must be square");
  if (!a.allFinite()) fail(ErrorKind::Numeric, "matrix_sqrt_psd: non-finite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale)
    fail(ErrorKind::InvalidArgument, "matrix_sqrt_psd: matrix is not symmetric");
  if (a.size() == 0) return a;
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) fail(ErrorKind::Numeric, "matrix_sqrt_psd: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double threshold = 1e-8 * std::max(0.0, lambda.maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda[i] = lambda[i] < threshold ? 0.0 : std::sqrt(lambda[i]);
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::MatrixXd r = v * lambda.asDiagonal() * v.transpose();
  return 0.5 * (r + r.transpose());
}

double frechet_distance(const GaussianStats& g1, const GaussianStats& g2) {
  if (g1.dim() != g2.dim())
    fail(ErrorKind::InvalidArgument, "frechet_distance: dimension mismatch " + std::to_string(g1.dim()) + " vs " +
                                         std::to_string(g2.dim()));
  // Same distribution: skip the eigen solves, whose rounding would leave a small positive residue.
  if (g1.mean == g2.mean && g1.cov == g2.cov) return 0.0;
  const double mean_term = (g1.mean - g2.mean).squaredNorm();
  // Tr((S1 S2)^(1/2)) = Tr((R S2 R)^(1/2)) with R = S1^(1/2).
  const Eigen::MatrixXd r1 = matrix_sqrt_psd(g1.cov, 1e-6);
  Eigen::MatrixXd inner = r1 * g2.cov * r1;
  inner = 0.5 * (inner + inner.transpose());
  if (!inner.allFinite()) fail(ErrorKind::Numeric, "frechet_distance: non-finite covariance product");
  // Only the trace is needed. Eigenvalues of inner are squared ones, so no relative cutoff here:
  // it would drop real mass from the small directions. Rounding negatives are clamped.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorKind::Numeric, "frechet_distance: eigendecomposition failed");
  double cross = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) cross += std::sqrt(std::max(0.0, eig.eigenvalues()[i]));
  const double value = mean_term + g1.cov.trace() + g2.cov.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Fences tukey_fences(double q1, double q3) {
  const double iqr = q3 - q1;
  return {q1 - 1.5 * iqr, q3 + 1.5 * iqr};
}

MetricsSummary summarize(std::span<const double> scores, bool omit_outliers_in_quartile_plot) {
  if (scores.empty()) fail(ErrorKind::InvalidArgument, "summarize: empty input");
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double v : sorted)
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "summarize: non-finite score");
  std::sort(sorted.begin(), sorted.end());

  MetricsSummary s;
  s.n = sorted.size();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(s.n);
  s.median = quantile_sorted(sorted, 0.5);
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  const Fences f = tukey_fences(s.q1, s.q3);
  s.lower_fence = f.lower;
  s.upper_fence = f.upper;
  s.whisker_low = s.min;
  s.whisker_high = s.max;
  bool first_inside = true;
  for (double v : sorted) {
    if (v < f.lower || v > f.upper) {
      ++s.n_outliers;
      continue;
    }
    if (omit_outliers_in_quartile_plot) {
      if (first_inside) s.whisker_low = v;
      s.whisker_high = v;
      first_inside = false;
    }
  }
  return s;
}

void write_emb1(const fs::path& path, const EmbeddingSet& e) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(e.n());
  const auto d = static_cast<std::uint32_t>(e.dim());
  out.write("EMB1", 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  const std::vector<float> values(e.vectors.data.begin(), e.vectors.data.end());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

EmbeddingSet read_emb1(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  std::uint32_t n = 0, d = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || std::memcmp(magic, "EMB1", 4) != 0) fail(ErrorKind::Format, path.string() + ": not an EMB1 file");
  std::vector<float> values(static_cast<std::size_t>(n) * d);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) fail(ErrorKind::Format, path.string() + ": truncated EMB1 payload");
  return EmbeddingSet{Matrix(n, d, std::vector<double>(values.begin(), values.end()))};
}

ToyEmbedder::ToyEmbedder(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed)
    : input_dim_(input_dim), output_dim_(output_dim), seed_(seed), projection_(output_dim, input_dim) {
  require(input_dim > 0 && output_dim > 0, "toy embedder: dimensions must be positive");
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& v : projection_.data) v = rng.normal() * s;
}

std::vector<double> ToyEmbedder::embed(const ImageTensor& image) const {
  if (image.size() != input_dim_)
    fail(ErrorKind::InvalidArgument, "toy embedder: expected " + std::to_string(input_dim_) + " values, got " +
                                         std::to_string(image.size()));
  std::vector<double> out(output_dim_, 0.0);
  for (std::size_t o = 0; o < output_dim_; ++o) {
    double acc = 0.0;
    const auto row = projection_.row(o);
    for (std::size_t i = 0; i < input_dim_; ++i) acc += row[i] * image.data[i];
    out[o] = acc;
  }
  return out;
}

EmbeddingSet ToyEmbedder::embed_all(std::span<const ImageTensor> images) const {
  EmbeddingSet set{Matrix(images.size(), output_dim_)};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto v = embed(images[i]);
    std::copy(v.begin(), v.end(), set.vectors.row(i).begin());
  }
  return set;
}

std::string ToyEmbedder::label() const {
  return "toy-random-projection(dim=" + std::to_string(output_dim_) + ",seed=" + std::to_string(seed_) + ")";
}

}  // namespace ganlip
