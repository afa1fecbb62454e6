#pragma once

// Reference implementations used only by the tests. They follow the textbook
// formulas directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "ganlip/image.hpp"
#include "ganlip/matrix.hpp"
#include "ganlip/rng.hpp"

namespace oracle {

inline ganlip::ImageTensor random_image(ganlip::Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  ganlip::ImageTensor img(h, w, c);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

inline ganlip::Matrix random_matrix(ganlip::Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                                    double hi = 1.0) {
  ganlip::Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// SSIM straight from the definition: explicit 2-D Gaussian window per
// position, two-pass weighted moments, mean over valid positions and channels.
inline double ssim_brute(const ganlip::ImageTensor& a, const ganlip::ImageTensor& b, std::size_t win = 11,
                         double sigma = 1.5, double k1 = 0.01, double k2 = 0.03, double range = 1.0) {
  std::vector<double> w(win * win);
  const double half = (static_cast<double>(win) - 1.0) / 2.0;
  double total_w = 0.0;
  for (std::size_t y = 0; y < win; ++y)
    for (std::size_t x = 0; x < win; ++x) {
      const double dy = y - half, dx = x - half;
      w[y * win + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total_w += w[y * win + x];
    }
  for (auto& v : w) v /= total_w;
  const double c1 = (k1 * range) * (k1 * range), c2 = (k2 * range) * (k2 * range);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < a.channels; ++ch)
    for (std::size_t oy = 0; oy + win <= a.height; ++oy)
      for (std::size_t ox = 0; ox + win <= a.width; ++ox) {
        double ma = 0, mb = 0;
        for (std::size_t y = 0; y < win; ++y)
          for (std::size_t x = 0; x < win; ++x) {
            ma += w[y * win + x] * a.at(oy + y, ox + x, ch);
            mb += w[y * win + x] * b.at(oy + y, ox + x, ch);
          }
        double va = 0, vb = 0, cov = 0;
        for (std::size_t y = 0; y < win; ++y)
          for (std::size_t x = 0; x < win; ++x) {
            const double da = a.at(oy + y, ox + x, ch) - ma, db = b.at(oy + y, ox + x, ch) - mb;
            va += w[y * win + x] * da * da;
            vb += w[y * win + x] * db * db;
            cov += w[y * win + x] * da * db;
          }
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return sum / static_cast<double>(count);
}

inline double psnr_formula(const ganlip::ImageTensor& a, const ganlip::ImageTensor& b, double max_val = 1.0) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) mse += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  mse /= static_cast<double>(a.data.size());
  return 10.0 * std::log10(max_val * max_val / mse);
}

// Small dense helpers on row-major std::vector matrices.
using Mat = std::vector<std::vector<double>>;

inline Mat identity(std::size_t n) {
  Mat m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

// Random orthogonal matrix by modified Gram-Schmidt on Gaussian columns.
inline Mat random_orthogonal(ganlip::Rng& rng, std::size_t n) {
  Mat q(n, std::vector<double>(n));
  for (auto& row : q)
    for (auto& v : row) v = rng.normal();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += q[i][j] * q[i][k];
      for (std::size_t i = 0; i < n; ++i) q[i][j] -= dot * q[i][k];
    }
    double norm = 0;
    for (std::size_t i = 0; i < n; ++i) norm += q[i][j] * q[i][j];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q[i][j] /= norm;
  }
  return q;
}

// Q diag(d) Q^T
inline Mat spectral(const Mat& q, const std::vector<double>& d) {
  Mat qd = q;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) qd[i][j] *= d[j];
  Mat out = matmul(qd, transpose(q));
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) out[i][j] = out[j][i] = 0.5 * (out[i][j] + out[j][i]);
  return out;
}

// Fourth-order central difference.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

inline std::vector<double> gradient(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    g[i] = derivative(
        [&](double t) {
          x[i] = t;
          return f(x);
        },
        x0, h);
    x[i] = x0;
  }
  return g;
}

// Dense tanh MLP critic on plain doubles: D(x) = W_L^T ... tanh(W_1^T x + b_1) ... + b_L.
// Parameters are stored W0 (in x out, row-major), b0, W1, b1, ... flattened.
struct TanhCritic {
  std::vector<std::size_t> widths;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
    return n;
  }

  double operator()(const std::vector<double>& theta, const std::vector<double>& x) const {
    std::vector<double> h = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::size_t in = widths[l], out = widths[l + 1];
      std::vector<double> next(out, 0.0);
      for (std::size_t j = 0; j < out; ++j) {
        double s = theta[off + in * out + j];
        for (std::size_t i = 0; i < in; ++i) s += h[i] * theta[off + i * out + j];
        next[j] = l + 2 < widths.size() ? std::tanh(s) : s;
      }
      off += in * out + out;
      h = std::move(next);
    }
    return h[0];
  }
};

// Penalty mean_i (|grad_x D(x_i)| - 1)^2 with the input gradient itself taken by finite differences.
inline double nested_fd_penalty(const TanhCritic& critic, const std::vector<double>& theta,
                                const std::vector<std::vector<double>>& points, double h_inner) {
  double total = 0.0;
  for (const auto& x : points) {
    const auto g = gradient([&](const std::vector<double>& xx) { return critic(theta, xx); }, x, h_inner);
    double n2 = 0;
    for (double v : g) n2 += v * v;
    total += (std::sqrt(n2) - 1.0) * (std::sqrt(n2) - 1.0);
  }
  return total / static_cast<double>(points.size());
}

inline double mean_sequential(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Naive DFT magnitude of a real frame.
inline std::vector<double> dft_magnitude(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < n; ++t)
      acc += frame[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    out[k] = std::abs(acc);
  }
  return out;
}

inline double hz_to_mel_htk(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz_htk(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace oracle
