#pragma once

// Test-only float64 reference implementations used as the independent oracle
// for finite-difference gradient checks. Deliberately naive loops; no code is
// shared with the engine.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace refops {

using Vec = std::vector<double>;

inline Vec matmul(const Vec& a, const Vec& b, int m, int k, int n) {
  Vec c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

// y = x * w^T + bias, x [m,k], w [n,k]
inline Vec linear(const Vec& x, const Vec& w, const Vec& bias, int m, int k, int n) {
  Vec y(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = bias.empty() ? 0.0 : bias[j];
      for (int t = 0; t < k; ++t) acc += x[i * k + t] * w[j * k + t];
      y[i * n + j] = acc;
    }
  return y;
}

inline Vec conv2d(const Vec& x, const Vec& w, const Vec& bias, int batch, int in_ch, int in_h,
                  int in_w, int out_ch, int kh, int kw, int stride, int pad) {
  const int out_h = (in_h + 2 * pad - kh) / stride + 1;
  const int out_w = (in_w + 2 * pad - kw) / stride + 1;
  Vec y(static_cast<size_t>(batch) * out_ch * out_h * out_w, 0.0);
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < out_ch; ++o)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (int c = 0; c < in_ch; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                acc += w[((o * in_ch + c) * kh + ky) * kw + kx] *
                       x[((b * in_ch + c) * in_h + iy) * in_w + ix];
              }
          y[((b * out_ch + o) * out_h + oy) * out_w + ox] = acc;
        }
  return y;
}

inline Vec maxpool2d(const Vec& x, int planes, int in_h, int in_w, int k) {
  const int out_h = in_h / k, out_w = in_w / k;
  Vec y(static_cast<size_t>(planes) * out_h * out_w);
  for (int p = 0; p < planes; ++p)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            best = std::max(best, x[(p * in_h + oy * k + dy) * in_w + ox * k + dx]);
        y[(p * out_h + oy) * out_w + ox] = best;
      }
  return y;
}

inline Vec softmax_rows(const Vec& x, int rows, int cols) {
  Vec y(x.size());
  for (int r = 0; r < rows; ++r) {
    double mx = x[r * cols];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, x[r * cols + c]);
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) denom += std::exp(x[r * cols + c] - mx);
    for (int c = 0; c < cols; ++c) y[r * cols + c] = std::exp(x[r * cols + c] - mx) / denom;
  }
  return y;
}

inline Vec layer_norm(const Vec& x, const Vec& gamma, const Vec& beta, int rows, int cols,
                      double eps = 1e-5) {
  Vec y(x.size());
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += x[r * cols + c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = x[r * cols + c] - mean;
      var += d * d;
    }
    var /= cols;
    const double istd = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < cols; ++c) {
      y[r * cols + c] = (x[r * cols + c] - mean) * istd * gamma[c] + beta[c];
    }
  }
  return y;
}

inline Vec normalize_rows(const Vec& x, int rows, int cols, double eps = 1e-12) {
  Vec y(x.size());
  for (int r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (int c = 0; c < cols; ++c) sq += x[r * cols + c] * x[r * cols + c];
    const double norm = std::max(std::sqrt(sq), eps);
    for (int c = 0; c < cols; ++c) y[r * cols + c] = x[r * cols + c] / norm;
  }
  return y;
}

inline double tanh_v(double v) { return std::tanh(v); }
inline double gelu_v(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }
inline double relu_v(double v) { return v > 0.0 ? v : 0.0; }
inline double sigmoid_v(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double mse(const Vec& p, const Vec& t) {
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

inline double weighted_mse(const Vec& p, const Vec& t, const Vec& w) {
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    acc += w[i % w.size()] * (p[i] - t[i]) * (p[i] - t[i]);
  }
  return acc / static_cast<double>(p.size());
}

inline double cross_entropy(const Vec& logits, const std::vector<int>& labels, int batch,
                            int classes) {
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    double mx = logits[i * classes];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, logits[i * classes + c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) denom += std::exp(logits[i * classes + c] - mx);
    total += -(logits[i * classes + labels[i]] - mx - std::log(denom));
  }
  return total / batch;
}

}  // namespace refops
