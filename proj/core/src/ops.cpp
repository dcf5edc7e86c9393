#include "weightgen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "weightgen/parallel.hpp"

namespace weightgen {

namespace {

bool want_grad(const Tensor& t) { return grad_enabled() && t.defined() && t.requires_grad(); }

Tensor make_out(std::vector<int> shape, std::vector<Tensor> parents, const char* op) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || want_grad(p);
  Tensor out = Tensor::zeros(std::move(shape), rg);
  if (rg) {
    auto impl = out.impl();
    impl->op = op;
    for (auto& p : parents) impl->parents.push_back(p.impl());
  }
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

float* grad_ptr(TensorImpl& impl) { return impl.grad->data(); }

// Accumulates src into dst.
void axpy_into(std::vector<float>& dst, const std::vector<float>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_out(a.shape(), {a, b}, "add");
  const auto& av = *a.impl()->data;
  const auto& bv = *b.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (out.requires_grad()) {
    out.impl()->backward = [](TensorImpl& o) {
      for (auto& p : o.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        axpy_into(*p->grad, *o.grad);
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_out(a.shape(), {a, b}, "sub");
  const auto& av = *a.impl()->data;
  const auto& bv = *b.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (out.requires_grad()) {
    out.impl()->backward = [](TensorImpl& o) {
      auto& pa = o.parents[0];
      auto& pb = o.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        axpy_into(*pa->grad, *o.grad);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        auto& g = *o.grad;
        auto& dst = *pb->grad;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_out(a.shape(), {a, b}, "mul");
  const auto& av = *a.impl()->data;
  const auto& bv = *b.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (out.requires_grad()) {
    out.impl()->backward = [](TensorImpl& o) {
      auto& pa = o.parents[0];
      auto& pb = o.parents[1];
      const auto& g = *o.grad;
      if (pa->requires_grad) {
        pa->ensure_grad();
        const auto& bv2 = *pb->data;
        auto& dst = *pa->grad;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * bv2[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        const auto& av2 = *pa->data;
        auto& dst = *pb->grad;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * av2[i];
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& a, float c) {
  Tensor out = make_out(a.shape(), {a}, "scale");
  const auto& av = *a.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
  if (out.requires_grad()) {
    out.impl()->backward = [c](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const auto& g = *o.grad;
      auto& dst = *p->grad;
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += c * g[i];
    };
  }
  return out;
}

Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("mul_scalar_tensor: scale must be a single value");
  Tensor out = make_out(x.shape(), {x, s}, "mul_scalar_tensor");
  const float sv = (*s.impl()->data)[0];
  const auto& xv = *x.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * sv;
  if (out.requires_grad()) {
    out.impl()->backward = [](TensorImpl& o) {
      auto& px = o.parents[0];
      auto& ps = o.parents[1];
      const auto& g = *o.grad;
      if (px->requires_grad) {
        px->ensure_grad();
        const float sv2 = (*ps->data)[0];
        auto& dst = *px->grad;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * sv2;
      }
      if (ps->requires_grad) {
        ps->ensure_grad();
        const auto& xv2 = *px->data;
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) acc += static_cast<double>(g[i]) * xv2[i];
        (*ps->grad)[0] += static_cast<float>(acc);
      }
    };
  }
  return out;
}

namespace {

template <class Fwd, class Dfn>
Tensor unary_op(const Tensor& x, const char* name, Fwd fwd, Dfn dfn) {
  Tensor out = make_out(x.shape(), {x}, name);
  const auto& xv = *x.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(xv[i]);
  if (out.requires_grad()) {
    out.impl()->backward = [dfn](TensorImpl& o) {
      auto& p = o.parents[0];
      if (!p->requires_grad) return;
      p->ensure_grad();
      const auto& g = *o.grad;
      const auto& xv2 = *p->data;
      const auto& yv = *o.data;
      auto& dst = *p->grad;
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * dfn(xv2[i], yv[i]);
    };
  }
  return out;
}

}  // namespace

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, "tanh", [](float v) { return std::tanh(v); },
      [](float, float y) { return 1.0f - y * y; });
}

Tensor gelu(const Tensor& x) {
  // Exact gelu: x * Phi(x).
  constexpr float inv_sqrt2 = 0.70710678118654752440f;
  constexpr float inv_sqrt2pi = 0.39894228040143267794f;
  return unary_op(
      x, "gelu",
      [](float v) { return 0.5f * v * (1.0f + std::erf(v * inv_sqrt2)); },
      [](float v, float) {
        float cdf = 0.5f * (1.0f + std::erf(v * inv_sqrt2));
        float pdf = inv_sqrt2pi * std::exp(-0.5f * v * v);
        return cdf + v * pdf;
      });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, "sigmoid", [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor reciprocal(const Tensor& x) {
  return unary_op(
      x, "reciprocal", [](float v) { return 1.0f / v; },
      [](float, float y) { return -y * y; });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

namespace {

// Contiguous-row kernel: C[m,:] (+)= sum_k A[m,k] * B[k,:]. The k-outer axpy
// form vectorizes far better than dot products, so the other orientations are
// packed into this layout first.
void gemm_ikj(const float* a_mk, const float* b_kn, float* c, int m_dim, int n_dim, int k_dim,
              bool accumulate) {
  for (int m = 0; m < m_dim; ++m) {
    float* crow = c + static_cast<size_t>(m) * n_dim;
    if (!accumulate) std::fill(crow, crow + n_dim, 0.0f);
    const float* arow = a_mk + static_cast<size_t>(m) * k_dim;
    for (int k = 0; k < k_dim; ++k) {
      const float av = arow[k];
      const float* brow = b_kn + static_cast<size_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

void pack_transpose(const float* src, int rows, int cols, float* dst) {
  // dst[c, r] = src[r, c]
  for (int r = 0; r < rows; ++r) {
    const float* srow = src + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) dst[static_cast<size_t>(c) * rows + r] = srow[c];
  }
}

// C[m,n] (+)= sum_k A(m,k) * B(k,n), with A stored [M,K] or [K,M] and B
// stored [K,N] or [N,K]. Loop orders keep the innermost access contiguous.
void gemm_raw(const float* a, const float* b, float* c, int m_dim, int n_dim, int k_dim,
              bool trans_a, bool trans_b, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m_dim) * n_dim, 0.0f);
  if (!trans_a && !trans_b) {
    for (int m = 0; m < m_dim; ++m) {
      float* crow = c + static_cast<size_t>(m) * n_dim;
      const float* arow = a + static_cast<size_t>(m) * k_dim;
      for (int k = 0; k < k_dim; ++k) {
        const float av = arow[k];
        const float* brow = b + static_cast<size_t>(k) * n_dim;
        for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
      }
    }
  } else if (!trans_a && trans_b) {
    for (int m = 0; m < m_dim; ++m) {
      float* crow = c + static_cast<size_t>(m) * n_dim;
      const float* arow = a + static_cast<size_t>(m) * k_dim;
      for (int n = 0; n < n_dim; ++n) {
        const float* brow = b + static_cast<size_t>(n) * k_dim;
        float acc = 0.0f;
        for (int k = 0; k < k_dim; ++k) acc += arow[k] * brow[k];
        crow[n] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (int k = 0; k < k_dim; ++k) {
      const float* arow = a + static_cast<size_t>(k) * m_dim;
      const float* brow = b + static_cast<size_t>(k) * n_dim;
      for (int m = 0; m < m_dim; ++m) {
        const float av = arow[m];
        float* crow = c + static_cast<size_t>(m) * n_dim;
        for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
      }
    }
  } else {
    for (int m = 0; m < m_dim; ++m) {
      float* crow = c + static_cast<size_t>(m) * n_dim;
      for (int n = 0; n < n_dim; ++n) {
        const float* brow = b + static_cast<size_t>(n) * k_dim;
        float acc = 0.0f;
        for (int k = 0; k < k_dim; ++k) acc += a[static_cast<size_t>(k) * m_dim + m] * brow[k];
        crow[n] += acc;
      }
    }
  }
}

// Packs transposed operands into scratch so the hot loop always runs the
// vector-friendly ikj kernel, then partitions output rows across the pool.
void gemm_parallel(const float* a, const float* b, float* c, int m_dim, int n_dim, int k_dim,
                   bool trans_a, bool trans_b, bool accumulate) {
  if (static_cast<int64_t>(m_dim) * n_dim * k_dim < (1 << 14)) {
    gemm_raw(a, b, c, m_dim, n_dim, k_dim, trans_a, trans_b, accumulate);
    return;
  }
  std::vector<float> a_scratch, b_scratch;
  const float* a_mk = a;
  const float* b_kn = b;
  if (trans_a) {
    a_scratch.resize(static_cast<size_t>(m_dim) * k_dim);
    pack_transpose(a, k_dim, m_dim, a_scratch.data());
    a_mk = a_scratch.data();
  }
  if (trans_b) {
    b_scratch.resize(static_cast<size_t>(k_dim) * n_dim);
    pack_transpose(b, n_dim, k_dim, b_scratch.data());
    b_kn = b_scratch.data();
  }
  parallel_for(m_dim, [&](int64_t lo, int64_t hi) {
    gemm_ikj(a_mk + lo * k_dim, b_kn, c + lo * n_dim, static_cast<int>(hi - lo), n_dim, k_dim,
             accumulate);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const int m_dim = a.dim(0), k_dim = a.dim(1), n_dim = b.dim(1);
  Tensor out = make_out({m_dim, n_dim}, {a, b}, "matmul");
  gemm_parallel(a.impl()->data->data(), b.impl()->data->data(), out.impl()->data->data(), m_dim,
                n_dim, k_dim, false, false, false);
  if (out.requires_grad()) {
    out.impl()->backward = [m_dim, k_dim, n_dim](TensorImpl& o) {
      auto& pa = o.parents[0];
      auto& pb = o.parents[1];
      const float* g = o.grad->data();
      if (pa->requires_grad) {
        pa->ensure_grad();
        // dA = G * B^T
        gemm_parallel(g, pb->data->data(), grad_ptr(*pa), m_dim, k_dim, n_dim, false, true, true);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        // dB = A^T * G
        gemm_parallel(pa->data->data(), g, grad_ptr(*pb), k_dim, n_dim, m_dim, true, false, true);
      }
    };
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1)) {
    throw ShapeError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                     shape_str(w.shape()));
  }
  const int m_dim = x.dim(0), k_dim = x.dim(1), n_dim = w.dim(0);
  if (b.defined() && b.numel() != n_dim) {
    throw ShapeError("linear: bias length " + std::to_string(b.numel()) + " vs out dim " +
                     std::to_string(n_dim));
  }
  std::vector<Tensor> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  Tensor out = make_out({m_dim, n_dim}, parents, "linear");
  // y = x * w^T (+ b)
  gemm_parallel(x.impl()->data->data(), w.impl()->data->data(), out.impl()->data->data(), m_dim,
                n_dim, k_dim, false, true, false);
  if (b.defined()) {
    const auto& bv = *b.impl()->data;
    auto& ov = *out.impl()->data;
    for (int m = 0; m < m_dim; ++m) {
      float* row = ov.data() + static_cast<size_t>(m) * n_dim;
      for (int n = 0; n < n_dim; ++n) row[n] += bv[static_cast<size_t>(n)];
    }
  }
  const bool has_bias = b.defined();
  if (out.requires_grad()) {
    out.impl()->backward = [m_dim, k_dim, n_dim, has_bias](TensorImpl& o) {
      auto& px = o.parents[0];
      auto& pw = o.parents[1];
      const float* g = o.grad->data();
      if (px->requires_grad) {
        px->ensure_grad();
        // dx = G * W
        gemm_parallel(g, pw->data->data(), grad_ptr(*px), m_dim, k_dim, n_dim, false, false, true);
      }
      if (pw->requires_grad) {
        pw->ensure_grad();
        // dW = G^T * X
        gemm_parallel(g, px->data->data(), grad_ptr(*pw), n_dim, k_dim, m_dim, true, false, true);
      }
      if (has_bias && o.parents[2]->requires_grad) {
        auto& pb = o.parents[2];
        pb->ensure_grad();
        auto& db = *pb->grad;
        for (int m = 0; m < m_dim; ++m) {
          const float* row = g + static_cast<size_t>(m) * n_dim;
          for (int n = 0; n < n_dim; ++n) db[static_cast<size_t>(n)] += row[n];
        }
      }
    };
  }
  return out;
}

namespace {

void bmm_raw(const float* a, const float* b, float* c, int groups, int m_dim, int n_dim, int k_dim,
             bool trans_a, bool trans_b, bool accumulate) {
  const size_t a_sz = static_cast<size_t>(m_dim) * k_dim;
  const size_t b_sz = static_cast<size_t>(k_dim) * n_dim;
  const size_t c_sz = static_cast<size_t>(m_dim) * n_dim;
  parallel_for(groups, [&](int64_t lo, int64_t hi) {
    std::vector<float> a_scratch, b_scratch;
    if (trans_a) a_scratch.resize(a_sz);
    if (trans_b) b_scratch.resize(b_sz);
    for (int64_t g = lo; g < hi; ++g) {
      const float* a_mk = a + g * a_sz;
      const float* b_kn = b + g * b_sz;
      if (trans_a) {
        pack_transpose(a_mk, k_dim, m_dim, a_scratch.data());
        a_mk = a_scratch.data();
      }
      if (trans_b) {
        pack_transpose(b_kn, n_dim, k_dim, b_scratch.data());
        b_kn = b_scratch.data();
      }
      gemm_ikj(a_mk, b_kn, c + g * c_sz, m_dim, n_dim, k_dim, accumulate);
    }
  });
}

}  // namespace

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const int groups = a.dim(0);
  const int m_dim = trans_a ? a.dim(2) : a.dim(1);
  const int k_dim = trans_a ? a.dim(1) : a.dim(2);
  const int kb = trans_b ? b.dim(2) : b.dim(1);
  const int n_dim = trans_b ? b.dim(1) : b.dim(2);
  if (k_dim != kb) {
    throw ShapeError("bmm: inner dims differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = make_out({groups, m_dim, n_dim}, {a, b}, "bmm");
  bmm_raw(a.impl()->data->data(), b.impl()->data->data(), out.impl()->data->data(), groups, m_dim,
          n_dim, k_dim, trans_a, trans_b, false);
  if (out.requires_grad()) {
    out.impl()->backward = [groups, m_dim, n_dim, k_dim, trans_a, trans_b](TensorImpl& o) {
      auto& pa = o.parents[0];
      auto& pb = o.parents[1];
      const float* g = o.grad->data();
      const float* av = pa->data->data();
      const float* bv = pb->data->data();
      if (pa->requires_grad) {
        pa->ensure_grad();
        float* da = grad_ptr(*pa);
        if (!trans_a) {
          // dA = G op(B)^T : [M,K]
          bmm_raw(g, bv, da, groups, m_dim, k_dim, n_dim, false, !trans_b, true);
        } else {
          // A stored [K,M]; dA^T = op(B) G^T -> dA[k,m] = sum_n B(k,n) G(m,n)
          bmm_raw(bv, g, da, groups, k_dim, m_dim, n_dim, trans_b, true, true);
        }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        float* db = grad_ptr(*pb);
        if (!trans_b) {
          // dB = op(A)^T G : [K,N]
          bmm_raw(av, g, db, groups, k_dim, n_dim, m_dim, !trans_a, false, true);
        } else {
          // B stored [N,K]; dB[n,k] = sum_m G(m,n) A(m,k)
          bmm_raw(g, av, db, groups, n_dim, k_dim, m_dim, true, trans_a, true);
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution stack
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw ShapeError("conv2d: expected 4-d input and kernel, got " + shape_str(x.shape()) +
                     " and " + shape_str(w.shape()));
  }
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(w.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  const int batch = x.dim(0), in_ch = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const int out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int out_h = (in_h + 2 * padding - kh) / stride + 1;
  const int out_w = (in_w + 2 * padding - kw) / stride + 1;
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " too large for input " +
                     shape_str(x.shape()));
  }
  if (b.defined() && b.numel() != out_ch) {
    throw ShapeError("conv2d: bias length " + std::to_string(b.numel()) + " vs out channels " +
                     std::to_string(out_ch));
  }
  std::vector<Tensor> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  Tensor out = make_out({batch, out_ch, out_h, out_w}, parents, "conv2d");

  const float* xv = x.impl()->data->data();
  const float* wv = w.impl()->data->data();
  float* ov = out.impl()->data->data();
  const float* bv = b.defined() ? b.impl()->data->data() : nullptr;

  const size_t x_cstride = static_cast<size_t>(in_h) * in_w;
  const size_t x_bstride = static_cast<size_t>(in_ch) * x_cstride;
  const size_t o_cstride = static_cast<size_t>(out_h) * out_w;
  const size_t o_bstride = static_cast<size_t>(out_ch) * o_cstride;
  const size_t w_cstride = static_cast<size_t>(kh) * kw;
  const size_t w_ostride = static_cast<size_t>(in_ch) * w_cstride;

  parallel_for(batch, [&](int64_t blo, int64_t bhi) {
    for (int64_t bi = blo; bi < bhi; ++bi) {
      for (int oc = 0; oc < out_ch; ++oc) {
        float* oplane = ov + bi * o_bstride + oc * o_cstride;
        const float init = bv ? bv[oc] : 0.0f;
        std::fill(oplane, oplane + o_cstride, init);
        for (int ic = 0; ic < in_ch; ++ic) {
          const float* xplane = xv + bi * x_bstride + ic * x_cstride;
          const float* wplane = wv + oc * w_ostride + ic * w_cstride;
          for (int oy = 0; oy < out_h; ++oy) {
            float* orow = oplane + static_cast<size_t>(oy) * out_w;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride + ky - padding;
              if (iy < 0 || iy >= in_h) continue;
              const float* xrow = xplane + static_cast<size_t>(iy) * in_w;
              for (int kx = 0; kx < kw; ++kx) {
                const float wval = wplane[static_cast<size_t>(ky) * kw + kx];
                // valid ox range: 0 <= ox*stride + kx - padding < in_w
                int ox_lo = 0;
                if (kx - padding < 0) ox_lo = (padding - kx + stride - 1) / stride;
                int ox_hi = out_w;  // exclusive
                {
                  const int max_ix = in_w - 1 - kx + padding;
                  if (max_ix < 0) continue;
                  ox_hi = std::min(out_w, max_ix / stride + 1);
                }
                if (stride == 1) {
                  const float* xq = xrow + kx - padding;
                  for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wval * xq[ox];
                } else {
                  for (int ox = ox_lo; ox < ox_hi; ++ox) {
                    orow[ox] += wval * xrow[ox * stride + kx - padding];
                  }
                }
              }
            }
          }
        }
      }
    }
  });

  const bool has_bias = b.defined();
  if (out.requires_grad()) {
    out.impl()->backward = [=](TensorImpl& o) {
      auto& px = o.parents[0];
      auto& pw = o.parents[1];
      const float* g = o.grad->data();
      const float* xd = px->data->data();
      const float* wd = pw->data->data();
      if (px->requires_grad) {
        px->ensure_grad();
        float* dx = grad_ptr(*px);
        parallel_for(batch, [&](int64_t blo, int64_t bhi) {
          for (int64_t bi = blo; bi < bhi; ++bi) {
            for (int oc = 0; oc < out_ch; ++oc) {
              const float* gplane = g + bi * o_bstride + oc * o_cstride;
              for (int ic = 0; ic < in_ch; ++ic) {
                float* dxplane = dx + bi * x_bstride + ic * x_cstride;
                const float* wplane = wd + oc * w_ostride + ic * w_cstride;
                for (int oy = 0; oy < out_h; ++oy) {
                  const float* grow = gplane + static_cast<size_t>(oy) * out_w;
                  for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - padding;
                    if (iy < 0 || iy >= in_h) continue;
                    float* dxrow = dxplane + static_cast<size_t>(iy) * in_w;
                    for (int kx = 0; kx < kw; ++kx) {
                      const float wval = wplane[static_cast<size_t>(ky) * kw + kx];
                      for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - padding;
                        if (ix < 0 || ix >= in_w) continue;
                        dxrow[ix] += wval * grow[ox];
                      }
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (pw->requires_grad) {
        pw->ensure_grad();
        float* dw = grad_ptr(*pw);
        parallel_for(out_ch, [&](int64_t olo, int64_t ohi) {
          for (int64_t oc = olo; oc < ohi; ++oc) {
            for (int64_t bi = 0; bi < batch; ++bi) {
              const float* gplane = g + bi * o_bstride + oc * o_cstride;
              for (int ic = 0; ic < in_ch; ++ic) {
                const float* xplane = xd + bi * x_bstride + ic * x_cstride;
                float* dwplane = dw + oc * w_ostride + ic * w_cstride;
                for (int oy = 0; oy < out_h; ++oy) {
                  const float* grow = gplane + static_cast<size_t>(oy) * out_w;
                  for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - padding;
                    if (iy < 0 || iy >= in_h) continue;
                    const float* xrow = xplane + static_cast<size_t>(iy) * in_w;
                    for (int kx = 0; kx < kw; ++kx) {
                      float acc = 0.0f;
                      for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - padding;
                        if (ix < 0 || ix >= in_w) continue;
                        acc += grow[ox] * xrow[ix];
                      }
                      dwplane[static_cast<size_t>(ky) * kw + kx] += acc;
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (has_bias && o.parents[2]->requires_grad) {
        auto& pb = o.parents[2];
        pb->ensure_grad();
        auto& db = *pb->grad;
        for (int64_t bi = 0; bi < batch; ++bi) {
          for (int oc = 0; oc < out_ch; ++oc) {
            const float* gplane = g + bi * o_bstride + oc * o_cstride;
            float acc = 0.0f;
            for (size_t i = 0; i < o_cstride; ++i) acc += gplane[i];
            db[static_cast<size_t>(oc)] += acc;
          }
        }
      }
    };
  }
  return out;
}

Tensor maxpool2d(const Tensor& x, int k) {
  if (x.ndim() != 4) throw ShapeError("maxpool2d: expected 4-d input, got " + shape_str(x.shape()));
  if (k < 1) throw ShapeError("maxpool2d: window must be >= 1");
  const int batch = x.dim(0), ch = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const int out_h = in_h / k, out_w = in_w / k;
  if (out_h == 0 || out_w == 0) {
    throw ShapeError("maxpool2d: window " + std::to_string(k) + " too large for input " +
                     shape_str(x.shape()));
  }
  Tensor out = make_out({batch, ch, out_h, out_w}, {x}, "maxpool2d");
  const float* xv = x.impl()->data->data();
  float* ov = out.impl()->data->data();
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(out.numel()));

  const size_t planes = static_cast<size_t>(batch) * ch;
  const size_t x_pstride = static_cast<size_t>(in_h) * in_w;
  const size_t o_pstride = static_cast<size_t>(out_h) * out_w;
  parallel_for(static_cast<int64_t>(planes), [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const float* xplane = xv + p * x_pstride;
      float* oplane = ov + p * o_pstride;
      int* aplane = argmax->data() + p * o_pstride;
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          float best = -std::numeric_limits<float>::infinity();
          int best_idx = 0;
          for (int dy = 0; dy < k; ++dy) {
            const int iy = oy * k + dy;
            for (int dx = 0; dx < k; ++dx) {
              const int ix = ox * k + dx;
              const int idx = iy * in_w + ix;
              if (xplane[idx] > best) {
                best = xplane[idx];
                best_idx = idx;
              }
            }
          }
          oplane[static_cast<size_t>(oy) * out_w + ox] = best;
          aplane[static_cast<size_t>(oy) * out_w + ox] = best_idx;
        }
      }
    }
  });
  if (out.requires_grad()) {
    out.impl()->backward = [argmax, planes, x_pstride, o_pstride](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float* g = o.grad->data();
      float* dx = grad_ptr(*p);
      for (size_t pl = 0; pl < planes; ++pl) {
        const float* gplane = g + pl * o_pstride;
        const int* aplane = argmax->data() + pl * o_pstride;
        float* dxplane = dx + pl * x_pstride;
        for (size_t i = 0; i < o_pstride; ++i) dxplane[aplane[i]] += gplane[i];
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  if (n != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  bool rg = want_grad(x);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = x.impl()->data;  // shared storage, no copy
  impl->requires_grad = rg;
  if (rg) {
    impl->op = "reshape";
    impl->parents.push_back(x.impl());
    impl->backward = [](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      axpy_into(*p->grad, *o.grad);
    };
  }
  return Tensor(impl);
}

Tensor concat_axis1(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_axis1: no inputs");
  const int batch = parts[0].dim(0);
  const int depth = parts[0].dim(2);
  int total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 3 || p.dim(0) != batch || p.dim(2) != depth) {
      throw ShapeError("concat_axis1: incompatible part shape " + shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  Tensor out = make_out({batch, total, depth}, parts, "concat_axis1");
  auto& ov = *out.impl()->data;
  const size_t row = static_cast<size_t>(depth);
  size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = *p.impl()->data;
    const size_t rows_p = static_cast<size_t>(p.dim(1));
    for (int bi = 0; bi < batch; ++bi) {
      std::memcpy(ov.data() + (static_cast<size_t>(bi) * total + offset) * row,
                  pv.data() + static_cast<size_t>(bi) * rows_p * row,
                  rows_p * row * sizeof(float));
    }
    offset += rows_p;
  }
  if (out.requires_grad()) {
    const int total_rows = total;
    out.impl()->backward = [total_rows, batch, row](TensorImpl& o) {
      const float* g = o.grad->data();
      size_t off = 0;
      for (auto& p : o.parents) {
        const size_t rows_p = static_cast<size_t>(p->shape[1]);
        if (p->requires_grad) {
          p->ensure_grad();
          float* dst = p->grad->data();
          for (int bi = 0; bi < batch; ++bi) {
            const float* src = g + (static_cast<size_t>(bi) * total_rows + off) * row;
            float* drow = dst + static_cast<size_t>(bi) * rows_p * row;
            for (size_t i = 0; i < rows_p * row; ++i) drow[i] += src[i];
          }
        }
        off += rows_p;
      }
    };
  }
  return out;
}

Tensor slice_axis1(const Tensor& x, int start, int len) {
  if (x.ndim() != 3 || start < 0 || len <= 0 || start + len > x.dim(1)) {
    throw ShapeError("slice_axis1: invalid slice [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") of " + shape_str(x.shape()));
  }
  const int batch = x.dim(0), rows = x.dim(1), depth = x.dim(2);
  Tensor out = make_out({batch, len, depth}, {x}, "slice_axis1");
  const auto& xv = *x.impl()->data;
  auto& ov = *out.impl()->data;
  const size_t row = static_cast<size_t>(depth);
  for (int bi = 0; bi < batch; ++bi) {
    std::memcpy(ov.data() + static_cast<size_t>(bi) * len * row,
                xv.data() + (static_cast<size_t>(bi) * rows + start) * row,
                static_cast<size_t>(len) * row * sizeof(float));
  }
  if (out.requires_grad()) {
    out.impl()->backward = [batch, rows, len, start, row](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float* g = o.grad->data();
      float* dst = p->grad->data();
      for (int bi = 0; bi < batch; ++bi) {
        float* drow = dst + (static_cast<size_t>(bi) * rows + start) * row;
        const float* src = g + static_cast<size_t>(bi) * len * row;
        for (size_t i = 0; i < static_cast<size_t>(len) * row; ++i) drow[i] += src[i];
      }
    };
  }
  return out;
}

Tensor slice_lastdim(const Tensor& x, int offset, int len) {
  if (x.ndim() < 1) throw ShapeError("slice_lastdim: scalar input");
  const int d = x.shape().back();
  if (offset < 0 || len <= 0 || offset + len > d) {
    throw ShapeError("slice_lastdim: invalid slice [" + std::to_string(offset) + "," +
                     std::to_string(offset + len) + ") of " + shape_str(x.shape()));
  }
  std::vector<int> oshape = x.shape();
  oshape.back() = len;
  Tensor out = make_out(oshape, {x}, "slice_lastdim");
  const int64_t rows = x.numel() / d;
  const auto& xv = *x.impl()->data;
  auto& ov = *out.impl()->data;
  for (int64_t r = 0; r < rows; ++r) {
    std::memcpy(ov.data() + r * len, xv.data() + r * d + offset,
                static_cast<size_t>(len) * sizeof(float));
  }
  if (out.requires_grad()) {
    out.impl()->backward = [rows, d, offset, len](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float* g = o.grad->data();
      float* dst = p->grad->data();
      for (int64_t r = 0; r < rows; ++r) {
        float* drow = dst + r * d + offset;
        const float* srow = g + r * len;
        for (int i = 0; i < len; ++i) drow[i] += srow[i];
      }
    };
  }
  return out;
}

namespace {

void permute_0213_raw(const float* src, float* dst, int d0, int d1, int d2, int d3,
                      bool accumulate) {
  // dst[a,c,b,d] (+)= src[a,b,c,d]
  for (int a = 0; a < d0; ++a) {
    for (int b2 = 0; b2 < d1; ++b2) {
      for (int c = 0; c < d2; ++c) {
        const float* s = src + (((static_cast<size_t>(a) * d1 + b2) * d2) + c) * d3;
        float* d = dst + (((static_cast<size_t>(a) * d2 + c) * d1) + b2) * d3;
        if (accumulate) {
          for (int i = 0; i < d3; ++i) d[i] += s[i];
        } else {
          std::memcpy(d, s, static_cast<size_t>(d3) * sizeof(float));
        }
      }
    }
  }
}

}  // namespace

Tensor permute_0213(const Tensor& x) {
  if (x.ndim() != 4) throw ShapeError("permute_0213: expected 4-d input, got " + shape_str(x.shape()));
  const int d0 = x.dim(0), d1 = x.dim(1), d2 = x.dim(2), d3 = x.dim(3);
  Tensor out = make_out({d0, d2, d1, d3}, {x}, "permute_0213");
  permute_0213_raw(x.impl()->data->data(), out.impl()->data->data(), d0, d1, d2, d3, false);
  if (out.requires_grad()) {
    out.impl()->backward = [d0, d1, d2, d3](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      // inverse is the same permutation with the middle dims swapped
      permute_0213_raw(o.grad->data(), p->grad->data(), d0, d2, d1, d3, true);
    };
  }
  return out;
}

Tensor broadcast0(const Tensor& p, int n) {
  if (n <= 0) throw ShapeError("broadcast0: count must be positive");
  std::vector<int> oshape;
  oshape.push_back(n);
  for (int d : p.shape()) oshape.push_back(d);
  Tensor out = make_out(oshape, {p}, "broadcast0");
  const auto& pv = *p.impl()->data;
  auto& ov = *out.impl()->data;
  const size_t stride = pv.size();
  for (int i = 0; i < n; ++i) std::memcpy(ov.data() + i * stride, pv.data(), stride * sizeof(float));
  if (out.requires_grad()) {
    out.impl()->backward = [n, stride](TensorImpl& o) {
      auto& p2 = o.parents[0];
      p2->ensure_grad();
      const float* g = o.grad->data();
      float* dst = p2->grad->data();
      for (int i = 0; i < n; ++i) {
        const float* row = g + static_cast<size_t>(i) * stride;
        for (size_t j = 0; j < stride; ++j) dst[j] += row[j];
      }
    };
  }
  return out;
}

Tensor add_bcast0(const Tensor& x, const Tensor& p) {
  if (x.ndim() < 2 || x.numel() % p.numel() != 0 ||
      x.numel() / p.numel() != x.dim(0)) {
    throw ShapeError("add_bcast0: cannot broadcast " + shape_str(p.shape()) + " over " +
                     shape_str(x.shape()));
  }
  Tensor out = make_out(x.shape(), {x, p}, "add_bcast0");
  const auto& xv = *x.impl()->data;
  const auto& pv = *p.impl()->data;
  auto& ov = *out.impl()->data;
  const size_t stride = pv.size();
  const int n = x.dim(0);
  for (int i = 0; i < n; ++i) {
    const float* xrow = xv.data() + static_cast<size_t>(i) * stride;
    float* orow = ov.data() + static_cast<size_t>(i) * stride;
    for (size_t j = 0; j < stride; ++j) orow[j] = xrow[j] + pv[j];
  }
  if (out.requires_grad()) {
    out.impl()->backward = [n, stride](TensorImpl& o) {
      auto& px = o.parents[0];
      auto& pp = o.parents[1];
      const float* g = o.grad->data();
      if (px->requires_grad) {
        px->ensure_grad();
        axpy_into(*px->grad, *o.grad);
      }
      if (pp->requires_grad) {
        pp->ensure_grad();
        float* dst = pp->grad->data();
        for (int i = 0; i < n; ++i) {
          const float* row = g + static_cast<size_t>(i) * stride;
          for (size_t j = 0; j < stride; ++j) dst[j] += row[j];
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
  if (x.ndim() < 1) throw ShapeError("softmax_rows: scalar input");
  const int cols = x.shape().back();
  const int64_t rows = x.numel() / cols;
  Tensor out = make_out(x.shape(), {x}, "softmax");
  const float* xv = x.impl()->data->data();
  float* ov = out.impl()->data->data();
  parallel_for(rows, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const float* xrow = xv + r * cols;
      float* orow = ov + r * cols;
      float mx = xrow[0];
      for (int c = 1; c < cols; ++c) mx = std::max(mx, xrow[c]);
      double denom = 0.0;
      for (int c = 0; c < cols; ++c) {
        const float e = std::exp(xrow[c] - mx);
        orow[c] = e;
        denom += e;
      }
      const float inv = static_cast<float>(1.0 / denom);
      for (int c = 0; c < cols; ++c) orow[c] *= inv;
    }
  });
  if (out.requires_grad()) {
    out.impl()->backward = [rows, cols](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float* g = o.grad->data();
      const float* y = o.data->data();
      float* dx = p->grad->data();
      parallel_for(rows, [&](int64_t lo, int64_t hi) {
        for (int64_t r = lo; r < hi; ++r) {
          const float* grow = g + r * cols;
          const float* yrow = y + r * cols;
          float* dxrow = dx + r * cols;
          double dot = 0.0;
          for (int c = 0; c < cols; ++c) dot += static_cast<double>(grow[c]) * yrow[c];
          const float dotf = static_cast<float>(dot);
          for (int c = 0; c < cols; ++c) dxrow[c] += yrow[c] * (grow[c] - dotf);
        }
      });
    };
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const int cols = x.shape().back();
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw ShapeError("layer_norm: affine params must have length " + std::to_string(cols));
  }
  const int64_t rows = x.numel() / cols;
  Tensor out = make_out(x.shape(), {x, gamma, beta}, "layer_norm");
  const float* xv = x.impl()->data->data();
  const float* gv = gamma.impl()->data->data();
  const float* bv = beta.impl()->data->data();
  float* ov = out.impl()->data->data();
  auto inv_std = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  auto xhat = std::make_shared<std::vector<float>>(static_cast<size_t>(x.numel()));
  parallel_for(rows, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const float* xrow = xv + r * cols;
      float* orow = ov + r * cols;
      float* hrow = xhat->data() + r * cols;
      double mean = 0.0;
      for (int c = 0; c < cols; ++c) mean += xrow[c];
      mean /= cols;
      double var = 0.0;
      for (int c = 0; c < cols; ++c) {
        const double d = xrow[c] - mean;
        var += d * d;
      }
      var /= cols;
      const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
      (*inv_std)[static_cast<size_t>(r)] = istd;
      const float meanf = static_cast<float>(mean);
      for (int c = 0; c < cols; ++c) {
        const float h = (xrow[c] - meanf) * istd;
        hrow[c] = h;
        orow[c] = h * gv[c] + bv[c];
      }
    }
  });
  if (out.requires_grad()) {
    out.impl()->backward = [rows, cols, inv_std, xhat](TensorImpl& o) {
      auto& px = o.parents[0];
      auto& pg = o.parents[1];
      auto& pb = o.parents[2];
      const float* g = o.grad->data();
      if (pg->requires_grad) pg->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      if (px->requires_grad) px->ensure_grad();
      const float* gammav = pg->data->data();
      for (int64_t r = 0; r < rows; ++r) {
        const float* grow = g + r * cols;
        const float* hrow = xhat->data() + r * cols;
        if (pg->requires_grad) {
          float* dg = pg->grad->data();
          for (int c = 0; c < cols; ++c) dg[c] += grow[c] * hrow[c];
        }
        if (pb->requires_grad) {
          float* db = pb->grad->data();
          for (int c = 0; c < cols; ++c) db[c] += grow[c];
        }
        if (px->requires_grad) {
          float* dx = px->grad->data() + r * cols;
          const float istd = (*inv_std)[static_cast<size_t>(r)];
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (int c = 0; c < cols; ++c) {
            const double dh = static_cast<double>(grow[c]) * gammav[c];
            sum_dh += dh;
            sum_dh_h += dh * hrow[c];
          }
          const float m1 = static_cast<float>(sum_dh / cols);
          const float m2 = static_cast<float>(sum_dh_h / cols);
          for (int c = 0; c < cols; ++c) {
            const float dh = grow[c] * gammav[c];
            dx[c] += istd * (dh - m1 - hrow[c] * m2);
          }
        }
      }
    };
  }
  return out;
}

Tensor normalize_rows(const Tensor& x, float eps) {
  const int cols = x.shape().back();
  const int64_t rows = x.numel() / cols;
  Tensor out = make_out(x.shape(), {x}, "normalize_rows");
  const float* xv = x.impl()->data->data();
  float* ov = out.impl()->data->data();
  auto norms = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const float* xrow = xv + r * cols;
    double sq = 0.0;
    for (int c = 0; c < cols; ++c) sq += static_cast<double>(xrow[c]) * xrow[c];
    const float norm = std::max(static_cast<float>(std::sqrt(sq)), eps);
    (*norms)[static_cast<size_t>(r)] = norm;
    float* orow = ov + r * cols;
    const float inv = 1.0f / norm;
    for (int c = 0; c < cols; ++c) orow[c] = xrow[c] * inv;
  }
  if (out.requires_grad()) {
    out.impl()->backward = [rows, cols, norms](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float* g = o.grad->data();
      const float* y = o.data->data();
      float* dx = p->grad->data();
      for (int64_t r = 0; r < rows; ++r) {
        const float* grow = g + r * cols;
        const float* yrow = y + r * cols;
        float* dxrow = dx + r * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += static_cast<double>(grow[c]) * yrow[c];
        const float dotf = static_cast<float>(dot);
        const float inv = 1.0f / (*norms)[static_cast<size_t>(r)];
        for (int c = 0; c < cols; ++c) dxrow[c] += inv * (grow[c] - yrow[c] * dotf);
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

Tensor dropout(const Tensor& x, float p, RngStream& rng, bool train) {
  if (p < 0.0f || p >= 1.0f) throw ConfigError("dropout: probability must be in [0,1)");
  if (!train || p == 0.0f) return x;
  Tensor out = make_out(x.shape(), {x}, "dropout");
  const float keep = 1.0f - p;
  const float inv_keep = 1.0f / keep;
  auto mask = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(x.numel()));
  const auto& xv = *x.impl()->data;
  auto& ov = *out.impl()->data;
  for (size_t i = 0; i < ov.size(); ++i) {
    const bool keep_it = rng.next_double() >= p;
    (*mask)[i] = keep_it;
    ov[i] = keep_it ? xv[i] * inv_keep : 0.0f;
  }
  if (out.requires_grad()) {
    out.impl()->backward = [mask, inv_keep](TensorImpl& o) {
      auto& par = o.parents[0];
      par->ensure_grad();
      const auto& g = *o.grad;
      auto& dst = *par->grad;
      for (size_t i = 0; i < dst.size(); ++i) {
        if ((*mask)[i]) dst[i] += g[i] * inv_keep;
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (float v : *x.impl()->data) acc += v;
  Tensor out = make_out({1}, {x}, "sum_all");
  (*out.impl()->data)[0] = static_cast<float>(acc);
  if (out.requires_grad()) {
    out.impl()->backward = [](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float g = (*o.grad)[0];
      for (auto& v : *p->grad) v += g;
    };
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  const int64_t n = x.numel();
  double acc = 0.0;
  for (float v : *x.impl()->data) acc += v;
  Tensor out = make_out({1}, {x}, "mean_all");
  (*out.impl()->data)[0] = static_cast<float>(acc / static_cast<double>(n));
  if (out.requires_grad()) {
    out.impl()->backward = [n](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float g = (*o.grad)[0] / static_cast<float>(n);
      for (auto& v : *p->grad) v += g;
    };
  }
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse_loss");
  const int64_t n = pred.numel();
  const auto& pv = *pred.impl()->data;
  const auto& tv = *target.impl()->data;
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pv[static_cast<size_t>(i)]) - tv[static_cast<size_t>(i)];
    acc += d * d;
  }
  Tensor out = make_out({1}, {pred, target}, "mse_loss");
  (*out.impl()->data)[0] = static_cast<float>(acc / static_cast<double>(n));
  if (out.requires_grad()) {
    out.impl()->backward = [n](TensorImpl& o) {
      auto& pp = o.parents[0];
      auto& pt = o.parents[1];
      const float g = (*o.grad)[0] * 2.0f / static_cast<float>(n);
      const auto& pv2 = *pp->data;
      const auto& tv2 = *pt->data;
      if (pp->requires_grad) {
        pp->ensure_grad();
        auto& dst = *pp->grad;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g * (pv2[i] - tv2[i]);
      }
      if (pt->requires_grad) {
        pt->ensure_grad();
        auto& dst = *pt->grad;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] -= g * (pv2[i] - tv2[i]);
      }
    };
  }
  return out;
}

Tensor weighted_mse_loss(const Tensor& pred, const Tensor& target, const Tensor& weights) {
  check_same_shape(pred, target, "weighted_mse_loss");
  const int64_t n = pred.numel();
  const int64_t wn = weights.numel();
  if (n % wn != 0) {
    throw ShapeError("weighted_mse_loss: weight length " + std::to_string(wn) +
                     " does not tile " + std::to_string(n) + " elements");
  }
  const auto& pv = *pred.impl()->data;
  const auto& tv = *target.impl()->data;
  const auto& wv = *weights.impl()->data;
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pv[static_cast<size_t>(i)]) - tv[static_cast<size_t>(i)];
    acc += wv[static_cast<size_t>(i % wn)] * d * d;
  }
  Tensor out = make_out({1}, {pred, target}, "weighted_mse_loss");
  (*out.impl()->data)[0] = static_cast<float>(acc / static_cast<double>(n));
  if (out.requires_grad()) {
    auto wcopy = weights.impl()->data;  // weights are constants here
    out.impl()->backward = [n, wn, wcopy](TensorImpl& o) {
      auto& pp = o.parents[0];
      auto& pt = o.parents[1];
      const float g = (*o.grad)[0] * 2.0f / static_cast<float>(n);
      const auto& pv2 = *pp->data;
      const auto& tv2 = *pt->data;
      const auto& wv2 = *wcopy;
      if (pp->requires_grad) {
        pp->ensure_grad();
        auto& dst = *pp->grad;
        for (size_t i = 0; i < dst.size(); ++i) {
          dst[i] += g * wv2[i % static_cast<size_t>(wn)] * (pv2[i] - tv2[i]);
        }
      }
      if (pt->requires_grad) {
        pt->ensure_grad();
        auto& dst = *pt->grad;
        for (size_t i = 0; i < dst.size(); ++i) {
          dst[i] -= g * wv2[i % static_cast<size_t>(wn)] * (pv2[i] - tv2[i]);
        }
      }
    };
  }
  return out;
}

Tensor bce_logits(const Tensor& logits, float target) {
  const int64_t n = logits.numel();
  const auto& xv = *logits.impl()->data;
  // Stable form: max(x,0) - x*t + log(1 + exp(-|x|))
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double x = xv[static_cast<size_t>(i)];
    acc += std::max(x, 0.0) - x * target + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor out = make_out({1}, {logits}, "bce_logits");
  (*out.impl()->data)[0] = static_cast<float>(acc / static_cast<double>(n));
  if (out.requires_grad()) {
    out.impl()->backward = [n, target](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float g = (*o.grad)[0] / static_cast<float>(n);
      const auto& xv2 = *p->data;
      auto& dst = *p->grad;
      for (size_t i = 0; i < dst.size(); ++i) {
        const float s = 1.0f / (1.0f + std::exp(-xv2[i]));
        dst[i] += g * (s - target);
      }
    };
  }
  return out;
}

Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) {
    throw ShapeError("cross_entropy: expected 2-d logits, got " + shape_str(logits.shape()));
  }
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  }
  for (int i = 0; i < batch; ++i) {
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= classes) {
      throw InputError("cross_entropy: label " + std::to_string(labels[static_cast<size_t>(i)]) +
                       " out of range [0," + std::to_string(classes) + ") at row " +
                       std::to_string(i));
    }
  }
  Tensor out = make_out({1}, {logits}, "cross_entropy");
  const float* lv = logits.impl()->data->data();
  auto probs = std::make_shared<std::vector<float>>(static_cast<size_t>(logits.numel()));
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    const float* row = lv + static_cast<size_t>(i) * classes;
    float* prow = probs->data() + static_cast<size_t>(i) * classes;
    float mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double e = std::exp(static_cast<double>(row[c]) - mx);
      prow[c] = static_cast<float>(e);
      denom += e;
    }
    const double inv = 1.0 / denom;
    for (int c = 0; c < classes; ++c) prow[c] = static_cast<float>(prow[c] * inv);
    total += -(static_cast<double>(row[labels[static_cast<size_t>(i)]]) - mx - std::log(denom));
  }
  (*out.impl()->data)[0] = static_cast<float>(total / batch);
  if (out.requires_grad()) {
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    out.impl()->backward = [probs, labels_copy, batch, classes](TensorImpl& o) {
      auto& p = o.parents[0];
      p->ensure_grad();
      const float g = (*o.grad)[0] / static_cast<float>(batch);
      float* dst = p->grad->data();
      for (int i = 0; i < batch; ++i) {
        const float* prow = probs->data() + static_cast<size_t>(i) * classes;
        float* drow = dst + static_cast<size_t>(i) * classes;
        const int y = (*labels_copy)[static_cast<size_t>(i)];
        for (int c = 0; c < classes; ++c) {
          drow[c] += g * (prow[c] - (c == y ? 1.0f : 0.0f));
        }
      }
    };
  }
  return out;
}

}  // namespace weightgen
