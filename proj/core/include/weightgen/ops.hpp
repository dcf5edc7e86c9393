#pragma once

#include <vector>

#include "weightgen/tensor.hpp"

namespace weightgen {

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float c);
Tensor reciprocal(const Tensor& x);                  // 1/x elementwise
Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s);  // s is a [1] tensor
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);                    // [M,K]x[K,N]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);   // x[M,K], w[N,K], b[N] -> [M,N]
/// Batched matmul over the leading axis; optional transposes apply to the
/// trailing two axes of each operand.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

// Convolution stack
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
Tensor maxpool2d(const Tensor& x, int k);

// Shape manipulation
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_axis1(const std::vector<Tensor>& parts);   // [B,n_i,D] along axis 1
Tensor slice_axis1(const Tensor& x, int start, int len); // [B,N,D] -> [B,len,D]
Tensor slice_lastdim(const Tensor& x, int offset, int len);
Tensor permute_0213(const Tensor& x);                    // [A,B,C,D] -> [A,C,B,D]
Tensor broadcast0(const Tensor& p, int n);               // [rest...] -> [n, rest...]
Tensor add_bcast0(const Tensor& x, const Tensor& p);     // x[B,rest...] + p[rest...]

// Normalization / attention pieces
Tensor softmax_rows(const Tensor& x);  // softmax over the last axis
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
Tensor normalize_rows(const Tensor& x, float eps = 1e-12f);  // L2 over the last axis

// Random
Tensor dropout(const Tensor& x, float p, RngStream& rng, bool train);

// Reductions and losses (64-bit accumulation, scalar outputs)
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
/// Per-element constant weights; mean of w*(pred-target)^2.
Tensor weighted_mse_loss(const Tensor& pred, const Tensor& target, const Tensor& weights);
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels);
/// Mean binary cross-entropy from logits against constant 0/1 targets.
Tensor bce_logits(const Tensor& logits, float target);

}  // namespace weightgen
