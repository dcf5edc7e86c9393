#pragma once

// Builds one gradcheck::Case per differentiable op (plus an end-to-end MLP)
// for a given seed. The unit suite and the acceptance suite both iterate
// seeds over this list.

#include <algorithm>
#include <vector>

#include "gradcheck.hpp"
#include "ref_ops.hpp"
#include "weightgen/ops.hpp"
#include "weightgen/rng.hpp"

namespace gradcheck {

namespace wg = weightgen;

inline Tensor rand_t(std::vector<int> shape, wg::RngStream& rng, float lo = -1.0f,
                     float hi = 1.0f) {
  return Tensor::rand_uniform(std::move(shape), lo, hi, rng, true);
}

/// Values bounded away from zero (for kinked ops like relu).
inline Tensor rand_margin(std::vector<int> shape, wg::RngStream& rng, float margin = 0.1f) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) {
    const float mag = rng.uniform(margin, 1.0f);
    v = rng.next_double() < 0.5 ? -mag : mag;
  }
  return t;
}

/// Pool input with distinct values inside each kxk window so finite
/// differences never cross an argmax switch.
inline Tensor rand_pool_input(int planes, int h, int w, int k, wg::RngStream& rng) {
  Tensor t = Tensor::zeros({1, planes, h, w}, true);
  auto v = t.values();
  for (int p = 0; p < planes; ++p) {
    for (int oy = 0; oy < h / k; ++oy) {
      for (int ox = 0; ox < w / k; ++ox) {
        std::vector<int> rank(static_cast<size_t>(k * k));
        for (int i = 0; i < k * k; ++i) rank[static_cast<size_t>(i)] = i;
        rng.shuffle(rank);
        const float base = rng.uniform(-1.0f, 1.0f);
        int idx = 0;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            v[static_cast<size_t>(((p * h) + oy * k + dy) * w + ox * k + dx)] =
                base + 0.05f * static_cast<float>(rank[static_cast<size_t>(idx++)]);
          }
        }
      }
    }
  }
  return t;
}

inline std::vector<float> rand_weights(size_t n, wg::RngStream& rng) {
  std::vector<float> r(n);
  for (auto& v : r) v = rng.uniform(-1.0f, 1.0f);
  return r;
}

inline std::vector<Case> make_cases(uint64_t seed) {
  wg::RngStream root(seed);
  std::vector<Case> cases;

  {  // matmul
    auto rng = root.fork("matmul");
    Case c;
    c.name = "matmul";
    c.inputs = {rand_t({3, 4}, rng), rand_t({4, 5}, rng)};
    auto r = rand_weights(15, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::matmul(in[0], in[1]), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::matmul(in[0], in[1], 3, 4, 5), r);
    };
    cases.push_back(std::move(c));
  }
  {  // linear
    auto rng = root.fork("linear");
    Case c;
    c.name = "linear";
    c.inputs = {rand_t({4, 3}, rng), rand_t({5, 3}, rng), rand_t({5}, rng)};
    auto r = rand_weights(20, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::linear(in[0], in[1], in[2]), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::linear(in[0], in[1], in[2], 4, 3, 5), r);
    };
    cases.push_back(std::move(c));
  }
  // bmm, all four transpose combinations
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      auto rng = root.fork("bmm" + std::to_string(ta * 2 + tb));
      Case c;
      c.name = "bmm_ta" + std::to_string(ta) + "_tb" + std::to_string(tb);
      const int g = 2, m = 3, k = 4, n = 2;
      std::vector<int> ashape = ta ? std::vector<int>{g, k, m} : std::vector<int>{g, m, k};
      std::vector<int> bshape = tb ? std::vector<int>{g, n, k} : std::vector<int>{g, k, n};
      c.inputs = {rand_t(ashape, rng), rand_t(bshape, rng)};
      auto r = rand_weights(static_cast<size_t>(g * m * n), rng);
      const bool bta = ta, btb = tb;
      c.engine_fn = [r, bta, btb](const std::vector<Tensor>& in) {
        return weighted_sum(wg::bmm(in[0], in[1], bta, btb), r);
      };
      c.ref_fn = [r, bta, btb, g, m, k, n](const std::vector<refops::Vec>& in) {
        refops::Vec out(static_cast<size_t>(g * m * n), 0.0);
        for (int gi = 0; gi < g; ++gi) {
          for (int mi = 0; mi < m; ++mi) {
            for (int ni = 0; ni < n; ++ni) {
              double acc = 0.0;
              for (int ki = 0; ki < k; ++ki) {
                const double av = bta ? in[0][(gi * k + ki) * m + mi] : in[0][(gi * m + mi) * k + ki];
                const double bv = btb ? in[1][(gi * n + ni) * k + ki] : in[1][(gi * k + ki) * n + ni];
                acc += av * bv;
              }
              out[static_cast<size_t>((gi * m + mi) * n + ni)] = acc;
            }
          }
        }
        return ref_weighted_sum(out, r);
      };
      cases.push_back(std::move(c));
    }
  }
  {  // conv2d stride 1, no padding
    auto rng = root.fork("conv_s1");
    Case c;
    c.name = "conv2d_s1p0";
    c.inputs = {rand_t({2, 2, 5, 5}, rng), rand_t({3, 2, 3, 3}, rng), rand_t({3}, rng)};
    auto r = rand_weights(2 * 3 * 3 * 3, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::conv2d(in[0], in[1], in[2], 1, 0), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::conv2d(in[0], in[1], in[2], 2, 2, 5, 5, 3, 3, 3, 1, 0), r);
    };
    cases.push_back(std::move(c));
  }
  {  // conv2d stride 2, padding 1
    auto rng = root.fork("conv_s2");
    Case c;
    c.name = "conv2d_s2p1";
    c.inputs = {rand_t({1, 2, 6, 6}, rng), rand_t({2, 2, 3, 3}, rng), rand_t({2}, rng)};
    auto r = rand_weights(1 * 2 * 3 * 3, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::conv2d(in[0], in[1], in[2], 2, 1), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::conv2d(in[0], in[1], in[2], 1, 2, 6, 6, 2, 3, 3, 2, 1), r);
    };
    cases.push_back(std::move(c));
  }
  {  // maxpool2d
    auto rng = root.fork("maxpool");
    Case c;
    c.name = "maxpool2d";
    c.inputs = {rand_pool_input(2, 4, 4, 2, rng)};
    auto r = rand_weights(2 * 2 * 2, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::maxpool2d(in[0], 2), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::maxpool2d(in[0], 2, 4, 4, 2), r);
    };
    cases.push_back(std::move(c));
  }
  {  // elementwise add/sub/mul/scale chained
    auto rng = root.fork("elementwise");
    Case c;
    c.name = "add_sub_mul_scale";
    c.inputs = {rand_t({2, 3}, rng), rand_t({2, 3}, rng), rand_t({2, 3}, rng)};
    auto r = rand_weights(6, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::scale(wg::mul(wg::add(in[0], in[1]), wg::sub(in[0], in[2])), 0.7f), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      refops::Vec y(in[0].size());
      for (size_t i = 0; i < y.size(); ++i) {
        y[i] = 0.7 * (in[0][i] + in[1][i]) * (in[0][i] - in[2][i]);
      }
      return ref_weighted_sum(y, r);
    };
    cases.push_back(std::move(c));
  }
  // smooth activations
  struct ActSpec {
    const char* name;
    Tensor (*op)(const Tensor&);
    double (*ref)(double);
    bool margin;
  };
  const ActSpec acts[] = {
      {"tanh", &wg::tanh, &refops::tanh_v, false},
      {"gelu", &wg::gelu, &refops::gelu_v, false},
      {"relu", &wg::relu, &refops::relu_v, true},
      {"sigmoid", &wg::sigmoid, &refops::sigmoid_v, false},
  };
  for (const auto& a : acts) {
    auto rng = root.fork(a.name);
    Case c;
    c.name = a.name;
    c.inputs = {a.margin ? rand_margin({3, 4}, rng) : rand_t({3, 4}, rng, -2.0f, 2.0f)};
    auto r = rand_weights(12, rng);
    auto op = a.op;
    auto ref = a.ref;
    c.engine_fn = [r, op](const std::vector<Tensor>& in) { return weighted_sum(op(in[0]), r); };
    c.ref_fn = [r, ref](const std::vector<refops::Vec>& in) {
      refops::Vec y(in[0].size());
      for (size_t i = 0; i < y.size(); ++i) y[i] = ref(in[0][i]);
      return ref_weighted_sum(y, r);
    };
    cases.push_back(std::move(c));
  }
  {  // softmax
    auto rng = root.fork("softmax");
    Case c;
    c.name = "softmax_rows";
    c.inputs = {rand_t({3, 5}, rng, -2.0f, 2.0f)};
    auto r = rand_weights(15, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::softmax_rows(in[0]), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::softmax_rows(in[0], 3, 5), r);
    };
    cases.push_back(std::move(c));
  }
  {  // layer_norm
    auto rng = root.fork("layer_norm");
    Case c;
    c.name = "layer_norm";
    c.inputs = {rand_t({4, 6}, rng), rand_t({6}, rng, 0.5f, 1.5f), rand_t({6}, rng)};
    auto r = rand_weights(24, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::layer_norm(in[0], in[1], in[2]), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::layer_norm(in[0], in[1], in[2], 4, 6), r);
    };
    cases.push_back(std::move(c));
  }
  {  // normalize_rows
    auto rng = root.fork("normalize");
    Case c;
    c.name = "normalize_rows";
    c.inputs = {rand_margin({3, 5}, rng, 0.2f)};
    auto r = rand_weights(15, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::normalize_rows(in[0]), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      return ref_weighted_sum(refops::normalize_rows(in[0], 3, 5), r);
    };
    cases.push_back(std::move(c));
  }
  {  // shape ops chained: reshape -> permute -> slice -> concat -> broadcast add
    auto rng = root.fork("shapes");
    Case c;
    c.name = "shape_ops";
    c.inputs = {rand_t({2, 3, 4}, rng), rand_t({3, 4}, rng)};
    auto r = rand_weights(2 * 4 * 4, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      Tensor x = wg::add_bcast0(in[0], in[1]);              // [2,3,4]
      Tensor x4 = wg::reshape(x, {2, 3, 2, 2});             // [2,3,2,2]
      Tensor p = wg::permute_0213(x4);                      // [2,2,3,2]
      Tensor back = wg::reshape(p, {2, 2, 6});              // [2,2,6]
      Tensor head = wg::slice_lastdim(back, 0, 2);          // [2,2,2]
      Tensor tail = wg::slice_axis1(back, 1, 1);            // [2,1,6]
      Tensor tail3 = wg::reshape(tail, {2, 3, 2});          // [2,3,2]
      Tensor cat = wg::concat_axis1({head, tail3});         // [2,5,2]
      Tensor flat = wg::reshape(cat, {2, 10});
      return weighted_sum(wg::slice_lastdim(flat, 1, 8), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      // mirror the chain in plain index arithmetic
      refops::Vec x(2 * 3 * 4);
      for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 12; ++i) x[b * 12 + i] = in[0][b * 12 + i] + in[1][i];
      // reshape [2,3,2,2] + permute 0213 -> [2,2,3,2]
      refops::Vec p(2 * 2 * 3 * 2);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 3; ++b)
          for (int cdim = 0; cdim < 2; ++cdim)
            for (int d = 0; d < 2; ++d)
              p[((a * 2 + cdim) * 3 + b) * 2 + d] = x[((a * 3 + b) * 2 + cdim) * 2 + d];
      // back: [2,2,6]; head = back[:, :, 0:2] -> [2,2,2]; tail = back[:,1,:] -> [2,3,2]
      refops::Vec head(2 * 2 * 2), tail(2 * 3 * 2);
      for (int a = 0; a < 2; ++a) {
        for (int rrow = 0; rrow < 2; ++rrow)
          for (int d = 0; d < 2; ++d) head[(a * 2 + rrow) * 2 + d] = p[(a * 2 + rrow) * 6 + d];
        for (int i = 0; i < 6; ++i) tail[a * 6 + i] = p[(a * 2 + 1) * 6 + i];
      }
      // cat axis1: head [2,2,2] + tail [2,3,2] -> [2,5,2] -> flat [2,10] -> slice [1,9)
      refops::Vec flat(2 * 10);
      for (int a = 0; a < 2; ++a) {
        for (int i = 0; i < 4; ++i) flat[a * 10 + i] = head[a * 4 + i];
        for (int i = 0; i < 6; ++i) flat[a * 10 + 4 + i] = tail[a * 6 + i];
      }
      refops::Vec sliced(2 * 8);
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 8; ++i) sliced[a * 8 + i] = flat[a * 10 + 1 + i];
      return ref_weighted_sum(sliced, r);
    };
    cases.push_back(std::move(c));
  }
  {  // broadcast over the leading axis
    auto rng = root.fork("broadcast");
    Case c;
    c.name = "broadcast0";
    c.inputs = {rand_t({3, 2}, rng)};
    auto r = rand_weights(4 * 3 * 2, rng);
    c.engine_fn = [r](const std::vector<Tensor>& in) {
      return weighted_sum(wg::broadcast0(in[0], 4), r);
    };
    c.ref_fn = [r](const std::vector<refops::Vec>& in) {
      refops::Vec y(4 * in[0].size());
      for (int i = 0; i < 4; ++i) {
        std::copy(in[0].begin(), in[0].end(), y.begin() + static_cast<long>(i * in[0].size()));
      }
      return ref_weighted_sum(y, r);
    };
    cases.push_back(std::move(c));
  }
  {  // mean reduction
    auto rng = root.fork("mean");
    Case c;
    c.name = "mean_all";
    c.inputs = {rand_t({3, 4}, rng)};
    c.engine_fn = [](const std::vector<Tensor>& in) { return wg::mean_all(wg::mul(in[0], in[0])); };
    c.ref_fn = [](const std::vector<refops::Vec>& in) {
      double acc = 0.0;
      for (double v : in[0]) acc += v * v;
      return acc / static_cast<double>(in[0].size());
    };
    cases.push_back(std::move(c));
  }
  {  // mse
    auto rng = root.fork("mse");
    Case c;
    c.name = "mse_loss";
    c.inputs = {rand_t({2, 5}, rng), rand_t({2, 5}, rng)};
    c.engine_fn = [](const std::vector<Tensor>& in) { return wg::mse_loss(in[0], in[1]); };
    c.ref_fn = [](const std::vector<refops::Vec>& in) { return refops::mse(in[0], in[1]); };
    cases.push_back(std::move(c));
  }
  {  // weighted mse with row broadcast
    auto rng = root.fork("wmse");
    Case c;
    c.name = "weighted_mse_loss";
    c.inputs = {rand_t({3, 4}, rng), rand_t({3, 4}, rng)};
    auto w = rand_weights(4, rng);
    for (auto& v : w) v = std::abs(v) + 0.1f;
    c.engine_fn = [w](const std::vector<Tensor>& in) {
      Tensor wt = Tensor::from({4}, std::vector<float>(w));
      return wg::weighted_mse_loss(in[0], in[1], wt);
    };
    c.ref_fn = [w](const std::vector<refops::Vec>& in) {
      refops::Vec wd(w.begin(), w.end());
      return refops::weighted_mse(in[0], in[1], wd);
    };
    cases.push_back(std::move(c));
  }
  {  // cross entropy
    auto rng = root.fork("xent");
    Case c;
    c.name = "cross_entropy";
    c.inputs = {rand_t({4, 6}, rng, -2.0f, 2.0f)};
    std::vector<int> labels(4);
    for (auto& l : labels) l = static_cast<int>(rng.below(6));
    c.engine_fn = [labels](const std::vector<Tensor>& in) {
      return wg::cross_entropy_logits(in[0], labels);
    };
    c.ref_fn = [labels](const std::vector<refops::Vec>& in) {
      return refops::cross_entropy(in[0], labels, 4, 6);
    };
    cases.push_back(std::move(c));
  }
  {  // three-layer MLP end to end against finite differences
    auto rng = root.fork("mlp");
    Case c;
    c.name = "mlp_3layer";
    c.inputs = {rand_t({2, 4}, rng),  rand_t({5, 4}, rng), rand_t({5}, rng),
                rand_t({4, 5}, rng),  rand_t({4}, rng),    rand_t({3, 4}, rng),
                rand_t({3}, rng)};
    std::vector<int> labels = {0, 2};
    c.engine_fn = [labels](const std::vector<Tensor>& in) {
      Tensor h1 = wg::tanh(wg::linear(in[0], in[1], in[2]));
      Tensor h2 = wg::tanh(wg::linear(h1, in[3], in[4]));
      Tensor logits = wg::linear(h2, in[5], in[6]);
      return wg::cross_entropy_logits(logits, labels);
    };
    c.ref_fn = [labels](const std::vector<refops::Vec>& in) {
      refops::Vec h1 = refops::linear(in[0], in[1], in[2], 2, 4, 5);
      for (auto& v : h1) v = std::tanh(v);
      refops::Vec h2 = refops::linear(h1, in[3], in[4], 2, 5, 4);
      for (auto& v : h2) v = std::tanh(v);
      refops::Vec logits = refops::linear(h2, in[5], in[6], 2, 4, 3);
      return refops::cross_entropy(logits, labels, 2, 3);
    };
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace gradcheck
