#pragma once

#include <string>
#include <vector>

#include "weightgen/ops.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

/// Named parameter registry shared by the small trainable modules.
struct ParamList {
  std::vector<Tensor> tensors;
  std::vector<std::string> names;
  void add(const std::string& name, const Tensor& t) {
    names.push_back(name);
    tensors.push_back(t);
  }
};

struct LinearLayer {
  Tensor w;  // [out, in]
  Tensor b;  // [out]

  static LinearLayer xavier(int in, int out, RngStream& rng);
  static LinearLayer kaiming(int in, int out, RngStream& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNormLayer {
  Tensor gamma, beta;

  static LayerNormLayer make(int dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Plain MLP with a fixed hidden activation; used for projection heads,
/// neighbor maps and GAN nets.
struct Mlp {
  std::vector<LinearLayer> layers;
  enum class Act { Relu, Tanh } act = Act::Relu;
  bool act_on_output = false;

  static Mlp make(const std::vector<int>& dims, Act act, RngStream& rng,
                  bool act_on_output = false);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace weightgen
