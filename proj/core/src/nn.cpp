#include "weightgen/nn.hpp"

#include <cmath>

namespace weightgen {

LinearLayer LinearLayer::xavier(int in, int out, RngStream& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(in + out));
  LinearLayer l;
  l.w = Tensor::rand_uniform({out, in}, -bound, bound, rng, true);
  l.b = Tensor::zeros({out}, true);
  return l;
}

LinearLayer LinearLayer::kaiming(int in, int out, RngStream& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(in));
  LinearLayer l;
  l.w = Tensor::rand_uniform({out, in}, -bound, bound, rng, true);
  l.b = Tensor::zeros({out}, true);
  return l;
}

void LinearLayer::collect(const std::string& prefix, ParamList& out) const {
  out.add(prefix + ".w", w);
  out.add(prefix + ".b", b);
}

LayerNormLayer LayerNormLayer::make(int dim) {
  LayerNormLayer l;
  l.gamma = Tensor::full({dim}, 1.0f, true);
  l.beta = Tensor::zeros({dim}, true);
  return l;
}

void LayerNormLayer::collect(const std::string& prefix, ParamList& out) const {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
}

Mlp Mlp::make(const std::vector<int>& dims, Act act, RngStream& rng, bool act_on_output) {
  Mlp m;
  m.act = act;
  m.act_on_output = act_on_output;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(act == Act::Relu ? LinearLayer::kaiming(dims[i], dims[i + 1], rng)
                                        : LinearLayer::xavier(dims[i], dims[i + 1], rng));
  }
  return m;
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    const bool last = (i + 1 == layers.size());
    if (!last || act_on_output) {
      h = act == Act::Relu ? relu(h) : tanh(h);
    }
  }
  return h;
}

void Mlp::collect(const std::string& prefix, ParamList& out) const {
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".l" + std::to_string(i), out);
  }
}

}  // namespace weightgen
