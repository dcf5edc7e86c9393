#include "weightgen/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "weightgen/errors.hpp"

namespace weightgen {

LayerLayout make_layout(const std::vector<std::pair<LayerKind, std::vector<int>>>& specs) {
  LayerLayout layout;
  int64_t offset = 0;
  for (const auto& [kind, wshape] : specs) {
    LayerSpec spec;
    spec.kind = kind;
    spec.weight_shape = wshape;
    if (kind == LayerKind::Conv) {
      if (wshape.size() != 4) throw LayoutError("conv layer weight must be 4-d");
      spec.neuron_count = wshape[0];
      spec.neuron_raw_dim = wshape[1] * wshape[2] * wshape[3] + 1;
    } else {
      if (wshape.size() != 2) throw LayoutError("fc layer weight must be 2-d");
      spec.neuron_count = wshape[0];
      spec.neuron_raw_dim = wshape[1] + 1;
    }
    spec.bias_len = spec.neuron_count;
    spec.offset = offset;
    spec.extent = spec.weight_count() + spec.bias_len;
    offset += spec.extent;
    layout.token_count += spec.neuron_count;
    layout.layers.push_back(std::move(spec));
  }
  layout.total = offset;
  return layout;
}

bool LayerLayout::compatible(const LayerLayout& other) const {
  if (layers.size() != other.layers.size() || total != other.total) return false;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != other.layers[i].kind ||
        layers[i].weight_shape != other.layers[i].weight_shape) {
      return false;
    }
  }
  return true;
}

WeightVector flatten(const std::vector<std::pair<Tensor, Tensor>>& params,
                     std::shared_ptr<const LayerLayout> layout) {
  if (!layout) throw LayoutError("flatten: null layout");
  if (params.size() != layout->layers.size()) {
    throw LayoutError("flatten: " + std::to_string(params.size()) + " layers for layout with " +
                      std::to_string(layout->layers.size()));
  }
  WeightVector out;
  out.layout = layout;
  out.values.resize(static_cast<size_t>(layout->total));
  for (size_t l = 0; l < params.size(); ++l) {
    const auto& spec = layout->layers[l];
    const auto& [w, b] = params[l];
    if (w.shape() != spec.weight_shape || b.numel() != spec.bias_len) {
      throw LayoutError("flatten: layer " + std::to_string(l) + " shape " + shape_str(w.shape()) +
                        " does not match layout " + shape_str(spec.weight_shape));
    }
    std::memcpy(out.values.data() + spec.offset, w.values().data(),
                static_cast<size_t>(spec.weight_count()) * sizeof(float));
    std::memcpy(out.values.data() + spec.offset + spec.weight_count(), b.values().data(),
                static_cast<size_t>(spec.bias_len) * sizeof(float));
  }
  return out;
}

std::vector<std::pair<Tensor, Tensor>> unflatten(const WeightVector& v) {
  if (!v.layout) throw LayoutError("unflatten: vector has no layout");
  if (v.size() != v.layout->total) {
    throw LayoutError("unflatten: vector length " + std::to_string(v.size()) +
                      " does not match layout total " + std::to_string(v.layout->total));
  }
  std::vector<std::pair<Tensor, Tensor>> out;
  for (const auto& spec : v.layout->layers) {
    std::vector<float> wv(v.values.begin() + spec.offset,
                          v.values.begin() + spec.offset + spec.weight_count());
    std::vector<float> bv(v.values.begin() + spec.offset + spec.weight_count(),
                          v.values.begin() + spec.offset + spec.extent);
    out.emplace_back(Tensor::from(spec.weight_shape, std::move(wv)),
                     Tensor::from({spec.bias_len}, std::move(bv)));
  }
  return out;
}

TokenSequence tokenize(const WeightVector& v) {
  if (!v.layout) throw LayoutError("tokenize: vector has no layout");
  TokenSequence seq;
  seq.layout = v.layout;
  seq.values.reserve(static_cast<size_t>(v.layout->total));
  for (size_t l = 0; l < v.layout->layers.size(); ++l) {
    const auto& spec = v.layout->layers[l];
    const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
    for (int ni = 0; ni < spec.neuron_count; ++ni) {
      seq.token_layer.push_back(static_cast<int>(l));
      seq.token_neuron.push_back(ni);
      seq.token_offset.push_back(static_cast<int64_t>(seq.values.size()));
      const float* w = v.values.data() + spec.offset + ni * per_neuron;
      seq.values.insert(seq.values.end(), w, w + per_neuron);
      seq.values.push_back(v.values[static_cast<size_t>(spec.offset + spec.weight_count() + ni)]);
    }
  }
  seq.token_offset.push_back(static_cast<int64_t>(seq.values.size()));
  return seq;
}

WeightVector detokenize(const TokenSequence& seq) {
  if (!seq.layout) throw LayoutError("detokenize: sequence has no layout");
  WeightVector out;
  out.layout = seq.layout;
  out.values.resize(static_cast<size_t>(seq.layout->total));
  for (int t = 0; t < seq.count(); ++t) {
    const auto& spec = seq.layout->layers[static_cast<size_t>(seq.token_layer[static_cast<size_t>(t)])];
    const int ni = seq.token_neuron[static_cast<size_t>(t)];
    const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
    const float* src = seq.values.data() + seq.token_offset[static_cast<size_t>(t)];
    std::memcpy(out.values.data() + spec.offset + ni * per_neuron, src,
                static_cast<size_t>(per_neuron) * sizeof(float));
    out.values[static_cast<size_t>(spec.offset + spec.weight_count() + ni)] =
        src[per_neuron];
  }
  return out;
}

namespace {

// Reorders the inputs of layer `next` according to the permutation applied
// to the outputs of the previous layer. perm[j] = source neuron index now at
// position j.
void permute_next_layer_inputs(std::vector<float>& values, const LayerSpec& next,
                               const std::vector<int>& perm) {
  const int in_groups = static_cast<int>(perm.size());
  const int64_t wcount = next.weight_count();
  std::vector<float> spare(static_cast<size_t>(wcount));
  std::memcpy(spare.data(), values.data() + next.offset, static_cast<size_t>(wcount) * sizeof(float));
  if (next.kind == LayerKind::Conv) {
    const int out_ch = next.weight_shape[0];
    const int in_ch = next.weight_shape[1];
    const int k2 = next.weight_shape[2] * next.weight_shape[3];
    if (in_ch != in_groups) throw LayoutError("permute: channel count mismatch at conv boundary");
    for (int o = 0; o < out_ch; ++o) {
      for (int j = 0; j < in_ch; ++j) {
        const float* src = spare.data() + (static_cast<size_t>(o) * in_ch + perm[static_cast<size_t>(j)]) * k2;
        float* dst = values.data() + next.offset + (static_cast<size_t>(o) * in_ch + j) * k2;
        std::memcpy(dst, src, static_cast<size_t>(k2) * sizeof(float));
      }
    }
  } else {
    const int out_dim = next.weight_shape[0];
    const int in_dim = next.weight_shape[1];
    if (in_dim % in_groups != 0) {
      throw LayoutError("permute: fc input " + std::to_string(in_dim) +
                        " not divisible into " + std::to_string(in_groups) + " blocks");
    }
    // Across a conv->fc boundary each previous channel owns a contiguous
    // block of spatial columns; fc->fc is the block-size-1 case.
    const int block = in_dim / in_groups;
    for (int o = 0; o < out_dim; ++o) {
      for (int j = 0; j < in_groups; ++j) {
        const float* src =
            spare.data() + static_cast<size_t>(o) * in_dim + perm[static_cast<size_t>(j)] * block;
        float* dst = values.data() + next.offset + static_cast<size_t>(o) * in_dim +
                     static_cast<size_t>(j) * block;
        std::memcpy(dst, src, static_cast<size_t>(block) * sizeof(float));
      }
    }
  }
}

}  // namespace

WeightVector permute_augment(const WeightVector& v, RngStream& rng) {
  if (!v.layout) throw LayoutError("permute_augment: vector has no layout");
  std::vector<std::vector<int>> perms;
  for (size_t l = 0; l + 1 < v.layout->layers.size(); ++l) {
    perms.push_back(rng.permutation(v.layout->layers[l].neuron_count));
  }
  return permute_augment(v, perms);
}

WeightVector permute_augment(const WeightVector& v, const std::vector<std::vector<int>>& perms) {
  if (!v.layout) throw LayoutError("permute_augment: vector has no layout");
  const auto& layers = v.layout->layers;
  if (perms.size() != layers.size() - 1) {
    throw LayoutError("permute_augment: need one permutation per layer except the last");
  }
  WeightVector out = v;
  for (size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& spec = layers[l];
    const std::vector<int>& perm = perms[l];
    if (static_cast<int>(perm.size()) != spec.neuron_count) {
      throw LayoutError("permute_augment: permutation size mismatch at layer " + std::to_string(l));
    }
    // Reorder this layer's neurons (kernel rows and biases).
    const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
    std::vector<float> spare(out.values.begin() + spec.offset,
                             out.values.begin() + spec.offset + spec.extent);
    for (int j = 0; j < spec.neuron_count; ++j) {
      const int src = perm[static_cast<size_t>(j)];
      std::memcpy(out.values.data() + spec.offset + j * per_neuron,
                  spare.data() + src * per_neuron, static_cast<size_t>(per_neuron) * sizeof(float));
      out.values[static_cast<size_t>(spec.offset + spec.weight_count() + j)] =
          spare[static_cast<size_t>(spec.weight_count() + src)];
    }
    permute_next_layer_inputs(out.values, layers[l + 1], perm);
  }
  return out;
}

WeightVector erase_augment(const WeightVector& v, float fraction, RngStream& rng) {
  if (!v.layout) throw LayoutError("erase_augment: vector has no layout");
  if (fraction < 0.0f || fraction > 0.5f) {
    throw InputError("erase_augment: fraction must be in [0, 0.5], got " + std::to_string(fraction));
  }
  WeightVector out = v;
  const int tokens = v.layout->token_count;
  const int k = static_cast<int>(std::ceil(static_cast<double>(fraction) * tokens));
  if (k == 0) return out;
  std::vector<int> ids(static_cast<size_t>(tokens));
  for (int i = 0; i < tokens; ++i) ids[static_cast<size_t>(i)] = i;
  rng.shuffle(ids);
  ids.resize(static_cast<size_t>(k));
  // Map global token id -> (layer, neuron) and zero its weights and bias.
  for (int id : ids) {
    int layer = 0;
    int neuron = id;
    while (neuron >= v.layout->layers[static_cast<size_t>(layer)].neuron_count) {
      neuron -= v.layout->layers[static_cast<size_t>(layer)].neuron_count;
      ++layer;
    }
    const auto& spec = v.layout->layers[static_cast<size_t>(layer)];
    const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
    std::fill_n(out.values.begin() + spec.offset + neuron * per_neuron, per_neuron, 0.0f);
    out.values[static_cast<size_t>(spec.offset + spec.weight_count() + neuron)] = 0.0f;
  }
  return out;
}

LayerStats layer_stats(const std::vector<WeightVector>& train_vectors) {
  if (train_vectors.size() < 2) {
    throw InputError("layer_stats: need at least 2 vectors, got " +
                     std::to_string(train_vectors.size()));
  }
  const auto layout = train_vectors.front().layout;
  for (const auto& v : train_vectors) {
    if (!v.layout || !v.layout->compatible(*layout)) {
      throw LayoutError("layer_stats: vectors have incompatible layouts");
    }
  }
  LayerStats stats;
  for (const auto& spec : layout->layers) {
    double sum = 0.0, sumsq = 0.0;
    const int64_t per_vec = spec.extent;
    const int64_t count = per_vec * static_cast<int64_t>(train_vectors.size());
    for (const auto& v : train_vectors) {
      const float* p = v.values.data() + spec.offset;
      for (int64_t i = 0; i < per_vec; ++i) {
        sum += p[i];
        sumsq += static_cast<double>(p[i]) * p[i];
      }
    }
    const double mu = sum / static_cast<double>(count);
    const double var = std::max(0.0, sumsq / static_cast<double>(count) - mu * mu);
    double sigma = std::sqrt(var);
    if (sigma < 1e-6) sigma = 1e-6;  // degenerate layer
    stats.mu.push_back(static_cast<float>(mu));
    stats.sigma.push_back(static_cast<float>(sigma));
  }
  return stats;
}

std::vector<double> per_layer_mse(const WeightVector& a, const WeightVector& b) {
  if (!a.layout || !b.layout || !a.layout->compatible(*b.layout)) {
    throw LayoutError("per_layer_mse: incompatible layouts");
  }
  std::vector<double> out;
  for (const auto& spec : a.layout->layers) {
    double acc = 0.0;
    for (int64_t i = spec.offset; i < spec.offset + spec.extent; ++i) {
      const double d = static_cast<double>(a.values[static_cast<size_t>(i)]) -
                       b.values[static_cast<size_t>(i)];
      acc += d * d;
    }
    out.push_back(acc / static_cast<double>(spec.extent));
  }
  return out;
}

WeightVector scale_layers(const WeightVector& v, const std::vector<float>& factors) {
  if (!v.layout) throw LayoutError("scale_layers: vector has no layout");
  if (factors.size() != v.layout->layers.size()) {
    throw LayoutError("scale_layers: " + std::to_string(factors.size()) + " factors for " +
                      std::to_string(v.layout->layers.size()) + " layers");
  }
  WeightVector out = v;
  for (size_t l = 0; l < factors.size(); ++l) {
    const auto& spec = v.layout->layers[l];
    for (int64_t i = spec.offset; i < spec.offset + spec.extent; ++i) {
      out.values[static_cast<size_t>(i)] *= factors[l];
    }
  }
  return out;
}

}  // namespace weightgen
