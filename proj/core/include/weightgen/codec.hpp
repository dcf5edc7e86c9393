#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "weightgen/rng.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

enum class LayerKind : uint8_t { Conv = 0, Fc = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::vector<int> weight_shape;  // conv [O,C,kh,kw], fc [out,in]
  int bias_len = 0;
  // Derived by make_layout:
  int64_t offset = 0;  // into the flat vector
  int64_t extent = 0;  // weights + biases
  int neuron_count = 0;
  int neuron_raw_dim = 0;  // kernel size + 1 for the bias

  int64_t weight_count() const {
    int64_t n = 1;
    for (int d : weight_shape) n *= d;
    return n;
  }
};

/// Describes how a flat vector slices back into layers and neurons. Flat
/// order: layers in forward order; within a layer all neuron weights
/// (neuron-major), then the layer's biases.
struct LayerLayout {
  std::vector<LayerSpec> layers;
  int64_t total = 0;
  int token_count = 0;

  bool compatible(const LayerLayout& other) const;
};

LayerLayout make_layout(const std::vector<std::pair<LayerKind, std::vector<int>>>& specs);

struct WeightVector {
  std::vector<float> values;
  std::shared_ptr<const LayerLayout> layout;

  int64_t size() const { return static_cast<int64_t>(values.size()); }
};

/// Neuron-token view of a weight vector: one token per output neuron,
/// holding that neuron's kernel weights followed by its bias.
struct TokenSequence {
  std::shared_ptr<const LayerLayout> layout;
  std::vector<float> values;          // concatenated per-token payloads
  std::vector<int> token_layer;       // layer id per token
  std::vector<int> token_neuron;      // neuron id within the layer
  std::vector<int64_t> token_offset;  // into values; sentinel at the end

  int count() const { return static_cast<int>(token_layer.size()); }
  int token_dim(int t) const {
    return static_cast<int>(token_offset[static_cast<size_t>(t) + 1] -
                            token_offset[static_cast<size_t>(t)]);
  }
};

/// Per-layer statistics over the zoo train split, pooled over weights and
/// biases. sigma is floored at 1e-6 for degenerate layers.
struct LayerStats {
  std::vector<float> mu;
  std::vector<float> sigma;
};

WeightVector flatten(const std::vector<std::pair<Tensor, Tensor>>& params,
                     std::shared_ptr<const LayerLayout> layout);
/// Inverse of flatten; returns per-layer (weights, bias) tensors.
std::vector<std::pair<Tensor, Tensor>> unflatten(const WeightVector& v);

TokenSequence tokenize(const WeightVector& v);
WeightVector detokenize(const TokenSequence& seq);

/// Neuron-permutation symmetry: independently permutes the output neurons of
/// every layer but the last and reorders the next layer's input slices to
/// match, leaving the network function unchanged.
WeightVector permute_augment(const WeightVector& v, RngStream& rng);
/// Same with explicit permutations, one per layer except the last;
/// perms[l][j] = source neuron of layer l moved to position j.
WeightVector permute_augment(const WeightVector& v, const std::vector<std::vector<int>>& perms);

/// Zeroes ceil(fraction * token_count) whole neuron tokens, chosen uniformly.
WeightVector erase_augment(const WeightVector& v, float fraction, RngStream& rng);

LayerStats layer_stats(const std::vector<WeightVector>& train_vectors);

/// Mean squared error per layer between two vectors of the same layout.
std::vector<double> per_layer_mse(const WeightVector& a, const WeightVector& b);

/// Scales the stored values of the selected layers (weights and biases) by
/// the given factors; used to construct artificially imbalanced zoos.
WeightVector scale_layers(const WeightVector& v, const std::vector<float>& factors);

}  // namespace weightgen
