#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "weightgen/codec.hpp"
#include "weightgen/io.hpp"
#include "weightgen/nn.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

/// A point in the tanh-bounded hyper-representation space; every component
/// lies strictly inside (-1, 1).
using Embedding = std::vector<float>;

struct AeConfig {
  int d_token = 128;
  int d_hidden = 256;  // attention width, split across heads
  int n_layers = 2;
  int n_heads = 4;
  int d_z = 128;
  std::string compression = "linear";
  float dropout = 0.1f;
  float weight_decay = 1e-9f;
  float lr = 1e-4f;
  float beta = 0.95f;  // composite loss weight: beta*recon + (1-beta)*contrastive
  int epochs = 300;
  int batch_size = 64;
  bool lwln = true;
  float temperature = 0.1f;      // NT-Xent
  float erase_fraction = 0.1f;
  int val_every = 10;            // epochs between validation checks
  uint64_t seed = 1;

  void validate() const;
};

/// Mean squared reconstruction error, averaged over models and weights.
double loss_mse_value(const std::vector<WeightVector>& recon,
                      const std::vector<WeightVector>& orig);
/// Layer-normalized variant: per-layer squared errors divided by sigma_l^2,
/// same (1/MN) normalization. Identical to loss_mse_value under unit sigma.
double loss_lwln_value(const std::vector<WeightVector>& recon,
                       const std::vector<WeightVector>& orig, const LayerStats& stats);
/// Explained variance 1 - mse(recon, orig) / mse(mean, orig).
double r_squared(const std::vector<WeightVector>& recon, const std::vector<WeightVector>& orig,
                 const WeightVector& train_mean);

struct AeTrainLogEntry {
  int epoch = 0;
  double loss = 0.0;
  double recon = 0.0;
  double contrastive = 0.0;
  double val_r2 = 0.0;  // NaN when not evaluated this epoch
};

/// Attention-based autoencoder over neuron-token sequences.
class HyperAe {
 public:
  static HyperAe build(const AeConfig& cfg, std::shared_ptr<const LayerLayout> layout,
                       const LayerStats& stats);

  /// Eval-mode deterministic encode/decode.
  Embedding encode(const WeightVector& v) const;
  WeightVector decode(const Embedding& z) const;
  EmbeddingMatrix encode_batch(const std::vector<WeightVector>& vs) const;
  std::vector<WeightVector> decode_batch(const EmbeddingMatrix& zs) const;

  const AeConfig& config() const { return cfg_; }
  const LayerStats& stats() const { return stats_; }
  std::shared_ptr<const LayerLayout> layout() const { return layout_; }
  const std::vector<AeTrainLogEntry>& train_log() const { return log_; }

  void save(const std::filesystem::path& path) const;
  static HyperAe load(const std::filesystem::path& path);

  /// One optimization pass over the train split. Exposed through
  /// train_hyperae; public for the trainer only.
  struct TrainData {
    std::vector<WeightVector> train;
    std::vector<WeightVector> val;
  };

  friend HyperAe train_hyperae(const TrainData& data, const AeConfig& cfg,
                               std::shared_ptr<const LayerLayout> layout);

 private:
  HyperAe() = default;

  struct Block {
    LayerNormLayer ln1, ln2;
    LinearLayer qkv;   // d_token -> 3*d_hidden
    LinearLayer attn_out;  // d_hidden -> d_token
    LinearLayer mlp1;  // d_token -> 2*d_token
    LinearLayer mlp2;  // 2*d_token -> d_token
  };

  Tensor run_blocks(const std::vector<Block>& blocks, Tensor x, bool train,
                    RngStream* rng) const;
  Tensor encode_tokens(const std::vector<const WeightVector*>& batch, bool train,
                       RngStream* rng) const;  // -> z [B, d_z]
  Tensor decode_tokens(const Tensor& z, bool train, RngStream* rng) const;  // -> flat [B, N]
  Tensor flat_targets(const std::vector<const WeightVector*>& batch) const;
  Tensor project(const Tensor& z) const;  // contrastive projection head
  ParamList params() const;
  std::vector<std::vector<float>> snapshot() const;
  void restore(const std::vector<std::vector<float>>& snap);

  AeConfig cfg_;
  std::shared_ptr<const LayerLayout> layout_;
  LayerStats stats_;
  std::vector<LinearLayer> embedders_;   // one per layer (distinct neuron dims)
  std::vector<LinearLayer> debedders_;
  Tensor enc_pos_, dec_pos_;  // [tokens, d_token]
  Tensor cls_;                // [1, d_token]
  std::vector<Block> enc_blocks_, dec_blocks_;
  LinearLayer compress_;      // d_token -> d_z
  LinearLayer decompress_;    // d_z -> tokens*d_token
  Mlp proj_head_;             // d_z -> 4x400 -> 50
  std::vector<AeTrainLogEntry> log_;
};

/// Trains with Adam on the composite loss; the reconstruction term uses
/// layer-wise normalization when cfg.lwln is set. Keeps the
/// best-validation-R^2 parameters. Aborts with the last good state if the
/// loss turns NaN.
HyperAe train_hyperae(const HyperAe::TrainData& data, const AeConfig& cfg,
                      std::shared_ptr<const LayerLayout> layout);

/// Contrastive NT-Xent over 2B projected views; rows 0..B-1 pair with
/// B..2B-1. Exposed for direct testing.
Tensor ntxent_loss(const Tensor& projections_2b, float temperature);

}  // namespace weightgen
