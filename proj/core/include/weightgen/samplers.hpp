#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "weightgen/io.hpp"
#include "weightgen/nn.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

/// Train-split embeddings (optionally filtered to the top performers) that
/// ground every sampling strategy.
struct AnchorSet {
  EmbeddingMatrix embeddings;
  std::vector<double> accuracies;
  float top_fraction = 1.0f;
};

/// Keeps the rows whose accuracy reaches the (1 - fraction) quantile; ties at
/// the threshold are all kept, so the result has at least ceil(fraction * M)
/// rows.
AnchorSet select_anchors(const EmbeddingMatrix& embeddings, std::span<const double> accuracies,
                         float top_fraction);

/// S_U: i.i.d. U(-1, 1) per component of the tanh-bounded box.
EmbeddingMatrix sample_uniform(int dim, int n, uint64_t seed);

// --- Per-dimension Gaussian KDE (S_KDE / S_KDE30, and S_C) -------------------

struct KdeModel {
  int dim = 0;
  int anchor_count = 0;
  std::vector<float> anchors;    // anchor_count x dim, row-major
  std::vector<float> bandwidth;  // per dimension

  float anchor(int row, int d) const { return anchors[static_cast<size_t>(row) * dim + d]; }
};

/// Bandwidth: per-dimension Silverman rule 0.9 * min(sigma, IQR/1.34) *
/// M^(-1/5), floored at 0.01; a positive h_override replaces it everywhere.
KdeModel kde_fit(const AnchorSet& anchors, float h_override = 0.0f);
double kde_density(const KdeModel& model, int dim, double x);
/// Independent anchor choice per dimension plus N(0, h^2) noise; clamped to
/// the [-1,1] box.
EmbeddingMatrix kde_sample(const KdeModel& model, int n, uint64_t seed);
/// S_C: per dimension, rejection-samples U(-1,1) keeping values whose density
/// lies below the given quantile of the anchor densities. At most 10^4
/// proposals per accepted value.
EmbeddingMatrix sample_counterfactual(const KdeModel& model, int n, float quantile, uint64_t seed);

void save_kde(const std::filesystem::path& path, const KdeModel& model);
KdeModel load_kde(const std::filesystem::path& path);

// --- Neighborhood map (S_Neigh / S_Neigh30) ----------------------------------

struct NeighborMapConfig {
  int low_dim = 3;
  int hidden = 64;
  int knn = 10;
  int epochs = 400;
  int batch_size = 32;
  float lr = 1e-3f;
  float neighbor_weight = 0.3f;
  float push_margin = 1.0f;
  float max_median_rel_error = 0.15f;  // round-trip validation gate
  uint64_t seed = 1;
};

/// Parametric encoder/decoder pair approximating a neighborhood-preserving
/// dimensionality reduction with an approximate inverse. The interface only
/// assumes forward/inverse maps, so a faithful UMAP could be dropped in.
class NeighborMap {
 public:
  static NeighborMap fit(const AnchorSet& anchors, const NeighborMapConfig& cfg);

  std::vector<float> forward(std::span<const float> z) const;
  std::vector<float> inverse(std::span<const float> low) const;
  EmbeddingMatrix forward_batch(const EmbeddingMatrix& zs) const;
  EmbeddingMatrix inverse_batch(const EmbeddingMatrix& lows) const;

  int low_dim() const { return cfg_.low_dim; }
  int high_dim() const { return dim_; }
  double fit_median_rel_error() const { return fit_error_; }
  /// Axis-aligned bounding box of the anchors' low-d images, fixed at fit.
  const std::vector<float>& box_lo() const { return box_lo_; }
  const std::vector<float>& box_hi() const { return box_hi_; }

  void save(const std::filesystem::path& path) const;
  static NeighborMap load(const std::filesystem::path& path);

 private:
  NeighborMapConfig cfg_;
  int dim_ = 0;
  Mlp enc_, dec_;
  double fit_error_ = 0.0;
  std::vector<float> box_lo_, box_hi_;
};

/// Uniform draws inside the fitted low-d bounding box, mapped back through
/// the approximate inverse.
EmbeddingMatrix sample_neighbor(const NeighborMap& map, int n, uint64_t seed);

// --- Latent-space GAN (S_GAN / S_GAN30) --------------------------------------

struct GanConfig {
  int noise_dim = 16;
  float lr_generator = 1e-4f;
  float lr_discriminator = 2e-4f;
  int epochs = 1000;
  int batch_size = 32;
  uint64_t seed = 1;
};

/// Generator 16 -> 128 -> 256 -> 512 -> D with ReLU and a tanh head;
/// discriminator D -> 1024 -> 512 -> 256 -> 1 with spectral normalization.
/// Non-saturating BCE objective, two time-scale Adam updates.
class LatentGan {
 public:
  static LatentGan train(const AnchorSet& anchors, const GanConfig& cfg);

  EmbeddingMatrix sample(int n, uint64_t seed) const;
  int dim() const { return dim_; }
  const GanConfig& config() const { return cfg_; }

  void save(const std::filesystem::path& path) const;
  static LatentGan load(const std::filesystem::path& path);

 private:
  Tensor generate(const Tensor& noise) const;
  Tensor discriminate(const Tensor& x, bool update_power_iteration);

  GanConfig cfg_;
  int dim_ = 0;
  Mlp gen_;  // relu MLP up to D, tanh applied on top
  std::vector<LinearLayer> disc_;
  // persistent power-iteration vectors, one (u, v) pair per disc layer
  std::vector<std::vector<float>> sn_u_, sn_v_;
};

}  // namespace weightgen
