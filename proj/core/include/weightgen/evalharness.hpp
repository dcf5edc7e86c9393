#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weightgen/hyperae.hpp"
#include "weightgen/samplers.hpp"
#include "weightgen/stats.hpp"
#include "weightgen/zoo.hpp"

namespace weightgen {

/// Accuracy trajectories for a population of models under one method label.
/// trajectory[m][e] is model m's test accuracy after e fine-tuning epochs;
/// entry 0 is the untrained (epoch 0) evaluation.
struct PopulationResult {
  std::string method;
  std::vector<uint64_t> seeds;
  std::vector<std::vector<double>> trajectories;
  std::vector<bool> failed;  // divergence is recorded, not fatal

  int epochs() const;
  /// Accuracies of the non-failed models at the given epoch.
  std::vector<double> at_epoch(int epoch) const;
};

struct PairwiseTest {
  std::string label;
  double p_value = 1.0;
  double cles = 0.5;
};

struct EvalReport {
  std::string method;
  struct EpochStats {
    int epoch = 0;
    SummaryStats stats;
  };
  std::vector<EpochStats> per_epoch;
  std::vector<PairwiseTest> tests;
};

EvalReport make_report(const PopulationResult& result, uint64_t bootstrap_seed);
void write_population_csv(const std::filesystem::path& path, const PopulationResult& result);
void write_report_json(const std::filesystem::path& path, const EvalReport& report);

/// Epoch-0 evaluation of decoded/sampled weight vectors (>= 10 for stats).
PopulationResult eval_population(const std::vector<WeightVector>& vectors, const NetSpec& spec,
                                 const ImageDataset& test, const std::string& method);

/// Independent fine-tuning of every vector with the target hyperparameters.
/// Pass record_weights to also get per-epoch weight checkpoints back.
struct FinetuneOutput {
  PopulationResult result;
  std::vector<std::vector<WeightVector>> weight_trajectories;  // when recorded
};
FinetuneOutput finetune_population(const std::vector<WeightVector>& vectors, const NetSpec& spec,
                                   const ZooConfig& hyper, int epochs, const ImageDataset& train,
                                   const ImageDataset& test, const std::string& method,
                                   uint64_t seed_base, bool record_weights = false);

/// Fresh random initializations for from-scratch baselines.
std::vector<WeightVector> random_population(const NetSpec& spec, InitScheme init, int n,
                                            uint64_t seed_base, float uniform_range = 0.1f);

/// Mean-softmax ensembles: for each size, `trials` random member subsets.
std::map<int, double> ensemble_eval(const std::vector<WeightVector>& vectors, const NetSpec& spec,
                                    const ImageDataset& test, const std::vector<int>& sizes,
                                    int trials, uint64_t seed);

/// Encode another zoo's weights with this autoencoder, decode and score.
struct UnseenZooResult {
  double single_mean = 0.0, single_max = 0.0;
  double ensemble_mean = 0.0, ensemble_max = 0.0;
};
UnseenZooResult unseen_zoo_eval(const HyperAe& ae, const std::vector<WeightVector>& zoo_vectors,
                                const NetSpec& spec, const ImageDataset& test, int ensemble_size,
                                int trials, uint64_t seed);

/// Re-slices a generated flat vector into a different architecture's layers
/// in order; surplus source values are dropped from the tail. Extra
/// parameters of the target (skip convs) are not part of the main layout and
/// are initialized by the evaluating network's seed.
WeightVector redistribute_weights(const WeightVector& source, const NetSpec& target_spec);

// --- Embedding-space analyses -------------------------------------------------

struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<int64_t> counts;
};
Histogram make_histogram(std::span<const double> values, int bins);

struct GeometryAnalysis {
  std::vector<double> norms;
  std::vector<double> cosine_distances;  // subsampled above max_pairs
  Histogram norm_hist;
  Histogram cosine_hist;
  std::vector<Histogram> per_dim_all;
  std::vector<Histogram> per_dim_top;  // top-30% by accuracy, when given
};
GeometryAnalysis analyze_geometry(const EmbeddingMatrix& embeddings,
                                  std::span<const double> accuracies = {}, int bins = 50,
                                  int64_t max_pairs = 1000000, uint64_t seed = 1);

struct RobustnessPoint {
  double level = 0.0;
  double mean_accuracy = 0.0;
  double r2 = 0.0;
};
/// Adds per-dimension noise eps ~ N(0, (level * anchor_std_dim)^2) to the
/// encodings of the originals, decodes, and scores accuracy and R^2.
std::vector<RobustnessPoint> robustness_sweep(const HyperAe& ae,
                                              const std::vector<WeightVector>& originals,
                                              const EmbeddingMatrix& anchor_embeddings,
                                              std::span<const double> noise_levels,
                                              const NetSpec& spec, const ImageDataset& test,
                                              const WeightVector& train_mean, uint64_t seed);

struct InterpolationResult {
  std::vector<double> ts;                            // linspace(0,1,steps)
  std::vector<std::vector<double>> pair_accuracy;    // [pair][step]
};
InterpolationResult smoothness_interpolation(const HyperAe& ae,
                                             const std::vector<std::pair<Embedding, Embedding>>& pairs,
                                             int steps, const NetSpec& spec,
                                             const ImageDataset& test);

struct DistancePoint {
  int epoch = 0;
  double l2_distance = 0.0;
  double accuracy_gap = 0.0;
};
struct WeightTrajectory {
  std::vector<WeightVector> weights;
  std::vector<double> accuracy;
};
std::vector<DistancePoint> weight_distance_tracking(const WeightTrajectory& original,
                                                    const WeightTrajectory& reconstructed);

}  // namespace weightgen
