#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "weightgen/codec.hpp"
#include "weightgen/datasets.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

enum class Activation { Tanh, Gelu, Relu, Sigmoid };
enum class InitScheme { Uniform, KaimingUniform, Normal, KaimingNormal };

std::string to_string(Activation a);
std::string to_string(InitScheme s);
Activation activation_from_string(const std::string& s);
InitScheme init_from_string(const std::string& s);

struct ConvLayerDesc {
  int in_ch = 1, out_ch = 8, k = 5, stride = 1, pad = 0;
  bool pool_after = false;   // maxpool k2 between conv and activation
  bool res_skip = false;     // parallel 1x1 conv, center-cropped to match
  bool id_skip = false;      // identity skip, center-cropped to match
};

/// Architecture description for the zoo CNNs and the unseen-architecture
/// variants. Forward order: convs (conv -> skip add -> pool -> act), flatten,
/// fcs with the activation between all but the last.
struct NetSpec {
  std::vector<ConvLayerDesc> convs;
  std::vector<std::pair<int, int>> fcs;  // (in, out)
  Activation act = Activation::Tanh;
  /// Optional per-layer storage scale: effective weights = stored * scale
  /// (main layers only, in layout order). Used to express zoos whose stored
  /// values are deliberately rescaled.
  std::vector<float> param_scale;
};

/// The fixed zoo architecture: conv(in->8,k5), pool, act, conv(8->6,k5),
/// pool, act, conv(6->4,k2), act, fc(36->20), act, fc(20->10).
NetSpec table3_spec(int input_channels, Activation act);
/// The three unseen-architecture variants.
NetSpec table3_res_skip_spec(int input_channels, Activation act);
NetSpec four_conv_spec(int input_channels, Activation act, bool id_skip);

class ConvNet {
 public:
  static ConvNet build(const NetSpec& spec, InitScheme init, uint64_t seed,
                       float uniform_range = 0.1f);

  Tensor forward(const Tensor& x) const;  // [B,C,28,28] -> logits [B,10]

  /// Main-path parameters in layer order (excludes skip convs).
  std::vector<std::pair<Tensor, Tensor>> main_params() const;
  /// Every trainable parameter, skip convs included.
  std::vector<Tensor> all_params() const;
  std::vector<std::string> param_names() const;

  int64_t param_count() const;  // main-path parameters (the layout's total)
  std::shared_ptr<const LayerLayout> layout() const { return layout_; }
  const NetSpec& spec() const { return spec_; }

  /// Stored-space vector; divides by param_scale.
  WeightVector to_vector() const;
  /// Loads stored-space values; multiplies by param_scale.
  void load(const WeightVector& v);

 private:
  NetSpec spec_;
  std::vector<Tensor> conv_w_, conv_b_;
  std::vector<Tensor> skip_w_, skip_b_;  // defined only for res_skip layers
  std::vector<Tensor> fc_w_, fc_b_;
  std::shared_ptr<const LayerLayout> layout_;
};

/// Table-4 style zoo hyperparameters plus desk-scale knobs.
struct ZooConfig {
  std::string dataset = "synth";
  int input_channels = 1;
  Activation activation = Activation::Tanh;
  float weight_decay = 0.0f;
  float lr = 3e-4f;
  InitScheme init = InitScheme::Uniform;
  std::string optimizer = "adam";
  float uniform_range = 0.1f;  // U(-r, r) for the plain uniform scheme
  int batch_size = 32;
  int epochs = 12;
  std::vector<int> checkpoint_epochs;  // default: last 5 epochs
  int models = 100;
  uint64_t base_seed = 1;   // model i uses seed base_seed + i
  uint64_t split_seed = 17;
  uint64_t data_seed = 101;  // synth generation / subset selection
  int64_t train_subset = 8000;
  int64_t test_subset = 2000;

  std::vector<int> resolved_checkpoint_epochs() const;
};

/// Fills activation/weight_decay/lr/init from the per-dataset defaults
/// (mnist, svhn, cifar10, stl10; anything else gets the mnist row).
void apply_dataset_defaults(ZooConfig& cfg);

struct CheckpointRecord {
  int epoch = 0;
  double test_accuracy = 0.0;
  std::string path;  // relative to the zoo directory
};

struct ModelRecord {
  uint64_t seed = 0;
  bool failed = false;
  std::string split;  // train / val / test; empty for failed runs
  std::vector<double> epoch_accuracy;  // index = epoch, [0] = init
  std::vector<CheckpointRecord> checkpoints;
};

struct ZooManifest {
  int schema_version = 1;
  ZooConfig config;
  std::vector<ModelRecord> models;

  std::vector<const ModelRecord*> split_models(const std::string& split) const;
};

/// One training run: init from seed, Adam with the config hyperparameters,
/// per-epoch test accuracy, checkpoints at the requested epochs (epoch 0 is
/// the initialization). A NaN loss marks the run failed instead of throwing.
struct TrainedModel {
  uint64_t seed = 0;
  bool failed = false;
  std::vector<double> epoch_accuracy;
  std::vector<std::pair<int, WeightVector>> checkpoints;
};
TrainedModel train_model(const NetSpec& spec, const ZooConfig& cfg, uint64_t seed,
                         const ImageDataset& train, const ImageDataset& test);

/// Top-1 accuracy over the full dataset; stored-space vector evaluated under
/// the given architecture (param_scale applied on load).
double evaluate_model(const WeightVector& stored, const NetSpec& spec, const ImageDataset& data);

/// Class-probability rows [N, classes] for ensemble evaluation.
std::vector<float> model_softmax(const WeightVector& stored, const NetSpec& spec,
                                 const ImageDataset& data);

/// Trains config.models runs in a worker pool, writes
/// <dir>/models/<seed>/epoch_<e>.wts and <dir>/manifest.json.
ZooManifest generate_zoo(const ZooConfig& cfg, const std::filesystem::path& dir,
                         const ImageDataset& train, const ImageDataset& test);

ZooManifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const ZooManifest& manifest);

/// Loads every checkpoint of the given split at the given epochs (empty =
/// all checkpoint epochs); returns vectors plus their recorded accuracies.
struct ZooVectors {
  std::vector<WeightVector> vectors;
  std::vector<double> accuracies;
  std::vector<std::string> sources;  // checkpoint paths
};
ZooVectors load_split_vectors(const std::filesystem::path& dir, const ZooManifest& manifest,
                              const std::string& split, const std::vector<int>& epochs = {});

NetSpec spec_from_zoo_config(const ZooConfig& cfg);

}  // namespace weightgen
