#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "weightgen/datasets.hpp"
#include "weightgen/hyperae.hpp"
#include "weightgen/samplers.hpp"
#include "weightgen/zoo.hpp"

namespace weightgen {

/// Where a dataset comes from: a deterministic synthetic task or an IDX
/// cache directory (`data/<name>/{train,test}-{images,labels}.idx`).
struct DatasetSpec {
  std::string type = "synth";  // synth | idx
  std::string name = "synth";
  uint64_t seed = 101;         // synth task seed
  int classes = 10;
  int channels = 1;
  int64_t train_n = 8000;
  int64_t test_n = 2000;
  std::string dir;             // idx directory (relative to the data root)
  int64_t train_subset = 0;    // idx: optional subset size (0 = all)
  uint64_t subset_seed = 5;

  ImageDataset load(const std::string& split, const std::filesystem::path& data_root) const;
};

struct SamplerSpec {
  std::string method = "kde30";  // uniform | kde | kde30 | counterfactual | neigh | neigh30 | gan | gan30
  int n = 50;
  uint64_t seed = 11;
  float bandwidth = 0.0f;   // 0 = Silverman
  float quantile = 0.1f;    // counterfactual threshold
  NeighborMapConfig neighbor;
  GanConfig gan;

  float top_fraction() const;
  bool needs_kde() const;
};

struct EvalPlan {
  int finetune_epochs = 5;
  std::vector<int> ensemble_sizes = {1, 5, 10};
  int ensemble_trials = 15;
  int population = 30;       // models per population in comparisons
  int64_t finetune_train_n = 2000;
  uint64_t seed = 7;
  std::optional<DatasetSpec> transfer_target;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string output_dir = "out";
  uint64_t seed = 1;
  DatasetSpec dataset;
  ZooConfig zoo;
  AeConfig ae;
  std::vector<SamplerSpec> samplers;
  EvalPlan eval;
};

/// Parses and validates a config. Unknown keys, type mismatches and schema
/// version mismatches raise ConfigError naming the offending key path.
/// Defaults follow the per-dataset zoo rows and the desk-scale AE settings.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical serialized config, hex-encoded.
std::string config_hash(const ExperimentConfig& cfg);

/// Dataset cache root: WEIGHTGEN_DATA_DIR when set, else "data".
std::filesystem::path data_root();

}  // namespace weightgen
