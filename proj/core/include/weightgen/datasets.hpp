#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "weightgen/rng.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

/// Raw IDX payload: big-endian magic + dimension sizes, u8 elements.
struct IdxArray {
  uint8_t dtype = 0x08;  // unsigned byte
  std::vector<uint32_t> dims;
  std::vector<uint8_t> data;
};

IdxArray parse_idx(std::span<const uint8_t> bytes);
std::vector<uint8_t> serialize_idx(const IdxArray& arr);
IdxArray read_idx_file(const std::filesystem::path& path);
void write_idx_file(const std::filesystem::path& path, const IdxArray& arr);

/// Image classification dataset normalized to the fixed CxHxW geometry the
/// zoo architecture consumes. Pixels are floats in [0,1]; immutable once
/// built, safe to share across threads.
struct ImageDataset {
  std::string name;
  int num_classes = 10;
  int channels = 1;
  int height = 28;
  int width = 28;
  std::vector<float> images;  // N*C*H*W row-major
  std::vector<int> labels;    // N

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  int64_t image_elems() const { return static_cast<int64_t>(channels) * height * width; }
  /// Gather the given rows into a [B,C,H,W] tensor plus their labels.
  std::pair<Tensor, std::vector<int>> batch(std::span<const int64_t> rows) const;
};

/// Raw decoded images before geometry normalization.
struct RawImages {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // N*C*H*W in [0,1]
  int64_t count() const;
};

/// Bilinear resize to 28x28 and optional RGB->gray conversion
/// (luma weights 0.299/0.587/0.114). Inputs smaller than 8x8 are rejected.
ImageDataset preprocess(const RawImages& raw, std::vector<int> labels, int target_channels,
                        const std::string& name, int num_classes = 10);

/// Deterministic class-conditional synthetic dataset (oriented gratings with
/// per-image phase/contrast and pixel noise). The per-class pattern bank is
/// derived from the seed, so different seeds give genuinely different tasks;
/// the split label keeps train/test image draws disjoint within one task.
ImageDataset synth_dataset(uint64_t seed, int64_t n, int num_classes = 10, int channels = 1,
                           const std::string& split = "train");

/// Load `<dir>/{train,test}-{images,labels}.idx`; applies preprocess().
ImageDataset load_idx_dataset(const std::filesystem::path& dir, const std::string& split,
                              int target_channels, const std::string& name);
/// Write the dataset back out in the IDX cache layout (28x28 u8 pixels).
void save_idx_dataset(const ImageDataset& ds, const std::filesystem::path& dir,
                      const std::string& split);

/// Seeded subset without replacement (desk-scale trimming).
ImageDataset subset(const ImageDataset& ds, int64_t n, uint64_t seed);

}  // namespace weightgen
