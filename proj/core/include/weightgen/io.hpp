#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weightgen/codec.hpp"
#include "weightgen/tensor.hpp"

namespace weightgen {

// --- WZV1: one weight vector with its layer structure -----------------------
// magic "WZV1", u8 endianness flag (0 = little endian), u32 layer count,
// per layer { u8 kind (0 conv / 1 fc), u8 ndims, u32 dims... },
// then per layer the f32 LE payload: weights, then bias (len = dims[0]).

void write_wts(const std::filesystem::path& path, const WeightVector& v);
WeightVector read_wts(const std::filesystem::path& path);

// --- WZE1: embedding matrix --------------------------------------------------
// magic "WZE1", u32 D, u32 count, f32 LE row-major payload. A JSON sidecar
// (<path>.json) names the source checkpoints.

struct EmbeddingMatrix {
  int dim = 0;
  std::vector<float> rows;  // count * dim
  int64_t count() const { return dim == 0 ? 0 : static_cast<int64_t>(rows.size()) / dim; }
};

void write_wze(const std::filesystem::path& path, const EmbeddingMatrix& m,
               const std::string& sidecar_json);
EmbeddingMatrix read_wze(const std::filesystem::path& path);

// --- WZA1: checkpoint container ----------------------------------------------
// magic "WZA1", u32 JSON header length, JSON header, then f32 LE parameter
// payloads in the order declared by header["params"] = [{name, shape}].

struct BlobCheckpoint {
  std::string header_json;
  std::vector<std::string> param_names;
  std::vector<std::vector<int>> param_shapes;
  std::vector<std::vector<float>> param_values;

  void add(const std::string& name, const Tensor& t);
  void add_raw(const std::string& name, std::vector<int> shape, std::vector<float> values);
  const std::vector<float>& get(const std::string& name) const;
  const std::vector<int>& shape_of(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_wza(const std::filesystem::path& path, const BlobCheckpoint& ckpt);
BlobCheckpoint read_wza(const std::filesystem::path& path);

/// Write bytes to a temp file in the target directory, then rename over the
/// destination so partially written artifacts are never observed.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace weightgen
