#include "weightgen/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "weightgen/errors.hpp"

namespace weightgen {

namespace {

uint32_t read_be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

}  // namespace

IdxArray parse_idx(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("idx: header shorter than 4 bytes");
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw FormatError("idx: bad magic, first two bytes must be zero");
  }
  const uint8_t dtype = bytes[2];
  const uint8_t ndims = bytes[3];
  if (dtype != 0x08) {
    throw FormatError("idx: unsupported element type 0x" + std::to_string(dtype) +
                      ", expected unsigned byte (0x08)");
  }
  if (ndims != 1 && ndims != 3) {
    throw FormatError("idx: expected 1 (labels) or 3 (images) dimensions, got " +
                      std::to_string(ndims));
  }
  const size_t header = 4 + 4 * static_cast<size_t>(ndims);
  if (bytes.size() < header) throw FormatError("idx: truncated dimension header");
  IdxArray arr;
  arr.dtype = dtype;
  uint64_t total = 1;
  for (int i = 0; i < ndims; ++i) {
    const uint32_t d = read_be32(bytes.data() + 4 + 4 * i);
    arr.dims.push_back(d);
    total *= d;
  }
  if (bytes.size() - header != total) {
    throw FormatError("idx: truncated payload, expected " + std::to_string(total) +
                      " bytes, got " + std::to_string(bytes.size() - header));
  }
  arr.data.assign(bytes.begin() + static_cast<long>(header), bytes.end());
  return arr;
}

std::vector<uint8_t> serialize_idx(const IdxArray& arr) {
  std::vector<uint8_t> out;
  out.push_back(0);
  out.push_back(0);
  out.push_back(arr.dtype);
  out.push_back(static_cast<uint8_t>(arr.dims.size()));
  uint64_t total = 1;
  for (uint32_t d : arr.dims) {
    write_be32(out, d);
    total *= d;
  }
  if (arr.data.size() != total) {
    throw FormatError("idx: payload size " + std::to_string(arr.data.size()) +
                      " does not match dims product " + std::to_string(total));
  }
  out.insert(out.end(), arr.data.begin(), arr.data.end());
  return out;
}

IdxArray read_idx_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open idx file " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

void write_idx_file(const std::filesystem::path& path, const IdxArray& arr) {
  std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize_idx(arr);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MissingArtifactError("cannot write idx file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
}

int64_t RawImages::count() const {
  const int64_t per = static_cast<int64_t>(channels) * height * width;
  return per == 0 ? 0 : static_cast<int64_t>(pixels.size()) / per;
}

std::pair<Tensor, std::vector<int>> ImageDataset::batch(std::span<const int64_t> rows) const {
  const int64_t per = image_elems();
  Tensor x = Tensor::zeros({static_cast<int>(rows.size()), channels, height, width});
  auto xv = x.values();
  std::vector<int> y(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const int64_t r = rows[i];
    std::memcpy(xv.data() + static_cast<int64_t>(i) * per, images.data() + r * per,
                static_cast<size_t>(per) * sizeof(float));
    y[i] = labels[static_cast<size_t>(r)];
  }
  return {x, std::move(y)};
}

namespace {

// Bilinear sample with half-pixel centers; constant images stay constant.
float bilinear(const float* plane, int h, int w, float sy, float sx) {
  const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
  const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const float fy = std::clamp(sy - static_cast<float>(y0), 0.0f, 1.0f);
  const float fx = std::clamp(sx - static_cast<float>(x0), 0.0f, 1.0f);
  const float top = plane[y0 * w + x0] * (1.0f - fx) + plane[y0 * w + x1] * fx;
  const float bot = plane[y1 * w + x0] * (1.0f - fx) + plane[y1 * w + x1] * fx;
  return top * (1.0f - fy) + bot * fy;
}

}  // namespace

ImageDataset preprocess(const RawImages& raw, std::vector<int> labels, int target_channels,
                        const std::string& name, int num_classes) {
  if (raw.height < 8 || raw.width < 8) {
    throw InputError("preprocess: image " + std::to_string(raw.height) + "x" +
                     std::to_string(raw.width) + " smaller than 8x8");
  }
  if (raw.channels != 1 && raw.channels != 3) {
    throw InputError("preprocess: source channels must be 1 or 3, got " +
                     std::to_string(raw.channels));
  }
  if (target_channels != 1 && target_channels != 3) {
    throw InputError("preprocess: target channels must be 1 or 3");
  }
  const int64_t n = raw.count();
  if (static_cast<int64_t>(labels.size()) != n) {
    throw InputError("preprocess: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " images");
  }
  for (int label : labels) {
    if (label < 0 || label >= num_classes) {
      throw InputError("preprocess: label " + std::to_string(label) + " out of range [0," +
                       std::to_string(num_classes) + ")");
    }
  }
  constexpr int out_hw = 28;
  ImageDataset ds;
  ds.name = name;
  ds.num_classes = num_classes;
  ds.channels = target_channels;
  ds.labels = std::move(labels);
  ds.images.resize(static_cast<size_t>(n) * target_channels * out_hw * out_hw);

  const float sy_scale = static_cast<float>(raw.height) / out_hw;
  const float sx_scale = static_cast<float>(raw.width) / out_hw;
  const int64_t src_plane = static_cast<int64_t>(raw.height) * raw.width;
  const int64_t src_img = src_plane * raw.channels;

  std::vector<float> resized(static_cast<size_t>(raw.channels) * out_hw * out_hw);
  for (int64_t i = 0; i < n; ++i) {
    const float* src = raw.pixels.data() + i * src_img;
    for (int c = 0; c < raw.channels; ++c) {
      const float* plane = src + c * src_plane;
      float* dst = resized.data() + static_cast<size_t>(c) * out_hw * out_hw;
      if (raw.height == out_hw && raw.width == out_hw) {
        std::memcpy(dst, plane, sizeof(float) * out_hw * out_hw);
      } else {
        for (int y = 0; y < out_hw; ++y) {
          const float sy = (static_cast<float>(y) + 0.5f) * sy_scale - 0.5f;
          for (int x = 0; x < out_hw; ++x) {
            const float sx = (static_cast<float>(x) + 0.5f) * sx_scale - 0.5f;
            dst[y * out_hw + x] = bilinear(plane, raw.height, raw.width, sy, sx);
          }
        }
      }
    }
    float* out = ds.images.data() + static_cast<size_t>(i) * target_channels * out_hw * out_hw;
    if (target_channels == raw.channels) {
      std::memcpy(out, resized.data(), resized.size() * sizeof(float));
    } else if (target_channels == 1) {
      // RGB -> gray via luma weights
      const float* r = resized.data();
      const float* g = r + out_hw * out_hw;
      const float* b = g + out_hw * out_hw;
      for (int p = 0; p < out_hw * out_hw; ++p) {
        out[p] = 0.299f * r[p] + 0.587f * g[p] + 0.114f * b[p];
      }
    } else {
      // gray -> RGB by replication
      for (int c = 0; c < 3; ++c) {
        std::memcpy(out + static_cast<size_t>(c) * out_hw * out_hw, resized.data(),
                    sizeof(float) * out_hw * out_hw);
      }
    }
  }
  for (auto& v : ds.images) v = std::clamp(v, 0.0f, 1.0f);
  return ds;
}

ImageDataset synth_dataset(uint64_t seed, int64_t n, int num_classes, int channels,
                           const std::string& split) {
  if (n < num_classes) {
    throw InputError("synth_dataset: need at least one sample per class, n=" + std::to_string(n));
  }
  if (channels != 1 && channels != 3) throw InputError("synth_dataset: channels must be 1 or 3");
  RngStream root(seed);
  constexpr int hw = 28;
  constexpr float two_pi = 2.0f * std::numbers::pi_v<float>;

  // Per-class pattern bank: orientation, frequency plus a secondary grating.
  auto bank = root.fork("bank");
  std::vector<int> order(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) order[static_cast<size_t>(c)] = c;
  bank.shuffle(order);
  struct ClassPattern {
    float theta, freq, theta2, freq2, mix;
    float rgb[3];
  };
  std::vector<ClassPattern> patterns(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    auto& p = patterns[static_cast<size_t>(c)];
    const int slot = order[static_cast<size_t>(c)];
    const int n_orient = (num_classes + 1) / 2;
    // Classes tile (orientation, frequency-band) pairs: wide angular spacing
    // and roughly an octave between bands keep them visible to 5x5 kernels.
    p.theta = std::numbers::pi_v<float> *
              (static_cast<float>(slot % n_orient) + bank.uniform(-0.08f, 0.08f)) /
              static_cast<float>(n_orient);
    p.freq = (slot < n_orient ? 3.0f : 5.5f) + bank.uniform(-0.15f, 0.15f);
    p.theta2 = p.theta + std::numbers::pi_v<float> / 2.0f;
    p.freq2 = 1.0f + bank.uniform(0.0f, 1.0f);
    p.mix = bank.uniform(0.1f, 0.2f);
    for (auto& w : p.rgb) w = bank.uniform(0.6f, 1.0f);
  }

  ImageDataset ds;
  ds.name = "synth";
  ds.num_classes = num_classes;
  ds.channels = channels;
  ds.labels.resize(static_cast<size_t>(n));
  // Balanced labels: round-robin assignment, then a seeded shuffle.
  for (int64_t i = 0; i < n; ++i) {
    ds.labels[static_cast<size_t>(i)] = static_cast<int>(i % num_classes);
  }
  auto lrng = root.fork("labels:" + split);
  lrng.shuffle(ds.labels);

  ds.images.resize(static_cast<size_t>(n) * channels * hw * hw);
  auto irng = root.fork("images:" + split);
  for (int64_t i = 0; i < n; ++i) {
    const auto& p = patterns[static_cast<size_t>(ds.labels[static_cast<size_t>(i)])];
    const float phase = irng.uniform(0.0f, two_pi);
    const float phase2 = irng.uniform(0.0f, two_pi);
    const float contrast = irng.uniform(0.35f, 0.55f);
    const float ct = std::cos(p.theta), st = std::sin(p.theta);
    const float ct2 = std::cos(p.theta2), st2 = std::sin(p.theta2);
    float* img = ds.images.data() + static_cast<size_t>(i) * channels * hw * hw;
    for (int y = 0; y < hw; ++y) {
      const float v = static_cast<float>(y) / hw;
      for (int x = 0; x < hw; ++x) {
        const float u = static_cast<float>(x) / hw;
        const float g1 = std::sin(two_pi * p.freq * (u * ct + v * st) + phase);
        const float g2 = std::sin(two_pi * p.freq2 * (u * ct2 + v * st2) + phase2);
        const float base = 0.5f + contrast * (g1 + p.mix * g2);
        const float noisy = base + 0.10f * irng.normal();
        const float px = std::clamp(noisy, 0.0f, 1.0f);
        if (channels == 1) {
          img[y * hw + x] = px;
        } else {
          for (int c = 0; c < 3; ++c) {
            img[(c * hw + y) * hw + x] = std::clamp(px * p.rgb[c], 0.0f, 1.0f);
          }
        }
      }
    }
  }
  return ds;
}

ImageDataset load_idx_dataset(const std::filesystem::path& dir, const std::string& split,
                              int target_channels, const std::string& name) {
  const auto images_path = dir / (split + "-images.idx");
  const auto labels_path = dir / (split + "-labels.idx");
  IdxArray images = read_idx_file(images_path);
  IdxArray labels = read_idx_file(labels_path);
  if (images.dims.size() != 3) throw FormatError("idx: " + images_path.string() + " is not an image file");
  if (labels.dims.size() != 1) throw FormatError("idx: " + labels_path.string() + " is not a label file");
  if (images.dims[0] != labels.dims[0]) {
    throw FormatError("idx: image/label count mismatch " + std::to_string(images.dims[0]) + " vs " +
                      std::to_string(labels.dims[0]));
  }
  RawImages raw;
  raw.channels = 1;  // IDX image files are single-channel u8
  raw.height = static_cast<int>(images.dims[1]);
  raw.width = static_cast<int>(images.dims[2]);
  raw.pixels.resize(images.data.size());
  for (size_t i = 0; i < images.data.size(); ++i) {
    raw.pixels[i] = static_cast<float>(images.data[i]) / 255.0f;
  }
  std::vector<int> lab(labels.data.begin(), labels.data.end());
  int num_classes = 0;
  for (int l : lab) num_classes = std::max(num_classes, l + 1);
  num_classes = std::max(num_classes, 10);
  return preprocess(raw, std::move(lab), target_channels, name, num_classes);
}

void save_idx_dataset(const ImageDataset& ds, const std::filesystem::path& dir,
                      const std::string& split) {
  if (ds.channels != 1) throw InputError("save_idx_dataset: idx cache stores single-channel images");
  IdxArray images;
  images.dims = {static_cast<uint32_t>(ds.size()), static_cast<uint32_t>(ds.height),
                 static_cast<uint32_t>(ds.width)};
  images.data.resize(ds.images.size());
  for (size_t i = 0; i < ds.images.size(); ++i) {
    images.data[i] = static_cast<uint8_t>(std::lround(std::clamp(ds.images[i], 0.0f, 1.0f) * 255.0f));
  }
  IdxArray labels;
  labels.dims = {static_cast<uint32_t>(ds.size())};
  labels.data.assign(ds.labels.begin(), ds.labels.end());
  write_idx_file(dir / (split + "-images.idx"), images);
  write_idx_file(dir / (split + "-labels.idx"), labels);
}

ImageDataset subset(const ImageDataset& ds, int64_t n, uint64_t seed) {
  if (n >= ds.size()) return ds;
  RngStream rng(seed);
  std::vector<int64_t> rows(static_cast<size_t>(ds.size()));
  for (int64_t i = 0; i < ds.size(); ++i) rows[static_cast<size_t>(i)] = i;
  rng.shuffle(rows);
  rows.resize(static_cast<size_t>(n));
  std::sort(rows.begin(), rows.end());
  ImageDataset out;
  out.name = ds.name;
  out.num_classes = ds.num_classes;
  out.channels = ds.channels;
  out.height = ds.height;
  out.width = ds.width;
  const int64_t per = ds.image_elems();
  out.images.resize(static_cast<size_t>(n * per));
  out.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int64_t r = rows[static_cast<size_t>(i)];
    std::memcpy(out.images.data() + i * per, ds.images.data() + r * per,
                static_cast<size_t>(per) * sizeof(float));
    out.labels[static_cast<size_t>(i)] = ds.labels[static_cast<size_t>(r)];
  }
  return out;
}

}  // namespace weightgen
