#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "weightgen/datasets.hpp"
#include "weightgen/errors.hpp"

using namespace weightgen;

TEST_SUITE_BEGIN("datasets");

TEST_CASE("idx fixture decodes to the expected pixels") {
  // header 00 00 08 03, dims (1,2,2), payload [0,255,0,255]
  const std::vector<uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2,
                                      0, 0, 0, 2, 0, 255, 0, 255};
  IdxArray arr = parse_idx(bytes);
  CHECK(arr.dims == std::vector<uint32_t>{1, 2, 2});
  CHECK(arr.data == std::vector<uint8_t>{0, 255, 0, 255});
}

TEST_CASE("idx empty label file parses to an empty array") {
  const std::vector<uint8_t> bytes = {0, 0, 8, 1, 0, 0, 0, 0};
  IdxArray arr = parse_idx(bytes);
  CHECK(arr.dims == std::vector<uint32_t>{0});
  CHECK(arr.data.empty());
}

TEST_CASE("idx wrong magic is a format error") {
  const std::vector<uint8_t> bytes = {0, 0, 9, 3, 0, 0, 0, 0};
  CHECK_THROWS_AS(parse_idx(bytes), FormatError);
}

TEST_CASE("idx truncated payload is a length error") {
  const std::vector<uint8_t> bytes = {0, 0, 8, 1, 0, 0, 0, 4, 1, 2};
  CHECK_THROWS_WITH_AS(parse_idx(bytes), doctest::Contains("truncated"), FormatError);
}

TEST_CASE("idx round trip is bit exact") {
  IdxArray arr;
  arr.dims = {3, 4, 4};
  for (int i = 0; i < 48; ++i) arr.data.push_back(static_cast<uint8_t>(i * 5));
  const auto bytes = serialize_idx(arr);
  IdxArray back = parse_idx(bytes);
  CHECK(back.dims == arr.dims);
  CHECK(back.data == arr.data);
  CHECK(serialize_idx(back) == bytes);
}

TEST_CASE("preprocess keeps a 28x28 gray image unchanged") {
  RawImages raw;
  raw.channels = 1;
  raw.height = raw.width = 28;
  raw.pixels.resize(28 * 28);
  for (size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = static_cast<float>(i % 255) / 255.0f;
  auto ds = preprocess(raw, {3}, 1, "t");
  for (size_t i = 0; i < raw.pixels.size(); ++i) CHECK(ds.images[i] == raw.pixels[i]);
}

TEST_CASE("preprocess resizes a constant image to the same constant") {
  RawImages raw;
  raw.channels = 1;
  raw.height = raw.width = 56;
  raw.pixels.assign(56 * 56, 0.375f);
  auto ds = preprocess(raw, {0}, 1, "t");
  CHECK(ds.images.size() == 28 * 28);
  for (float v : ds.images) CHECK(v == doctest::Approx(0.375f).epsilon(1e-6));
}

TEST_CASE("preprocess converts pure red to luma 0.299") {
  RawImages raw;
  raw.channels = 3;
  raw.height = raw.width = 28;
  raw.pixels.assign(3 * 28 * 28, 0.0f);
  std::fill_n(raw.pixels.begin(), 28 * 28, 1.0f);  // R plane
  auto ds = preprocess(raw, {1}, 1, "t");
  CHECK(ds.channels == 1);
  for (float v : ds.images) CHECK(v == doctest::Approx(0.299f));
}

TEST_CASE("preprocess rejects tiny images") {
  RawImages raw;
  raw.channels = 1;
  raw.height = raw.width = 7;
  raw.pixels.assign(49, 0.5f);
  CHECK_THROWS_AS(preprocess(raw, {1}, 1, "t"), InputError);
}

TEST_CASE("synth dataset is deterministic in the seed") {
  auto a = synth_dataset(42, 50);
  auto b = synth_dataset(42, 50);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  auto c = synth_dataset(43, 50);
  CHECK(a.images != c.images);
}

TEST_CASE("synth labels are balanced within one count") {
  auto ds = synth_dataset(7, 105, 10);
  std::vector<int> hist(10, 0);
  for (int l : ds.labels) ++hist[static_cast<size_t>(l)];
  for (int h : hist) {
    CHECK(h >= 10);
    CHECK(h <= 11);
  }
}

TEST_CASE("synth pixels stay inside [0,1]") {
  auto ds = synth_dataset(3, 64, 10, 3);
  CHECK(ds.channels == 3);
  for (float v : ds.images) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("idx cache directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "wg_test_idx_cache";
  std::filesystem::remove_all(dir);
  auto ds = synth_dataset(5, 40);
  save_idx_dataset(ds, dir, "train");
  save_idx_dataset(ds, dir, "test");
  auto back = load_idx_dataset(dir, "train", 1, "t");
  CHECK(back.size() == ds.size());
  CHECK(back.labels == ds.labels);
  // u8 quantization: pixels within half a step
  for (size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(std::abs(back.images[i] - ds.images[i]) <= 0.5f / 255.0f + 1e-6f);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("subset is deterministic and preserves rows") {
  auto ds = synth_dataset(9, 60);
  auto s1 = subset(ds, 20, 1);
  auto s2 = subset(ds, 20, 1);
  CHECK(s1.images == s2.images);
  CHECK(s1.size() == 20);
}

TEST_SUITE_END();
