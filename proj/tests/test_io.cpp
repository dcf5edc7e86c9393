#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "weightgen/errors.hpp"
#include "weightgen/io.hpp"
#include "weightgen/rng.hpp"
#include "weightgen/zoo.hpp"

using namespace weightgen;

namespace {
const auto kDir = std::filesystem::temp_directory_path() / "wg_test_io";
}

TEST_SUITE_BEGIN("io");

TEST_CASE("wts round trip is bit exact") {
  std::filesystem::create_directories(kDir);
  auto net = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, 42);
  WeightVector v = net.to_vector();
  write_wts(kDir / "a.wts", v);
  WeightVector back = read_wts(kDir / "a.wts");
  CHECK(back.values == v.values);
  CHECK(back.layout->compatible(*v.layout));
  // re-serialization is byte-identical
  write_wts(kDir / "b.wts", back);
  std::ifstream f1(kDir / "a.wts", std::ios::binary), f2(kDir / "b.wts", std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("wts rejects a bad magic") {
  const auto path = kDir / "bad.wts";
  atomic_write(path, "NOPE....");
  CHECK_THROWS_AS(read_wts(path), FormatError);
}

TEST_CASE("wze round trip with sidecar") {
  RngStream rng(1);
  EmbeddingMatrix m;
  m.dim = 16;
  for (int i = 0; i < 5 * 16; ++i) m.rows.push_back(rng.uniform(-1, 1));
  write_wze(kDir / "e.wze", m, R"({"source":"test"})");
  auto back = read_wze(kDir / "e.wze");
  CHECK(back.dim == 16);
  CHECK(back.count() == 5);
  CHECK(back.rows == m.rows);
  CHECK(std::filesystem::exists(kDir / "e.wze.json"));
}

TEST_CASE("wza round trip preserves params in declared order") {
  BlobCheckpoint ckpt;
  ckpt.header_json = R"({"kind":"test","note":"fixture"})";
  RngStream rng(2);
  ckpt.add("enc.w", Tensor::rand_uniform({3, 4}, -1, 1, rng));
  ckpt.add("enc.b", Tensor::rand_uniform({3}, -1, 1, rng));
  write_wza(kDir / "c.wza", ckpt);
  auto back = read_wza(kDir / "c.wza");
  CHECK(back.param_names == std::vector<std::string>{"enc.w", "enc.b"});
  CHECK(back.get("enc.w") == ckpt.get("enc.w"));
  CHECK(back.shape_of("enc.w") == std::vector<int>{3, 4});
  CHECK_THROWS_AS(back.get("missing"), FormatError);
}

TEST_CASE("truncated wza payload is detected") {
  BlobCheckpoint ckpt;
  ckpt.add("p", Tensor::zeros({8}));
  write_wza(kDir / "t.wza", ckpt);
  std::ifstream in(kDir / "t.wza", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  bytes.resize(bytes.size() - 4);
  atomic_write(kDir / "t.wza", bytes);
  CHECK_THROWS_WITH_AS(read_wza(kDir / "t.wza"), doctest::Contains("truncated"), FormatError);
}

TEST_SUITE_END();
