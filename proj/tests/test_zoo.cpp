#include <filesystem>

#include "doctest.h"
#include "weightgen/datasets.hpp"
#include "weightgen/io.hpp"
#include "weightgen/zoo.hpp"

using namespace weightgen;

TEST_SUITE_BEGIN("zoo");

TEST_CASE("table-3 parameter counts are exact") {
  auto net1 = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, 1);
  CHECK(net1.param_count() == 2464);
  auto net3 = ConvNet::build(table3_spec(3, Activation::Gelu), InitScheme::KaimingUniform, 1);
  CHECK(net3.param_count() == 2864);
}

TEST_CASE("conv parameter count formula matches direct enumeration") {
  // out_ch * (in_ch * k^2 + 1) per conv layer, out * (in + 1) per fc layer
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto net = ConvNet::build(spec, InitScheme::Uniform, 2);
  int64_t expected = 0;
  for (const auto& c : spec.convs) expected += static_cast<int64_t>(c.out_ch) * (c.in_ch * c.k * c.k + 1);
  for (const auto& [in, out] : spec.fcs) expected += static_cast<int64_t>(out) * (in + 1);
  int64_t enumerated = 0;
  for (const auto& [w, b] : net.main_params()) enumerated += w.numel() + b.numel();
  CHECK(enumerated == expected);
  CHECK(enumerated == net.param_count());
}

TEST_CASE("same seed gives identical initial weights") {
  auto a = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, 7);
  auto b = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, 7);
  CHECK(a.to_vector().values == b.to_vector().values);
  auto c = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, 8);
  CHECK(a.to_vector().values != c.to_vector().values);
}

TEST_CASE("unknown activation string is a config error") {
  CHECK_THROWS_AS(activation_from_string("swish"), ConfigError);
  CHECK_THROWS_AS(init_from_string("orthogonal"), ConfigError);
}

TEST_CASE("random init scores near guessing on balanced data") {
  auto ds = synth_dataset(31, 1000);
  double mean = 0.0;
  const int runs = 10;
  for (uint64_t s = 0; s < runs; ++s) {
    auto net = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, s);
    mean += evaluate_model(net.to_vector(), table3_spec(1, Activation::Tanh), ds);
  }
  mean /= runs;
  CHECK(mean >= 0.05);
  CHECK(mean <= 0.15);
}

TEST_CASE("all-zero weights give constant logits and ~10% accuracy") {
  auto net = ConvNet::build(table3_spec(1, Activation::Tanh), InitScheme::Uniform, 4);
  WeightVector zeros = net.to_vector();
  std::fill(zeros.values.begin(), zeros.values.end(), 0.0f);
  auto ds = synth_dataset(32, 1000);
  const double acc = evaluate_model(zeros, table3_spec(1, Activation::Tanh), ds);
  CHECK(acc >= 0.05);
  CHECK(acc <= 0.15);
}

TEST_CASE("zero-epoch training leaves only the init checkpoint") {
  ZooConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 16;
  auto train = synth_dataset(33, 64);
  auto test = synth_dataset(34, 64);
  auto run = train_model(table3_spec(1, cfg.activation), cfg, 5, train, test);
  CHECK(run.checkpoints.size() == 1);
  CHECK(run.checkpoints.front().first == 0);
  CHECK(run.epoch_accuracy.size() == 1);
  CHECK_FALSE(run.failed);
}

TEST_CASE("different seeds diverge after training") {
  ZooConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  auto train = synth_dataset(35, 128);
  auto test = synth_dataset(36, 64);
  auto a = train_model(table3_spec(1, cfg.activation), cfg, 1, train, test);
  auto b = train_model(table3_spec(1, cfg.activation), cfg, 2, train, test);
  double l2 = 0.0;
  const auto& va = a.checkpoints.back().second.values;
  const auto& vb = b.checkpoints.back().second.values;
  for (size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - vb[i];
    l2 += d * d;
  }
  CHECK(l2 > 0.0);
}

TEST_CASE("training is deterministic in the seed") {
  ZooConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  auto train = synth_dataset(37, 96);
  auto test = synth_dataset(38, 48);
  auto a = train_model(table3_spec(1, cfg.activation), cfg, 11, train, test);
  auto b = train_model(table3_spec(1, cfg.activation), cfg, 11, train, test);
  CHECK(a.checkpoints.back().second.values == b.checkpoints.back().second.values);
  CHECK(a.epoch_accuracy == b.epoch_accuracy);
}

TEST_CASE("generate_zoo writes manifest, splits and checkpoints") {
  const auto dir = std::filesystem::temp_directory_path() / "wg_test_zoo";
  std::filesystem::remove_all(dir);
  ZooConfig cfg;
  cfg.models = 10;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.checkpoint_epochs = {0, 1};
  auto train = synth_dataset(39, 96);
  auto test = synth_dataset(40, 48);
  auto manifest = generate_zoo(cfg, dir, train, test);
  CHECK(manifest.models.size() == 10);

  int n_train = 0, n_val = 0, n_test = 0;
  for (const auto& m : manifest.models) {
    CHECK_FALSE(m.failed);
    if (m.split == "train") ++n_train;
    if (m.split == "val") ++n_val;
    if (m.split == "test") ++n_test;
    for (const auto& ck : m.checkpoints) {
      CHECK(std::filesystem::exists(dir / ck.path));
      CHECK(ck.test_accuracy >= 0.0);
      CHECK(ck.test_accuracy <= 1.0);
    }
  }
  CHECK(n_train + n_val + n_test == 10);
  CHECK(n_train == 7);

  // manifest round trip
  auto back = read_manifest(dir);
  CHECK(back.models.size() == manifest.models.size());
  CHECK(back.config.models == cfg.models);

  // recorded accuracy equals re-evaluation of the stored checkpoint
  const auto& m0 = manifest.models.front();
  const auto& ck = m0.checkpoints.back();
  WeightVector v = read_wts(dir / ck.path);
  const double acc = evaluate_model(v, spec_from_zoo_config(cfg), test);
  CHECK(acc == doctest::Approx(ck.test_accuracy));

  auto loaded = load_split_vectors(dir, manifest, "train");
  CHECK(loaded.vectors.size() == static_cast<size_t>(n_train * 2));

  std::filesystem::remove_all(dir);
}

TEST_CASE("4-conv and skip variants build, run and stay within budget") {
  auto ds = synth_dataset(41, 16);
  std::vector<int64_t> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  auto [x, y] = ds.batch(rows);

  auto four = ConvNet::build(four_conv_spec(1, Activation::Tanh, false), InitScheme::Uniform, 1);
  CHECK(four.param_count() <= 2464);
  CHECK(four.forward(x).shape() == std::vector<int>{8, 10});

  auto four_id = ConvNet::build(four_conv_spec(1, Activation::Tanh, true), InitScheme::Uniform, 1);
  CHECK(four_id.forward(x).shape() == std::vector<int>{8, 10});
  CHECK(four_id.param_count() == four.param_count());

  auto res = ConvNet::build(table3_res_skip_spec(1, Activation::Tanh), InitScheme::Uniform, 1);
  CHECK(res.forward(x).shape() == std::vector<int>{8, 10});
  // skip convs add parameters beyond the main-path layout
  CHECK(res.all_params().size() > four.all_params().size());
}

TEST_SUITE_END();
