#include <cmath>
#include <set>

#include "doctest.h"
#include "weightgen/codec.hpp"
#include "weightgen/datasets.hpp"
#include "weightgen/errors.hpp"
#include "weightgen/zoo.hpp"

using namespace weightgen;

namespace {

ConvNet random_net(uint64_t seed, int channels = 1) {
  return ConvNet::build(table3_spec(channels, Activation::Tanh), InitScheme::Uniform, seed, 0.1f);
}

}  // namespace

TEST_SUITE_BEGIN("codec");

TEST_CASE("table-3 layout extents and totals") {
  auto net = random_net(1);
  auto layout = net.layout();
  CHECK(layout->total == 2464);
  std::vector<int64_t> extents;
  for (const auto& l : layout->layers) extents.push_back(l.extent);
  CHECK(extents == std::vector<int64_t>{208, 1206, 100, 740, 210});
  CHECK(layout->token_count == 48);

  auto net3 = random_net(1, 3);
  CHECK(net3.layout()->total == 2864);
}

TEST_CASE("token raw dims match in_ch*k^2+1 / in_dim+1") {
  auto net = random_net(2);
  auto seq = tokenize(net.to_vector());
  CHECK(seq.count() == 48);
  std::vector<int> first_dim_per_layer(5, -1);
  for (int t = 0; t < seq.count(); ++t) {
    const int l = seq.token_layer[static_cast<size_t>(t)];
    if (first_dim_per_layer[static_cast<size_t>(l)] < 0) {
      first_dim_per_layer[static_cast<size_t>(l)] = seq.token_dim(t);
    }
  }
  CHECK(first_dim_per_layer == std::vector<int>{26, 201, 25, 37, 21});
}

TEST_CASE("flatten/unflatten round trip reproduces the forward pass bit-exactly") {
  auto net = random_net(3);
  auto ds = synth_dataset(11, 16);
  std::vector<int64_t> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  auto [x, y] = ds.batch(rows);
  Tensor before = net.forward(x);

  WeightVector v = net.to_vector();
  auto net2 = random_net(999);
  net2.load(v);
  Tensor after = net2.forward(x);
  for (size_t i = 0; i < static_cast<size_t>(before.numel()); ++i) {
    CHECK(before.values()[i] == after.values()[i]);
  }
}

TEST_CASE("tokenize/detokenize is an exact inverse") {
  auto net = random_net(4);
  WeightVector v = net.to_vector();
  WeightVector back = detokenize(tokenize(v));
  CHECK(back.values == v.values);
}

TEST_CASE("identity permutation leaves the vector unchanged") {
  auto net = random_net(5);
  WeightVector v = net.to_vector();
  std::vector<std::vector<int>> perms;
  for (size_t l = 0; l + 1 < v.layout->layers.size(); ++l) {
    std::vector<int> p(static_cast<size_t>(v.layout->layers[l].neuron_count));
    for (size_t i = 0; i < p.size(); ++i) p[i] = static_cast<int>(i);
    perms.push_back(std::move(p));
  }
  WeightVector out = permute_augment(v, perms);
  CHECK(out.values == v.values);
}

TEST_CASE("random permutations preserve the network function") {
  auto net = random_net(6);
  WeightVector v = net.to_vector();
  auto ds = synth_dataset(13, 64);
  std::vector<int64_t> rows(64);
  for (int64_t i = 0; i < 64; ++i) rows[static_cast<size_t>(i)] = i;
  auto [x, y] = ds.batch(rows);
  Tensor base = net.forward(x);

  RngStream rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    WeightVector p = permute_augment(v, rng);
    CHECK(p.values != v.values);  // non-identity with overwhelming probability
    double l2 = 0.0;
    for (size_t i = 0; i < p.values.size(); ++i) {
      const double d = static_cast<double>(p.values[i]) - v.values[i];
      l2 += d * d;
    }
    CHECK(l2 > 0.0);
    auto net2 = random_net(1000 + static_cast<uint64_t>(trial));
    net2.load(p);
    Tensor out = net2.forward(x);
    float max_diff = 0.0f;
    for (size_t i = 0; i < static_cast<size_t>(out.numel()); ++i) {
      max_diff = std::max(max_diff, std::abs(out.values()[i] - base.values()[i]));
    }
    CHECK(max_diff <= 1e-4f);
  }
}

TEST_CASE("erase augment zeroes exactly ceil(fraction * tokens) whole tokens") {
  auto net = random_net(7);
  WeightVector v = net.to_vector();

  RngStream rng(1);
  WeightVector unchanged = erase_augment(v, 0.0f, rng);
  CHECK(unchanged.values == v.values);

  RngStream rng2(2);
  WeightVector erased = erase_augment(v, 0.25f, rng2);
  auto seq_orig = tokenize(v);
  auto seq_erased = tokenize(erased);
  int zeroed = 0;
  for (int t = 0; t < seq_orig.count(); ++t) {
    bool all_zero = true;
    for (int64_t i = seq_erased.token_offset[static_cast<size_t>(t)];
         i < seq_erased.token_offset[static_cast<size_t>(t) + 1]; ++i) {
      if (seq_erased.values[static_cast<size_t>(i)] != 0.0f) all_zero = false;
    }
    if (all_zero) ++zeroed;
  }
  CHECK(zeroed == 12);  // ceil(0.25 * 48)

  // sparsity never increases
  int nonzero_orig = 0, nonzero_erased = 0;
  for (float x : v.values) nonzero_orig += x != 0.0f;
  for (float x : erased.values) nonzero_erased += x != 0.0f;
  CHECK(nonzero_erased <= nonzero_orig);
}

TEST_CASE("two erase seeds pick different sets") {
  auto net = random_net(8);
  WeightVector v = net.to_vector();
  RngStream a(100), b(200);
  CHECK(erase_augment(v, 0.25f, a).values != erase_augment(v, 0.25f, b).values);
}

TEST_CASE("layer stats hand example and degenerate floor") {
  auto layout = std::make_shared<LayerLayout>(
      make_layout({{LayerKind::Fc, {1, 1}}}));  // 1 weight + 1 bias per vector
  // Choose weight=bias per vector so the pooled set is {1,1,3,3}: mu=2,
  // sigma=1 as in the two-scalars-across-two-models example.
  WeightVector a{std::vector<float>{1.0f, 1.0f}, layout};
  WeightVector b{std::vector<float>{3.0f, 3.0f}, layout};
  auto stats = layer_stats({a, b});
  CHECK(stats.mu[0] == doctest::Approx(2.0f));
  CHECK(stats.sigma[0] == doctest::Approx(1.0f));

  auto degenerate = layer_stats({a, a});
  CHECK(degenerate.sigma[0] == doctest::Approx(1e-6f));
}

TEST_CASE("layer stats of z-scored data are 0/1 and order invariant") {
  auto net = random_net(9);
  std::vector<WeightVector> vecs;
  for (uint64_t s = 0; s < 6; ++s) {
    auto n = random_net(10 + s);
    vecs.push_back(n.to_vector());
  }
  auto stats = layer_stats(vecs);
  // z-score every layer and re-estimate
  std::vector<WeightVector> zs = vecs;
  for (auto& v : zs) {
    for (size_t l = 0; l < v.layout->layers.size(); ++l) {
      const auto& spec = v.layout->layers[l];
      for (int64_t i = spec.offset; i < spec.offset + spec.extent; ++i) {
        v.values[static_cast<size_t>(i)] =
            (v.values[static_cast<size_t>(i)] - stats.mu[l]) / stats.sigma[l];
      }
    }
  }
  auto zstats = layer_stats(zs);
  for (size_t l = 0; l < zstats.mu.size(); ++l) {
    CHECK(zstats.mu[l] == doctest::Approx(0.0f).epsilon(1e-3));
    CHECK(std::abs(zstats.sigma[l] - 1.0f) < 1e-3f);
  }

  std::vector<WeightVector> reversed(vecs.rbegin(), vecs.rend());
  auto rstats = layer_stats(reversed);
  for (size_t l = 0; l < rstats.mu.size(); ++l) {
    CHECK(rstats.mu[l] == doctest::Approx(stats.mu[l]));
    CHECK(rstats.sigma[l] == doctest::Approx(stats.sigma[l]));
  }
}

TEST_CASE("layer_stats requires two vectors") {
  auto net = random_net(12);
  CHECK_THROWS_AS(layer_stats({net.to_vector()}), InputError);
}

TEST_CASE("scale_layers rescales stored values and param_scale restores the function") {
  auto net = random_net(13);
  WeightVector v = net.to_vector();
  const std::vector<float> down = {1.0f, 1.0f, 0.1f, 0.1f, 1.0f};
  WeightVector scaled = scale_layers(v, down);

  auto ds = synth_dataset(21, 16);
  std::vector<int64_t> rows(16);
  for (int64_t i = 0; i < 16; ++i) rows[static_cast<size_t>(i)] = i;
  auto [x, y] = ds.batch(rows);
  Tensor base = net.forward(x);

  NetSpec spec = table3_spec(1, Activation::Tanh);
  spec.param_scale = {1.0f, 1.0f, 10.0f, 10.0f, 1.0f};
  auto net2 = ConvNet::build(spec, InitScheme::Uniform, 99);
  net2.load(scaled);
  Tensor out = net2.forward(x);
  for (size_t i = 0; i < static_cast<size_t>(out.numel()); ++i) {
    CHECK(out.values()[i] == doctest::Approx(base.values()[i]).epsilon(1e-5));
  }
}

TEST_SUITE_END();
