#include <cmath>

#include "doctest.h"
#include "gradcheck_cases.hpp"
#include "weightgen/nn.hpp"
#include "weightgen/parallel.hpp"
#include "weightgen/ops.hpp"
#include "weightgen/optim.hpp"
#include "weightgen/rng.hpp"
#include "weightgen/tensor.hpp"

using namespace weightgen;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("matmul identity leaves the matrix unchanged") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor id = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor out = matmul(a, id);
  auto v = out.values();
  CHECK(v[0] == doctest::Approx(1));
  CHECK(v[1] == doctest::Approx(2));
  CHECK(v[2] == doctest::Approx(3));
  CHECK(v[3] == doctest::Approx(4));
}

TEST_CASE("conv2d of all-ones 2x2 kernel over all-ones 2x2 input sums to 4") {
  Tensor x = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor b = Tensor::zeros({1});
  Tensor out = conv2d(x, w, b, 1, 0);
  CHECK(out.shape() == std::vector<int>{1, 1, 1, 1});
  CHECK(out.values()[0] == doctest::Approx(4.0f));
}

TEST_CASE("conv2d output shape follows floor((in + 2p - k)/s) + 1") {
  RngStream rng(7);
  Tensor x = Tensor::rand_uniform({1, 1, 11, 11}, -1, 1, rng);
  Tensor w = Tensor::rand_uniform({2, 1, 3, 3}, -1, 1, rng);
  Tensor b = Tensor::zeros({2});
  CHECK(conv2d(x, w, b, 2, 1).shape() == std::vector<int>{1, 2, 6, 6});
  CHECK(conv2d(x, w, b, 3, 0).shape() == std::vector<int>{1, 2, 3, 3});
}

TEST_CASE("maxpool2d picks the block maximum") {
  Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor out = maxpool2d(x, 2);
  CHECK(out.numel() == 1);
  CHECK(out.values()[0] == doctest::Approx(4.0f));
}

TEST_CASE("shape mismatch reports both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), ShapeError);
  CHECK_THROWS_WITH_AS(matmul(a, a), doctest::Contains("[2,3]"), ShapeError);
}

TEST_CASE("d(x^2)/dx at x=3 is 6 and constants have zero gradient") {
  Tensor x = Tensor::from({1}, {3.0f}, true);
  Tensor y = mul(x, x);
  backward(y);
  CHECK(x.grad_values()[0] == doctest::Approx(6.0f));

  Tensor x2 = Tensor::from({1}, {3.0f}, true);
  Tensor c = Tensor::from({1}, {5.0f});
  Tensor z = add(mul(x2, Tensor::zeros({1})), c);
  backward(z);
  CHECK(x2.grad_values()[0] == doctest::Approx(0.0f));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = Tensor::from({2}, {1.0f, 2.0f}, true);
  Tensor y = add(x, x);
  CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("finite-difference oracle passes for every op across seeds") {
  size_t fixtures = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    for (auto& c : gradcheck::make_cases(seed)) {
      auto res = gradcheck::evaluate(c);
      INFO(res.detail);
      CHECK(res.ok);
      ++fixtures;
    }
  }
  CHECK(fixtures >= 100);
}

TEST_CASE("softmax rows sum to one within 1e-6") {
  RngStream rng(11);
  Tensor x = Tensor::rand_uniform({8, 10}, -4, 4, rng);
  Tensor p = softmax_rows(x);
  for (int r = 0; r < 8; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 10; ++c) sum += p.values()[static_cast<size_t>(r * 10 + c)];
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  Tensor p = Tensor::from({3}, {1.0f, -2.0f, 0.5f}, true);
  Adam opt({p}, {.lr = 0.1f});
  p.impl()->ensure_grad();
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(1.0f));
  CHECK(p.values()[1] == doctest::Approx(-2.0f));
  CHECK(p.values()[2] == doctest::Approx(0.5f));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam first step collapses to -lr * sign(g)") {
  Tensor p = Tensor::from({1}, {0.0f}, true);
  Adam opt({p}, {.lr = 0.1f});
  p.impl()->ensure_grad();
  (*p.impl()->grad)[0] = 2.0f;
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(-0.1f).epsilon(1e-4));
}

TEST_CASE("adam second step with equal gradients does not grow the update") {
  Tensor p = Tensor::from({1}, {0.0f}, true);
  Adam opt({p}, {.lr = 0.05f});
  p.impl()->ensure_grad();
  (*p.impl()->grad)[0] = 0.7f;
  opt.step();
  const float u1 = std::abs(p.values()[0] - 0.0f);
  const float x1 = p.values()[0];
  (*p.impl()->grad)[0] = 0.7f;
  opt.step();
  const float u2 = std::abs(p.values()[0] - x1);
  CHECK(u2 <= u1 + 1e-6f);
}

TEST_CASE("adam names the parameter carrying a NaN gradient") {
  Tensor p = Tensor::from({1}, {0.0f}, true);
  Adam opt({p}, {.lr = 0.1f}, {"conv1.w"});
  p.impl()->ensure_grad();
  (*p.impl()->grad)[0] = std::nanf("");
  CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("conv1.w"), NumericError);
}

TEST_CASE("mse examples") {
  Tensor x = Tensor::from({2}, {1.0f, 3.0f});
  CHECK(mse_loss(x, x).value() == doctest::Approx(0.0f));
  Tensor y = Tensor::from({2}, {2.0f, 5.0f});
  CHECK(mse_loss(x, y).value() == doctest::Approx(2.5f));
}

TEST_CASE("cross entropy of uniform logits is ln(num_classes)") {
  Tensor logits = Tensor::zeros({1, 10});
  CHECK(cross_entropy_logits(logits, {3}).value() == doctest::Approx(std::log(10.0)).epsilon(1e-5));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Tensor logits = Tensor::zeros({1, 10});
  CHECK_THROWS_AS(cross_entropy_logits(logits, {10}), InputError);
  CHECK_THROWS_AS(cross_entropy_logits(logits, {-1}), InputError);
}

TEST_CASE("identical seeds give identical dropout masks and initializations") {
  auto draw = [](uint64_t seed) {
    RngStream rng(seed);
    auto sub = rng.fork("init");
    Tensor w = Tensor::rand_uniform({4, 4}, -1, 1, sub);
    auto drng = rng.fork("dropout");
    Tensor x = Tensor::full({4, 4}, 1.0f);
    Tensor d = dropout(x, 0.4f, drng, true);
    std::vector<float> all(w.values().begin(), w.values().end());
    all.insert(all.end(), d.values().begin(), d.values().end());
    return all;
  };
  CHECK(draw(99) == draw(99));
  CHECK(draw(99) != draw(100));
}

TEST_CASE("dropout uses inverted scaling in train mode and is identity in eval") {
  RngStream rng(5);
  Tensor x = Tensor::full({1000}, 1.0f);
  Tensor d = dropout(x, 0.25f, rng, true);
  int kept = 0;
  for (float v : d.values()) {
    if (v != 0.0f) {
      CHECK(v == doctest::Approx(1.0f / 0.75f));
      ++kept;
    }
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
  RngStream rng2(5);
  Tensor e = dropout(x, 0.25f, rng2, false);
  CHECK(e.values()[0] == doctest::Approx(1.0f));
}

TEST_CASE("assert_finite flags NaN propagation") {
  Tensor x = Tensor::from({2}, {1.0f, std::nanf("")});
  CHECK_THROWS_WITH_AS(x.assert_finite("activations"), doctest::Contains("activations"),
                       NumericError);
}

TEST_CASE("parallel matmul matches single-threaded result bit-exactly") {
  RngStream rng(21);
  Tensor a = Tensor::rand_uniform({64, 96}, -1, 1, rng);
  Tensor b = Tensor::rand_uniform({96, 80}, -1, 1, rng);
  set_max_threads(1);
  Tensor c1 = matmul(a, b);
  set_max_threads(0);
  Tensor c2 = matmul(a, b);
  for (size_t i = 0; i < static_cast<size_t>(c1.numel()); ++i) {
    CHECK(c1.values()[i] == c2.values()[i]);
  }
}

TEST_SUITE_END();
