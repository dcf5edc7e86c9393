#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "weightgen/evalharness.hpp"

using namespace weightgen;

namespace {

AeConfig small_ae_config() {
  AeConfig cfg;
  cfg.d_token = 16;
  cfg.d_hidden = 32;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_z = 12;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  return cfg;
}

HyperAe table3_ae(const std::vector<WeightVector>& vectors) {
  return HyperAe::build(small_ae_config(), vectors.front().layout, layer_stats(vectors));
}

}  // namespace

TEST_SUITE_BEGIN("evalharness");

TEST_CASE("eval_population: duplicates score identically, small sets are rejected") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 12, 100);
  vectors[5] = vectors[4];  // duplicate
  auto test = synth_dataset(61, 400, 10, 1, "test");
  auto result = eval_population(vectors, spec, test, "init");
  CHECK(result.trajectories[4][0] == result.trajectories[5][0]);
  CHECK(result.at_epoch(0).size() == 12);

  std::vector<WeightVector> few(vectors.begin(), vectors.begin() + 5);
  CHECK_THROWS_AS(eval_population(few, spec, test, "init"), InputError);
}

TEST_CASE("random-init population scores near guessing on balanced data") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 20, 300);
  auto test = synth_dataset(62, 1000, 10, 1, "test");
  auto result = eval_population(vectors, spec, test, "init");
  const double mean = mean_of(result.at_epoch(0));
  CHECK(mean > 0.05);
  CHECK(mean < 0.15);
}

TEST_CASE("report statistics are invariant to model ordering") {
  PopulationResult a;
  a.method = "m";
  for (int i = 0; i < 12; ++i) {
    a.seeds.push_back(static_cast<uint64_t>(i));
    a.trajectories.push_back({0.1 + 0.05 * i});
    a.failed.push_back(false);
  }
  PopulationResult b = a;
  std::reverse(b.trajectories.begin(), b.trajectories.end());
  auto ra = make_report(a, 7);
  auto rb = make_report(b, 7);
  CHECK(ra.per_epoch[0].stats.mean == doctest::Approx(rb.per_epoch[0].stats.mean));
  CHECK(ra.per_epoch[0].stats.median == doctest::Approx(rb.per_epoch[0].stats.median));
  CHECK(ra.per_epoch[0].stats.ci_low == doctest::Approx(rb.per_epoch[0].stats.ci_low));
}

TEST_CASE("finetune epoch-0 entry matches eval_population") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 10, 500);
  auto train = synth_dataset(63, 200, 10, 1, "train");
  auto test = synth_dataset(63, 200, 10, 1, "test");
  ZooConfig hyper;
  apply_dataset_defaults(hyper);
  auto ft = finetune_population(vectors, spec, hyper, 1, train, test, "warm", 900);
  auto ep0 = eval_population(vectors, spec, test, "init");
  for (size_t i = 0; i < vectors.size(); ++i) {
    CHECK(ft.result.trajectories[i][0] == doctest::Approx(ep0.trajectories[i][0]));
    CHECK(ft.result.trajectories[i].size() == 2);
  }
}

TEST_CASE("ensembles of identical members equal the member accuracy") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto one = random_population(spec, InitScheme::Uniform, 1, 700);
  std::vector<WeightVector> same(8, one[0]);
  auto test = synth_dataset(64, 300, 10, 1, "test");
  auto ens = ensemble_eval(same, spec, test, {1, 4}, 3, 11);
  const double single = evaluate_model(one[0], spec, test);
  CHECK(ens.at(1) == doctest::Approx(single));
  CHECK(ens.at(4) == doctest::Approx(single));
}

TEST_CASE("size-1 ensembles over the full population converge to the mean accuracy") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 12, 800);
  auto test = synth_dataset(65, 300, 10, 1, "test");
  auto result = eval_population(vectors, spec, test, "init");
  const double pop_mean = mean_of(result.at_epoch(0));
  auto ens = ensemble_eval(vectors, spec, test, {1}, 240, 13);
  CHECK(std::abs(ens.at(1) - pop_mean) <= 0.01);
}

TEST_CASE("ensemble sizes above the population are rejected") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 4, 900);
  auto test = synth_dataset(66, 100, 10, 1, "test");
  CHECK_THROWS_AS(ensemble_eval(vectors, spec, test, {5}, 2, 1), InputError);
}

TEST_CASE("redistribution: identity is exact, 4-conv copies the prefix") {
  const NetSpec source_spec = table3_spec(1, Activation::Tanh);
  auto source = random_population(source_spec, InitScheme::Uniform, 1, 1000)[0];

  auto same = redistribute_weights(source, source_spec);
  CHECK(same.values == source.values);

  const NetSpec target = four_conv_spec(1, Activation::Tanh, false);
  auto redist = redistribute_weights(source, target);
  CHECK(redist.size() < source.size());
  for (size_t i = 0; i < redist.values.size(); ++i) {
    CHECK(redist.values[i] == source.values[i]);
  }

  // the reverse direction would need more values than the source has
  WeightVector small = redist;
  CHECK_THROWS_AS(redistribute_weights(small, source_spec), InputError);
}

TEST_CASE("geometry: equal embeddings give zero cosine distance, orthogonal give one") {
  EmbeddingMatrix equal;
  equal.dim = 4;
  for (int i = 0; i < 5; ++i) {
    equal.rows.insert(equal.rows.end(), {0.5f, -0.5f, 0.5f, -0.5f});
  }
  auto g = analyze_geometry(equal);
  for (double dcos : g.cosine_distances) CHECK(dcos == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(g.norms[0] == doctest::Approx(1.0));

  EmbeddingMatrix ortho;
  ortho.dim = 3;
  ortho.rows = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  auto g2 = analyze_geometry(ortho);
  for (double dcos : g2.cosine_distances) CHECK(dcos == doctest::Approx(1.0));
  CHECK(g2.per_dim_all.size() == 3);
}

TEST_CASE("geometry subsamples pair counts beyond the cap") {
  RngStream rng(5);
  EmbeddingMatrix m;
  m.dim = 2;
  for (int i = 0; i < 300; ++i) {
    m.rows.push_back(rng.uniform(-1, 1));
    m.rows.push_back(rng.uniform(-1, 1));
  }
  auto g = analyze_geometry(m, {}, 20, 1000, 3);
  CHECK(g.cosine_distances.size() == 1000);
}

TEST_CASE("smoothness endpoints reproduce the decoded accuracies exactly") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 4, 1100);
  HyperAe ae = table3_ae(vectors);
  auto test = synth_dataset(67, 200, 10, 1, "test");

  Embedding za = ae.encode(vectors[0]);
  Embedding zb = ae.encode(vectors[1]);
  auto interp = smoothness_interpolation(ae, {{za, zb}}, 5, spec, test);
  const double acc_a = evaluate_model(ae.decode(za), spec, test);
  const double acc_b = evaluate_model(ae.decode(zb), spec, test);
  CHECK(interp.pair_accuracy[0].front() == doctest::Approx(acc_a));
  CHECK(interp.pair_accuracy[0].back() == doctest::Approx(acc_b));
  CHECK(interp.ts.front() == 0.0);
  CHECK(interp.ts.back() == 1.0);
}

TEST_CASE("robustness at level zero equals reconstruction evaluation") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vectors = random_population(spec, InitScheme::Uniform, 6, 1200);
  HyperAe ae = table3_ae(vectors);
  auto test = synth_dataset(68, 200, 10, 1, "test");

  WeightVector mean_vec;
  mean_vec.layout = vectors[0].layout;
  mean_vec.values.assign(vectors[0].values.size(), 0.0f);
  for (const auto& v : vectors) {
    for (size_t i = 0; i < v.values.size(); ++i) {
      mean_vec.values[i] += v.values[i] / static_cast<float>(vectors.size());
    }
  }
  EmbeddingMatrix anchors = ae.encode_batch(vectors);
  std::vector<double> levels = {0.0};
  auto sweep = robustness_sweep(ae, vectors, anchors, levels, spec, test, mean_vec, 5);

  auto recon = ae.decode_batch(anchors);
  std::vector<double> accs;
  for (const auto& r : recon) accs.push_back(evaluate_model(r, spec, test));
  CHECK(sweep[0].mean_accuracy == doctest::Approx(mean_of(accs)));
  CHECK(sweep[0].r2 == doctest::Approx(r_squared(recon, vectors, mean_vec)));
}

TEST_CASE("weight distance tracking: identical trajectories, then a known offset") {
  const NetSpec spec = table3_spec(1, Activation::Tanh);
  auto vs = random_population(spec, InitScheme::Uniform, 2, 1300);
  WeightTrajectory a;
  a.weights = {vs[0], vs[0]};
  a.accuracy = {0.5, 0.6};
  auto same = weight_distance_tracking(a, a);
  for (const auto& p : same) {
    CHECK(p.l2_distance == doctest::Approx(0.0));
    CHECK(p.accuracy_gap == doctest::Approx(0.0));
  }

  WeightTrajectory b = a;
  b.weights[0] = vs[1];
  b.accuracy[0] = 0.4;
  auto diff = weight_distance_tracking(a, b);
  double expect = 0.0;
  for (size_t i = 0; i < vs[0].values.size(); ++i) {
    expect += std::pow(static_cast<double>(vs[0].values[i]) - vs[1].values[i], 2.0);
  }
  CHECK(diff[0].l2_distance == doctest::Approx(std::sqrt(expect)));
  CHECK(diff[0].accuracy_gap == doctest::Approx(0.1));
}

TEST_CASE("population csv and report json are written") {
  PopulationResult r;
  r.method = "kde30";
  r.seeds = {1, 2};
  r.trajectories = {{0.1, 0.5}, {0.2, 0.6}};
  r.failed = {false, false};
  const auto dir = std::filesystem::temp_directory_path() / "wg_test_reports";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_population_csv(dir / "kde30.csv", r);
  auto report = make_report(r, 3);
  report.tests.push_back({"kde30_vs_bt", 0.01, 0.9});
  write_report_json(dir / "kde30.json", report);
  CHECK(std::filesystem::exists(dir / "kde30.csv"));
  CHECK(std::filesystem::exists(dir / "kde30.json"));
  std::ifstream in(dir / "kde30.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "method,seed,epoch,accuracy,failed");
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
