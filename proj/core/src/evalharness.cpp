#include "weightgen/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "weightgen/errors.hpp"
#include "weightgen/io.hpp"
#include "weightgen/ops.hpp"
#include "weightgen/optim.hpp"
#include "weightgen/parallel.hpp"

namespace weightgen {

int PopulationResult::epochs() const {
  int e = 0;
  for (size_t i = 0; i < trajectories.size(); ++i) {
    if (!failed[i]) e = std::max(e, static_cast<int>(trajectories[i].size()) - 1);
  }
  return e;
}

std::vector<double> PopulationResult::at_epoch(int epoch) const {
  std::vector<double> out;
  for (size_t i = 0; i < trajectories.size(); ++i) {
    if (failed[i]) continue;
    if (epoch < static_cast<int>(trajectories[i].size())) {
      out.push_back(trajectories[i][static_cast<size_t>(epoch)]);
    }
  }
  return out;
}

EvalReport make_report(const PopulationResult& result, uint64_t bootstrap_seed) {
  EvalReport report;
  report.method = result.method;
  for (int e = 0; e <= result.epochs(); ++e) {
    auto values = result.at_epoch(e);
    if (values.empty()) continue;
    EvalReport::EpochStats es;
    es.epoch = e;
    es.stats = summarize(values, bootstrap_seed + static_cast<uint64_t>(e));
    report.per_epoch.push_back(std::move(es));
  }
  return report;
}

void write_population_csv(const std::filesystem::path& path, const PopulationResult& result) {
  std::string out = "method,seed,epoch,accuracy,failed\n";
  for (size_t m = 0; m < result.trajectories.size(); ++m) {
    for (size_t e = 0; e < result.trajectories[m].size(); ++e) {
      out += result.method + "," + std::to_string(result.seeds[m]) + "," + std::to_string(e) +
             "," + std::to_string(result.trajectories[m][e]) + "," +
             (result.failed[m] ? "1" : "0") + "\n";
    }
  }
  atomic_write(path, out);
}

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  nlohmann::json per_epoch = nlohmann::json::array();
  for (const auto& es : report.per_epoch) {
    per_epoch.push_back({{"epoch", es.epoch},
                         {"mean", es.stats.mean},
                         {"stddev", es.stats.stddev},
                         {"median", es.stats.median},
                         {"ci_low", es.stats.ci_low},
                         {"ci_high", es.stats.ci_high}});
  }
  j["per_epoch"] = std::move(per_epoch);
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : report.tests) {
    tests.push_back({{"label", t.label}, {"p_value", t.p_value}, {"cles", t.cles}});
  }
  j["tests"] = std::move(tests);
  atomic_write(path, j.dump(2));
}

PopulationResult eval_population(const std::vector<WeightVector>& vectors, const NetSpec& spec,
                                 const ImageDataset& test, const std::string& method) {
  if (vectors.size() < 10) {
    throw InputError("eval_population: need at least 10 vectors for statistics, got " +
                     std::to_string(vectors.size()));
  }
  PopulationResult result;
  result.method = method;
  result.seeds.resize(vectors.size());
  result.trajectories.assign(vectors.size(), {});
  result.failed.assign(vectors.size(), false);
  std::vector<double> accs(vectors.size());
  parallel_tasks(static_cast<int64_t>(vectors.size()), [&](int64_t i) {
    accs[static_cast<size_t>(i)] = evaluate_model(vectors[static_cast<size_t>(i)], spec, test);
  });
  for (size_t i = 0; i < vectors.size(); ++i) {
    result.seeds[i] = static_cast<uint64_t>(i);
    result.trajectories[i] = {accs[i]};
  }
  return result;
}

FinetuneOutput finetune_population(const std::vector<WeightVector>& vectors, const NetSpec& spec,
                                   const ZooConfig& hyper, int epochs, const ImageDataset& train,
                                   const ImageDataset& test, const std::string& method,
                                   uint64_t seed_base, bool record_weights) {
  if (epochs < 1) throw InputError("finetune_population: epochs must be >= 1");
  FinetuneOutput out;
  out.result.method = method;
  out.result.seeds.resize(vectors.size());
  out.result.trajectories.assign(vectors.size(), {});
  out.result.failed.assign(vectors.size(), false);
  if (record_weights) out.weight_trajectories.resize(vectors.size());

  ZooConfig cfg = hyper;
  cfg.epochs = epochs;
  cfg.checkpoint_epochs.clear();
  for (int e = 0; e <= epochs; ++e) cfg.checkpoint_epochs.push_back(e);

  parallel_tasks(static_cast<int64_t>(vectors.size()), [&](int64_t i) {
    const uint64_t seed = seed_base + static_cast<uint64_t>(i);
    // Same training path as the zoo, but starting from the given vector.
    ConvNet net = ConvNet::build(spec, cfg.init, seed, cfg.uniform_range);
    net.load(vectors[static_cast<size_t>(i)]);
    // Re-flatten so train_model's init is the warm start.
    TrainedModel run = [&] {
      ZooConfig warm = cfg;
      TrainedModel r;
      r.seed = seed;
      AdamConfig adam_cfg;
      adam_cfg.lr = warm.lr;
      adam_cfg.weight_decay = warm.weight_decay;
      Adam opt(net.all_params(), adam_cfg, net.param_names());
      RngStream root(seed);
      std::vector<int64_t> order(static_cast<size_t>(train.size()));
      for (int64_t t = 0; t < train.size(); ++t) order[static_cast<size_t>(t)] = t;
      r.epoch_accuracy.push_back(evaluate_model(net.to_vector(), spec, test));
      r.checkpoints.emplace_back(0, net.to_vector());
      for (int epoch = 1; epoch <= warm.epochs; ++epoch) {
        auto erng = root.fork("epoch" + std::to_string(epoch));
        erng.shuffle(order);
        bool nan_hit = false;
        for (int64_t start = 0; start < train.size(); start += warm.batch_size) {
          const int64_t end = std::min<int64_t>(start + warm.batch_size, train.size());
          auto [x, y] = train.batch(std::span<const int64_t>(order.data() + start,
                                                             static_cast<size_t>(end - start)));
          Tensor logits = net.forward(x);
          Tensor loss = cross_entropy_logits(logits, y);
          if (!std::isfinite(loss.value())) {
            nan_hit = true;
            break;
          }
          opt.zero_grad();
          backward(loss);
          opt.step();
        }
        if (nan_hit) {
          r.failed = true;
          break;
        }
        r.epoch_accuracy.push_back(evaluate_model(net.to_vector(), spec, test));
        r.checkpoints.emplace_back(epoch, net.to_vector());
      }
      return r;
    }();

    out.result.seeds[static_cast<size_t>(i)] = seed;
    out.result.failed[static_cast<size_t>(i)] = run.failed;
    out.result.trajectories[static_cast<size_t>(i)] = run.epoch_accuracy;
    if (record_weights) {
      auto& traj = out.weight_trajectories[static_cast<size_t>(i)];
      for (auto& [e, w] : run.checkpoints) traj.push_back(std::move(w));
    }
  });
  return out;
}

std::vector<WeightVector> random_population(const NetSpec& spec, InitScheme init, int n,
                                            uint64_t seed_base, float uniform_range) {
  std::vector<WeightVector> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(
        ConvNet::build(spec, init, seed_base + static_cast<uint64_t>(i), uniform_range).to_vector());
  }
  return out;
}

std::map<int, double> ensemble_eval(const std::vector<WeightVector>& vectors, const NetSpec& spec,
                                    const ImageDataset& test, const std::vector<int>& sizes,
                                    int trials, uint64_t seed) {
  for (int s : sizes) {
    if (s <= 0 || s > static_cast<int>(vectors.size())) {
      throw InputError("ensemble_eval: size " + std::to_string(s) + " exceeds population " +
                       std::to_string(vectors.size()));
    }
  }
  // Cache per-model softmax outputs once; ensembles then average rows.
  std::vector<std::vector<float>> probs(vectors.size());
  parallel_tasks(static_cast<int64_t>(vectors.size()), [&](int64_t i) {
    probs[static_cast<size_t>(i)] = model_softmax(vectors[static_cast<size_t>(i)], spec, test);
  });
  const int64_t n_rows = test.size();
  const int classes = test.num_classes;

  RngStream root(seed);
  std::map<int, double> out;
  std::vector<int> ids(vectors.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  std::vector<double> mix(static_cast<size_t>(n_rows) * classes);
  for (int size : sizes) {
    double mean_acc = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      auto trng = root.fork("size" + std::to_string(size) + "/trial" + std::to_string(trial));
      trng.shuffle(ids);
      std::fill(mix.begin(), mix.end(), 0.0);
      for (int m = 0; m < size; ++m) {
        const auto& p = probs[static_cast<size_t>(ids[static_cast<size_t>(m)])];
        for (size_t j = 0; j < mix.size(); ++j) mix[j] += p[j];
      }
      int64_t correct = 0;
      for (int64_t r = 0; r < n_rows; ++r) {
        const double* row = mix.data() + static_cast<size_t>(r) * classes;
        int best = 0;
        for (int c = 1; c < classes; ++c) {
          if (row[c] > row[best]) best = c;
        }
        if (best == test.labels[static_cast<size_t>(r)]) ++correct;
      }
      mean_acc += static_cast<double>(correct) / static_cast<double>(n_rows);
    }
    out[size] = mean_acc / trials;
  }
  return out;
}

UnseenZooResult unseen_zoo_eval(const HyperAe& ae, const std::vector<WeightVector>& zoo_vectors,
                                const NetSpec& spec, const ImageDataset& test, int ensemble_size,
                                int trials, uint64_t seed) {
  if (zoo_vectors.empty()) throw InputError("unseen_zoo_eval: empty vector set");
  auto zs = ae.encode_batch(zoo_vectors);
  auto decoded = ae.decode_batch(zs);
  std::vector<double> accs(decoded.size());
  parallel_tasks(static_cast<int64_t>(decoded.size()), [&](int64_t i) {
    accs[static_cast<size_t>(i)] = evaluate_model(decoded[static_cast<size_t>(i)], spec, test);
  });
  UnseenZooResult res;
  res.single_mean = mean_of(accs);
  res.single_max = *std::max_element(accs.begin(), accs.end());
  if (ensemble_size > static_cast<int>(decoded.size())) {
    ensemble_size = static_cast<int>(decoded.size());
  }
  std::vector<double> ens_accs;
  RngStream root(seed);
  for (int t = 0; t < trials; ++t) {
    std::vector<int> ids(decoded.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    auto trng = root.fork("trial" + std::to_string(t));
    trng.shuffle(ids);
    std::vector<WeightVector> members;
    for (int m = 0; m < ensemble_size; ++m) {
      members.push_back(decoded[static_cast<size_t>(ids[static_cast<size_t>(m)])]);
    }
    auto e = ensemble_eval(members, spec, test, {ensemble_size}, 1,
                           seed + 1000 + static_cast<uint64_t>(t));
    ens_accs.push_back(e.at(ensemble_size));
  }
  res.ensemble_mean = mean_of(ens_accs);
  res.ensemble_max = *std::max_element(ens_accs.begin(), ens_accs.end());
  return res;
}

WeightVector redistribute_weights(const WeightVector& source, const NetSpec& target_spec) {
  if (!source.layout) throw LayoutError("redistribute: source has no layout");
  ConvNet probe = ConvNet::build(target_spec, InitScheme::Uniform, 0);
  auto target_layout = probe.layout();
  if (target_layout->total > source.size()) {
    throw InputError("redistribute: target needs " + std::to_string(target_layout->total) +
                     " values but the source has " + std::to_string(source.size()));
  }
  WeightVector out;
  out.layout = target_layout;
  out.values.assign(source.values.begin(), source.values.begin() + target_layout->total);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding analyses
// ---------------------------------------------------------------------------

Histogram make_histogram(std::span<const double> values, int bins) {
  Histogram h;
  if (values.empty()) return h;
  h.lo = *std::min_element(values.begin(), values.end());
  h.hi = *std::max_element(values.begin(), values.end());
  if (h.hi == h.lo) h.hi = h.lo + 1e-12;
  h.counts.assign(static_cast<size_t>(bins), 0);
  for (double v : values) {
    auto idx = static_cast<int64_t>((v - h.lo) / (h.hi - h.lo) * bins);
    idx = std::clamp<int64_t>(idx, 0, bins - 1);
    ++h.counts[static_cast<size_t>(idx)];
  }
  return h;
}

GeometryAnalysis analyze_geometry(const EmbeddingMatrix& embeddings,
                                  std::span<const double> accuracies, int bins, int64_t max_pairs,
                                  uint64_t seed) {
  const int64_t m = embeddings.count();
  if (m < 2) throw InputError("analyze_geometry: need at least 2 embeddings");
  const int d = embeddings.dim;
  GeometryAnalysis out;

  out.norms.resize(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const float* row = embeddings.rows.data() + i * d;
    for (int t = 0; t < d; ++t) acc += static_cast<double>(row[t]) * row[t];
    out.norms[static_cast<size_t>(i)] = std::sqrt(acc);
  }

  const int64_t total_pairs = m * (m - 1) / 2;
  RngStream rng(seed);
  auto cosine_distance = [&](int64_t i, int64_t j) {
    const float* a = embeddings.rows.data() + i * d;
    const float* b = embeddings.rows.data() + j * d;
    double dot = 0.0;
    for (int t = 0; t < d; ++t) dot += static_cast<double>(a[t]) * b[t];
    const double na = out.norms[static_cast<size_t>(i)], nb = out.norms[static_cast<size_t>(j)];
    return na > 0 && nb > 0 ? 1.0 - dot / (na * nb) : 1.0;
  };
  if (total_pairs <= max_pairs) {
    out.cosine_distances.reserve(static_cast<size_t>(total_pairs));
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = i + 1; j < m; ++j) out.cosine_distances.push_back(cosine_distance(i, j));
    }
  } else {
    out.cosine_distances.reserve(static_cast<size_t>(max_pairs));
    for (int64_t s = 0; s < max_pairs; ++s) {
      const int64_t i = static_cast<int64_t>(rng.below(static_cast<uint64_t>(m)));
      int64_t j = static_cast<int64_t>(rng.below(static_cast<uint64_t>(m - 1)));
      if (j >= i) ++j;
      out.cosine_distances.push_back(cosine_distance(i, j));
    }
  }

  out.norm_hist = make_histogram(out.norms, bins);
  out.cosine_hist = make_histogram(out.cosine_distances, bins);

  std::vector<double> column(static_cast<size_t>(m));
  for (int t = 0; t < d; ++t) {
    for (int64_t i = 0; i < m; ++i) {
      column[static_cast<size_t>(i)] = embeddings.rows[static_cast<size_t>(i) * d + t];
    }
    out.per_dim_all.push_back(make_histogram(column, bins));
  }
  if (!accuracies.empty()) {
    if (static_cast<int64_t>(accuracies.size()) != m) {
      throw InputError("analyze_geometry: accuracy count mismatch");
    }
    auto top = select_anchors(embeddings, accuracies, 0.3f);
    const int64_t tm = top.embeddings.count();
    std::vector<double> tcol(static_cast<size_t>(tm));
    for (int t = 0; t < d; ++t) {
      for (int64_t i = 0; i < tm; ++i) {
        tcol[static_cast<size_t>(i)] = top.embeddings.rows[static_cast<size_t>(i) * d + t];
      }
      out.per_dim_top.push_back(make_histogram(tcol, bins));
    }
  }
  return out;
}

std::vector<RobustnessPoint> robustness_sweep(const HyperAe& ae,
                                              const std::vector<WeightVector>& originals,
                                              const EmbeddingMatrix& anchor_embeddings,
                                              std::span<const double> noise_levels,
                                              const NetSpec& spec, const ImageDataset& test,
                                              const WeightVector& train_mean, uint64_t seed) {
  if (originals.empty()) throw InputError("robustness_sweep: no originals");
  const int d = anchor_embeddings.dim;
  // Per-dimension anchor standard deviation defines the relative noise scale.
  std::vector<double> sigma(static_cast<size_t>(d), 0.0);
  {
    const int64_t m = anchor_embeddings.count();
    std::vector<double> mean(static_cast<size_t>(d), 0.0);
    for (int64_t i = 0; i < m; ++i) {
      for (int t = 0; t < d; ++t) {
        mean[static_cast<size_t>(t)] += anchor_embeddings.rows[static_cast<size_t>(i) * d + t];
      }
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i) {
      for (int t = 0; t < d; ++t) {
        const double delta =
            anchor_embeddings.rows[static_cast<size_t>(i) * d + t] - mean[static_cast<size_t>(t)];
        sigma[static_cast<size_t>(t)] += delta * delta;
      }
    }
    for (auto& v : sigma) v = std::sqrt(v / static_cast<double>(m));
  }

  EmbeddingMatrix base = ae.encode_batch(originals);
  std::vector<RobustnessPoint> out;
  RngStream root(seed);
  for (double level : noise_levels) {
    EmbeddingMatrix noisy = base;
    if (level != 0.0) {
      auto rng = root.fork("level" + std::to_string(level));
      for (int64_t i = 0; i < noisy.count(); ++i) {
        for (int t = 0; t < d; ++t) {
          noisy.rows[static_cast<size_t>(i) * d + t] +=
              static_cast<float>(level * sigma[static_cast<size_t>(t)]) * rng.normal();
        }
      }
    }
    auto decoded = ae.decode_batch(noisy);
    std::vector<double> accs(decoded.size());
    parallel_tasks(static_cast<int64_t>(decoded.size()), [&](int64_t i) {
      accs[static_cast<size_t>(i)] = evaluate_model(decoded[static_cast<size_t>(i)], spec, test);
    });
    RobustnessPoint p;
    p.level = level;
    p.mean_accuracy = mean_of(accs);
    p.r2 = r_squared(decoded, originals, train_mean);
    out.push_back(p);
  }
  return out;
}

InterpolationResult smoothness_interpolation(
    const HyperAe& ae, const std::vector<std::pair<Embedding, Embedding>>& pairs, int steps,
    const NetSpec& spec, const ImageDataset& test) {
  if (steps < 2) throw InputError("smoothness_interpolation: need at least 2 steps");
  if (pairs.empty()) throw InputError("smoothness_interpolation: no pairs");
  InterpolationResult out;
  for (int s = 0; s < steps; ++s) {
    out.ts.push_back(static_cast<double>(s) / (steps - 1));
  }
  out.pair_accuracy.assign(pairs.size(), std::vector<double>(static_cast<size_t>(steps), 0.0));
  // Decode all interpolants in one batch sweep per step.
  const int d = static_cast<int>(pairs.front().first.size());
  for (int s = 0; s < steps; ++s) {
    const float t = static_cast<float>(out.ts[static_cast<size_t>(s)]);
    EmbeddingMatrix zs;
    zs.dim = d;
    for (const auto& [za, zb] : pairs) {
      for (int i = 0; i < d; ++i) {
        zs.rows.push_back((1.0f - t) * za[static_cast<size_t>(i)] +
                          t * zb[static_cast<size_t>(i)]);
      }
    }
    auto decoded = ae.decode_batch(zs);
    std::vector<double> accs(decoded.size());
    parallel_tasks(static_cast<int64_t>(decoded.size()), [&](int64_t i) {
      accs[static_cast<size_t>(i)] = evaluate_model(decoded[static_cast<size_t>(i)], spec, test);
    });
    for (size_t p = 0; p < pairs.size(); ++p) {
      out.pair_accuracy[p][static_cast<size_t>(s)] = accs[p];
    }
  }
  return out;
}

std::vector<DistancePoint> weight_distance_tracking(const WeightTrajectory& original,
                                                    const WeightTrajectory& reconstructed) {
  if (original.weights.size() != reconstructed.weights.size() ||
      original.accuracy.size() != reconstructed.accuracy.size() ||
      original.weights.size() != original.accuracy.size()) {
    throw InputError("weight_distance_tracking: trajectories are not aligned");
  }
  std::vector<DistancePoint> out;
  for (size_t e = 0; e < original.weights.size(); ++e) {
    DistancePoint p;
    p.epoch = static_cast<int>(e);
    double acc = 0.0;
    const auto& a = original.weights[e].values;
    const auto& b = reconstructed.weights[e].values;
    if (a.size() != b.size()) throw ShapeError("weight_distance_tracking: vector size mismatch");
    for (size_t i = 0; i < a.size(); ++i) {
      acc += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
    }
    p.l2_distance = std::sqrt(acc);
    p.accuracy_gap = original.accuracy[e] - reconstructed.accuracy[e];
    out.push_back(p);
  }
  return out;
}

}  // namespace weightgen
