// weightgen: train model zoos, learn hyper-representations over their
// weights, sample new embeddings, decode them to networks and evaluate the
// resulting populations.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "weightgen/config.hpp"
#include "weightgen/evalharness.hpp"
#include "weightgen/hyperae.hpp"
#include "weightgen/parallel.hpp"
#include "weightgen/samplers.hpp"
#include "weightgen/version.hpp"
#include "weightgen/zoo.hpp"

namespace fs = std::filesystem;
using namespace weightgen;
using nlohmann::json;

namespace {

struct GlobalOpts {
  int threads = 0;
  bool force = false;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Every command drops a provenance record next to its primary artifact.
void write_run_record(const fs::path& primary_artifact, const std::string& command,
                      const std::string& cfg_hash, uint64_t seed, double wall_seconds,
                      const std::vector<std::string>& artifacts) {
  json j;
  j["command"] = command;
  j["config_hash"] = cfg_hash;
  j["seed"] = seed;
  j["version"] = kVersion;
  j["wall_time_s"] = wall_seconds;
  j["threads"] = max_threads();
  j["artifacts"] = artifacts;
  fs::path path = primary_artifact;
  path += ".run.json";
  atomic_write(path, j.dump(2));
}

bool outputs_exist(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) {
    if (!fs::exists(p)) return false;
  }
  return true;
}

bool skip_existing(const GlobalOpts& g, const std::vector<fs::path>& outputs,
                   const std::string& what) {
  if (!g.force && outputs_exist(outputs)) {
    std::cout << what << ": outputs exist, skipping (use --force to redo)\n";
    return true;
  }
  return false;
}

NetSpec arch_spec(const std::string& arch, int channels, Activation act) {
  if (arch == "table3") return table3_spec(channels, act);
  if (arch == "res-skip") return table3_res_skip_spec(channels, act);
  if (arch == "4conv") return four_conv_spec(channels, act, false);
  if (arch == "4conv-id") return four_conv_spec(channels, act, true);
  throw ConfigError("unknown architecture '" + arch +
                    "' (expected table3 | res-skip | 4conv | 4conv-id)");
}

/// Train-split anchor embeddings with their recorded checkpoint accuracies.
AnchorSet build_anchors(const HyperAe& ae, const fs::path& zoo_dir, const ZooManifest& manifest,
                        float top_fraction) {
  auto loaded = load_split_vectors(zoo_dir, manifest, "train");
  if (loaded.vectors.empty()) throw MissingArtifactError("zoo has no train-split checkpoints");
  EmbeddingMatrix zs = ae.encode_batch(loaded.vectors);
  return select_anchors(zs, loaded.accuracies, top_fraction);
}

std::string sampler_kind_of(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open sampler artifact " + path.string() +
                                      " (produce it with 'sampler fit')");
  char magic[4] = {};
  in.read(magic, 4);
  if (std::string(magic, 4) == "WZA1") {
    auto ckpt = read_wza(path);
    return json::parse(ckpt.header_json).value("kind", "");
  }
  in.seekg(0);
  json j;
  in >> j;
  return j.value("kind", "");
}

EmbeddingMatrix sample_from_artifact(const fs::path& path, int n, uint64_t seed) {
  const std::string kind = sampler_kind_of(path);
  if (kind == "kde") {
    std::ifstream in(path);
    json j;
    in >> j;
    auto model = load_kde(path);
    if (j.value("counterfactual", false)) {
      return sample_counterfactual(model, n, j.value("quantile", 0.1f), seed);
    }
    return kde_sample(model, n, seed);
  }
  if (kind == "uniform") {
    std::ifstream in(path);
    json j;
    in >> j;
    return sample_uniform(j.at("dim").get<int>(), n, seed);
  }
  if (kind == "neighbor_map") return sample_neighbor(NeighborMap::load(path), n, seed);
  if (kind == "latent_gan") return LatentGan::load(path).sample(n, seed);
  throw FormatError(path.string() + ": unknown sampler kind '" + kind + "'");
}

std::vector<WeightVector> decode_embeddings(const HyperAe& ae, const fs::path& emb_path) {
  return ae.decode_batch(read_wze(emb_path));
}

EvalReport report_with_tests(const PopulationResult& result, uint64_t bootstrap_seed) {
  return make_report(result, bootstrap_seed);
}

void emit_population(const fs::path& out_dir, const PopulationResult& result,
                     uint64_t bootstrap_seed, std::vector<std::string>& artifacts,
                     const std::vector<PairwiseTest>& tests = {}) {
  fs::create_directories(out_dir);
  const fs::path csv = out_dir / (result.method + ".csv");
  const fs::path js = out_dir / (result.method + ".json");
  write_population_csv(csv, result);
  auto report = report_with_tests(result, bootstrap_seed);
  report.tests = tests;
  write_report_json(js, report);
  artifacts.push_back(csv.string());
  artifacts.push_back(js.string());
}

ZooConfig finetune_hyper(const ExperimentConfig& cfg, const DatasetSpec& target) {
  ZooConfig hyper;
  hyper.dataset = target.name;
  hyper.input_channels = target.channels;
  apply_dataset_defaults(hyper);
  // The zoo section's optimization choices carry over to fine-tuning on the
  // same dataset family (all methods share them).
  hyper.lr = cfg.zoo.lr;
  hyper.weight_decay = cfg.zoo.weight_decay;
  hyper.activation = cfg.zoo.activation;
  hyper.init = cfg.zoo.init;
  hyper.batch_size = cfg.zoo.batch_size;
  hyper.uniform_range = cfg.zoo.uniform_range;
  return hyper;
}

// ---------------------------------------------------------------------------
// Command implementations
// ---------------------------------------------------------------------------

int cmd_zoo_gen(const GlobalOpts& g, const fs::path& config_path, const fs::path& out_dir) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_dir / "manifest.json"}, "zoo gen")) return 0;
  Stopwatch watch;
  auto train = cfg.dataset.load("train", data_root());
  auto test = cfg.dataset.load("test", data_root());
  ZooConfig zoo = cfg.zoo;
  zoo.dataset = cfg.dataset.name;
  zoo.input_channels = cfg.dataset.channels;
  auto manifest = generate_zoo(zoo, out_dir, train, test);
  int failed = 0;
  for (const auto& m : manifest.models) failed += m.failed;
  std::cout << "zoo gen: " << manifest.models.size() << " models (" << failed << " failed) in "
            << out_dir << "\n";
  write_run_record(out_dir / "manifest.json", "zoo gen", config_hash(cfg), cfg.seed,
                   watch.seconds(), {(out_dir / "manifest.json").string()});
  return 0;
}

int cmd_zoo_eval(const GlobalOpts& g, const fs::path& config_path, const fs::path& zoo_dir,
                 const fs::path& out_csv) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_csv}, "zoo eval")) return 0;
  Stopwatch watch;
  auto manifest = read_manifest(zoo_dir);
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = spec_from_zoo_config(manifest.config);
  std::string csv = "seed,split,epoch,recorded_accuracy,reevaluated_accuracy\n";
  for (const auto& m : manifest.models) {
    if (m.failed) continue;
    for (const auto& ck : m.checkpoints) {
      const double acc = evaluate_model(read_wts(zoo_dir / ck.path), spec, test);
      csv += std::to_string(m.seed) + "," + m.split + "," + std::to_string(ck.epoch) + "," +
             std::to_string(ck.test_accuracy) + "," + std::to_string(acc) + "\n";
    }
  }
  atomic_write(out_csv, csv);
  write_run_record(out_csv, "zoo eval", config_hash(cfg), cfg.seed, watch.seconds(),
                   {out_csv.string()});
  std::cout << "zoo eval: wrote " << out_csv << "\n";
  return 0;
}

int cmd_ae_train(const GlobalOpts& g, const fs::path& config_path, const fs::path& zoo_dir,
                 const fs::path& out_path) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_path}, "ae train")) return 0;
  Stopwatch watch;
  auto manifest = read_manifest(zoo_dir);
  auto train = load_split_vectors(zoo_dir, manifest, "train");
  auto val = load_split_vectors(zoo_dir, manifest, "val");
  if (train.vectors.empty()) throw MissingArtifactError("zoo has no train checkpoints");
  HyperAe ae = train_hyperae({train.vectors, val.vectors}, cfg.ae, train.vectors.front().layout);
  ae.save(out_path);
  double best_r2 = -1.0;
  for (const auto& e : ae.train_log()) {
    if (std::isfinite(e.val_r2)) best_r2 = std::max(best_r2, e.val_r2);
  }
  std::cout << "ae train: " << train.vectors.size() << " train vectors, best val R2 " << best_r2
            << ", saved " << out_path << "\n";
  write_run_record(out_path, "ae train", config_hash(cfg), cfg.ae.seed, watch.seconds(),
                   {out_path.string()});
  return 0;
}

int cmd_ae_reconstruct(const GlobalOpts& g, const fs::path& config_path, const fs::path& ae_path,
                       const fs::path& zoo_dir, const std::string& split, const fs::path& out_dir) {
  auto cfg = parse_config_file(config_path);
  const fs::path metrics_path = out_dir / "reconstruction.json";
  if (skip_existing(g, {metrics_path}, "ae reconstruct")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);
  auto vectors = load_split_vectors(zoo_dir, manifest, split);
  if (vectors.vectors.empty()) throw MissingArtifactError("zoo has no " + split + " checkpoints");
  auto train = load_split_vectors(zoo_dir, manifest, "train");
  WeightVector mean_vec;
  mean_vec.layout = train.vectors.front().layout;
  mean_vec.values.assign(static_cast<size_t>(mean_vec.layout->total), 0.0f);
  for (const auto& v : train.vectors) {
    for (size_t i = 0; i < v.values.size(); ++i) mean_vec.values[i] += v.values[i];
  }
  for (auto& x : mean_vec.values) x /= static_cast<float>(train.vectors.size());

  auto zs = ae.encode_batch(vectors.vectors);
  auto recon = ae.decode_batch(zs);
  fs::create_directories(out_dir);
  std::vector<std::string> artifacts;
  for (size_t i = 0; i < recon.size(); ++i) {
    fs::path p = out_dir / ("recon_" + std::to_string(i) + ".wts");
    write_wts(p, recon[i]);
  }
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = spec_from_zoo_config(manifest.config);
  std::vector<double> orig_acc(recon.size()), recon_acc(recon.size());
  parallel_tasks(static_cast<int64_t>(recon.size()), [&](int64_t i) {
    orig_acc[static_cast<size_t>(i)] =
        evaluate_model(vectors.vectors[static_cast<size_t>(i)], spec, test);
    recon_acc[static_cast<size_t>(i)] = evaluate_model(recon[static_cast<size_t>(i)], spec, test);
  });
  json j;
  j["split"] = split;
  j["count"] = recon.size();
  j["r2"] = r_squared(recon, vectors.vectors, mean_vec);
  j["original_accuracy_mean"] = mean_of(orig_acc);
  j["reconstructed_accuracy_mean"] = mean_of(recon_acc);
  atomic_write(metrics_path, j.dump(2));
  std::cout << "ae reconstruct: R2 " << j["r2"] << ", acc " << j["original_accuracy_mean"]
            << " -> " << j["reconstructed_accuracy_mean"] << "\n";
  write_run_record(metrics_path, "ae reconstruct", config_hash(cfg), cfg.seed, watch.seconds(),
                   {metrics_path.string()});
  return 0;
}

int cmd_sampler_fit(const GlobalOpts& g, const fs::path& config_path, const std::string& method,
                    const fs::path& ae_path, const fs::path& zoo_dir, const fs::path& out_path) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_path}, "sampler fit")) return 0;
  Stopwatch watch;
  SamplerSpec spec;
  for (const auto& s : cfg.samplers) {
    if (s.method == method) spec = s;
  }
  spec.method = method;

  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);
  AnchorSet anchors = build_anchors(ae, zoo_dir, manifest, spec.top_fraction());

  if (method == "uniform") {
    json j{{"kind", "uniform"}, {"method", method}, {"dim", ae.config().d_z}};
    atomic_write(out_path, j.dump());
  } else if (spec.needs_kde()) {
    auto model = kde_fit(anchors, spec.bandwidth);
    save_kde(out_path, model);
    // annotate the artifact with the sampling mode
    std::ifstream in(out_path);
    json j;
    in >> j;
    in.close();
    j["method"] = method;
    j["counterfactual"] = (method == "counterfactual");
    j["quantile"] = spec.quantile;
    atomic_write(out_path, j.dump());
  } else if (method == "neigh" || method == "neigh30") {
    auto map = NeighborMap::fit(anchors, spec.neighbor);
    map.save(out_path);
  } else {  // gan / gan30
    auto gan = LatentGan::train(anchors, spec.gan);
    gan.save(out_path);
  }
  std::cout << "sampler fit: " << method << " on " << anchors.embeddings.count()
            << " anchors -> " << out_path << "\n";
  write_run_record(out_path, "sampler fit " + method, config_hash(cfg), spec.seed,
                   watch.seconds(), {out_path.string()});
  return 0;
}

int cmd_sample(const GlobalOpts& g, const fs::path& sampler_path, int n, uint64_t seed,
               const fs::path& out_path) {
  if (skip_existing(g, {out_path}, "sample")) return 0;
  Stopwatch watch;
  EmbeddingMatrix m = sample_from_artifact(sampler_path, n, seed);
  json sidecar{{"sampler", sampler_path.string()},
               {"kind", sampler_kind_of(sampler_path)},
               {"n", n},
               {"seed", seed}};
  write_wze(out_path, m, sidecar.dump(2));
  std::cout << "sample: " << m.count() << " embeddings of dim " << m.dim << " -> " << out_path
            << "\n";
  write_run_record(out_path, "sample", "", seed, watch.seconds(), {out_path.string()});
  return 0;
}

int cmd_eval_init(const GlobalOpts& g, const fs::path& config_path, const fs::path& emb_path,
                  const fs::path& ae_path, const std::string& method, const fs::path& out_dir) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_dir / (method + ".csv"), out_dir / (method + ".json")}, "eval init")) {
    return 0;
  }
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto vectors = decode_embeddings(ae, emb_path);
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = table3_spec(cfg.dataset.channels, cfg.zoo.activation);
  auto result = eval_population(vectors, spec, test, method);
  std::vector<std::string> artifacts;
  emit_population(out_dir, result, cfg.eval.seed, artifacts);
  std::cout << "eval init: " << method << " mean accuracy " << mean_of(result.at_epoch(0))
            << "\n";
  write_run_record(out_dir / (method + ".csv"), "eval init", config_hash(cfg), cfg.eval.seed,
                   watch.seconds(), artifacts);
  return 0;
}

int cmd_eval_finetune(const GlobalOpts& g, const fs::path& config_path, const fs::path& emb_path,
                      const fs::path& ae_path, const std::string& method, int epochs,
                      const fs::path& out_dir, bool with_baseline) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_dir / (method + ".csv")}, "eval finetune")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto vectors = decode_embeddings(ae, emb_path);
  if (static_cast<int>(vectors.size()) > cfg.eval.population) {
    vectors.resize(static_cast<size_t>(cfg.eval.population));
  }
  auto train_full = cfg.dataset.load("train", data_root());
  auto train = cfg.eval.finetune_train_n > 0 && cfg.eval.finetune_train_n < train_full.size()
                   ? subset(train_full, cfg.eval.finetune_train_n, cfg.eval.seed)
                   : train_full;
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = table3_spec(cfg.dataset.channels, cfg.zoo.activation);
  const ZooConfig hyper = finetune_hyper(cfg, cfg.dataset);
  const int e = epochs > 0 ? epochs : cfg.eval.finetune_epochs;

  auto warm = finetune_population(vectors, spec, hyper, e, train, test, method, cfg.eval.seed);
  std::vector<std::string> artifacts;
  std::vector<PairwiseTest> tests;
  if (with_baseline) {
    auto scratch = random_population(spec, hyper.init, static_cast<int>(vectors.size()),
                                     cfg.eval.seed + 5000, hyper.uniform_range);
    auto bt = finetune_population(scratch, spec, hyper, e, train, test, "bt", cfg.eval.seed + 5000);
    emit_population(out_dir, bt.result, cfg.eval.seed, artifacts);
    auto r = mwu_test(warm.result.at_epoch(e), bt.result.at_epoch(e));
    tests.push_back({method + "_vs_bt_ep" + std::to_string(e), r.p_value, r.cles});
  }
  emit_population(out_dir, warm.result, cfg.eval.seed, artifacts, tests);
  std::cout << "eval finetune: " << method << " mean@" << e << " = "
            << mean_of(warm.result.at_epoch(e)) << "\n";
  write_run_record(out_dir / (method + ".csv"), "eval finetune", config_hash(cfg), cfg.eval.seed,
                   watch.seconds(), artifacts);
  return 0;
}

int cmd_eval_ensemble(const GlobalOpts& g, const fs::path& config_path, const fs::path& emb_path,
                      const fs::path& ae_path, const std::string& method, const fs::path& out_dir) {
  auto cfg = parse_config_file(config_path);
  const fs::path out = out_dir / (method + "_ensembles.json");
  if (skip_existing(g, {out}, "eval ensemble")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto vectors = decode_embeddings(ae, emb_path);
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = table3_spec(cfg.dataset.channels, cfg.zoo.activation);
  auto ens = ensemble_eval(vectors, spec, test, cfg.eval.ensemble_sizes, cfg.eval.ensemble_trials,
                           cfg.eval.seed);
  json j;
  j["method"] = method;
  j["trials"] = cfg.eval.ensemble_trials;
  for (const auto& [size, acc] : ens) j["sizes"][std::to_string(size)] = acc;
  fs::create_directories(out_dir);
  atomic_write(out, j.dump(2));
  std::cout << "eval ensemble: " << j.dump() << "\n";
  write_run_record(out, "eval ensemble", config_hash(cfg), cfg.eval.seed, watch.seconds(),
                   {out.string()});
  return 0;
}

int cmd_eval_transfer(const GlobalOpts& g, const fs::path& config_path, const fs::path& ae_path,
                      const fs::path& zoo_dir, const std::string& method, int epochs,
                      const fs::path& out_dir) {
  auto cfg = parse_config_file(config_path);
  if (!cfg.eval.transfer_target) {
    throw ConfigError("config.eval.transfer_target: required for 'eval transfer'");
  }
  if (skip_existing(g, {out_dir / (method + ".csv")}, "eval transfer")) return 0;
  Stopwatch watch;
  const DatasetSpec& target = *cfg.eval.transfer_target;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);

  // sample -> decode on the source hyper-representation
  SamplerSpec sspec;
  for (const auto& s : cfg.samplers) {
    if (s.method == method) sspec = s;
  }
  sspec.method = method;
  AnchorSet anchors = build_anchors(ae, zoo_dir, manifest, sspec.top_fraction());
  EmbeddingMatrix zs;
  if (sspec.needs_kde()) {
    zs = kde_sample(kde_fit(anchors, sspec.bandwidth), cfg.eval.population, sspec.seed);
  } else if (method == "uniform") {
    zs = sample_uniform(ae.config().d_z, cfg.eval.population, sspec.seed);
  } else if (method == "neigh" || method == "neigh30") {
    zs = sample_neighbor(NeighborMap::fit(anchors, sspec.neighbor), cfg.eval.population,
                         sspec.seed);
  } else {
    zs = LatentGan::train(anchors, sspec.gan).sample(cfg.eval.population, sspec.seed);
  }
  auto sampled = ae.decode_batch(zs);

  auto target_train_full = target.load("train", data_root());
  auto target_train =
      cfg.eval.finetune_train_n > 0 && cfg.eval.finetune_train_n < target_train_full.size()
          ? subset(target_train_full, cfg.eval.finetune_train_n, cfg.eval.seed)
          : target_train_full;
  auto target_test = target.load("test", data_root());
  const NetSpec spec = table3_spec(target.channels, cfg.zoo.activation);
  const ZooConfig hyper = finetune_hyper(cfg, target);
  const int e = epochs > 0 ? epochs : cfg.eval.finetune_epochs;

  // S: sampled weights fine-tuned on the target
  auto s_run =
      finetune_population(sampled, spec, hyper, e, target_train, target_test, method, cfg.eval.seed);
  // B_T: from-scratch training on the target
  auto scratch = random_population(spec, hyper.init, cfg.eval.population, cfg.eval.seed + 5000,
                                   hyper.uniform_range);
  auto bt =
      finetune_population(scratch, spec, hyper, e, target_train, target_test, "bt", cfg.eval.seed + 5000);
  // B_F: pre-trained source-zoo models fine-tuned on the target
  auto pretrained = load_split_vectors(zoo_dir, manifest, "test", {manifest.config.epochs});
  std::vector<WeightVector> bf_init = pretrained.vectors;
  if (static_cast<int>(bf_init.size()) > cfg.eval.population) {
    bf_init.resize(static_cast<size_t>(cfg.eval.population));
  }
  auto bf =
      finetune_population(bf_init, spec, hyper, e, target_train, target_test, "bf", cfg.eval.seed + 9000);

  std::vector<std::string> artifacts;
  std::vector<PairwiseTest> tests;
  auto add_test = [&](const std::string& label, const std::vector<double>& a,
                      const std::vector<double>& b) {
    auto r = mwu_test(a, b);
    tests.push_back({label, r.p_value, r.cles});
  };
  add_test(method + "_vs_bt_ep" + std::to_string(e), s_run.result.at_epoch(e), bt.result.at_epoch(e));
  add_test(method + "_vs_bf_ep" + std::to_string(e), s_run.result.at_epoch(e), bf.result.at_epoch(e));
  emit_population(out_dir, bt.result, cfg.eval.seed, artifacts);
  emit_population(out_dir, bf.result, cfg.eval.seed, artifacts);
  emit_population(out_dir, s_run.result, cfg.eval.seed, artifacts, tests);
  std::cout << "eval transfer: " << method << " mean@" << e << " = "
            << mean_of(s_run.result.at_epoch(e)) << " vs bt "
            << mean_of(bt.result.at_epoch(e)) << " vs bf " << mean_of(bf.result.at_epoch(e))
            << "\n";
  write_run_record(out_dir / (method + ".csv"), "eval transfer", config_hash(cfg), cfg.eval.seed,
                   watch.seconds(), artifacts);
  return 0;
}

int cmd_eval_unseen_zoo(const GlobalOpts& g, const fs::path& config_path, const fs::path& ae_path,
                        const fs::path& other_zoo_dir, const fs::path& out_path) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_path}, "eval unseen-zoo")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(other_zoo_dir);
  auto vectors = load_split_vectors(other_zoo_dir, manifest, "test");
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = spec_from_zoo_config(manifest.config);
  auto res = unseen_zoo_eval(ae, vectors.vectors, spec, test, 5, cfg.eval.ensemble_trials,
                             cfg.eval.seed);
  json j{{"single_mean", res.single_mean},
         {"single_max", res.single_max},
         {"ensemble_mean", res.ensemble_mean},
         {"ensemble_max", res.ensemble_max}};
  atomic_write(out_path, j.dump(2));
  std::cout << "eval unseen-zoo: " << j.dump() << "\n";
  write_run_record(out_path, "eval unseen-zoo", config_hash(cfg), cfg.eval.seed, watch.seconds(),
                   {out_path.string()});
  return 0;
}

int cmd_eval_unseen_arch(const GlobalOpts& g, const fs::path& config_path, const fs::path& emb_path,
                         const fs::path& ae_path, const std::string& arch, int epochs,
                         const fs::path& out_dir) {
  auto cfg = parse_config_file(config_path);
  const std::string method = "gen_" + arch;
  if (skip_existing(g, {out_dir / (method + ".csv")}, "eval unseen-arch")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto decoded = decode_embeddings(ae, emb_path);
  if (static_cast<int>(decoded.size()) > cfg.eval.population) {
    decoded.resize(static_cast<size_t>(cfg.eval.population));
  }
  const NetSpec target = arch_spec(arch, cfg.dataset.channels, cfg.zoo.activation);
  std::vector<WeightVector> redistributed;
  redistributed.reserve(decoded.size());
  for (const auto& v : decoded) redistributed.push_back(redistribute_weights(v, target));

  auto train_full = cfg.dataset.load("train", data_root());
  auto train = cfg.eval.finetune_train_n > 0 && cfg.eval.finetune_train_n < train_full.size()
                   ? subset(train_full, cfg.eval.finetune_train_n, cfg.eval.seed)
                   : train_full;
  auto test = cfg.dataset.load("test", data_root());
  const ZooConfig hyper = finetune_hyper(cfg, cfg.dataset);
  const int e = epochs > 0 ? epochs : cfg.eval.finetune_epochs;

  auto gen_run = finetune_population(redistributed, target, hyper, e, train, test, method,
                                     cfg.eval.seed);
  auto scratch = random_population(target, hyper.init, static_cast<int>(redistributed.size()),
                                   cfg.eval.seed + 5000, hyper.uniform_range);
  auto ri_run = finetune_population(scratch, target, hyper, e, train, test, "ri_" + arch,
                                    cfg.eval.seed + 5000);
  std::vector<std::string> artifacts;
  std::vector<PairwiseTest> tests;
  auto r = mwu_test(gen_run.result.at_epoch(e), ri_run.result.at_epoch(e));
  tests.push_back({method + "_vs_ri_ep" + std::to_string(e), r.p_value, r.cles});
  emit_population(out_dir, ri_run.result, cfg.eval.seed, artifacts);
  emit_population(out_dir, gen_run.result, cfg.eval.seed, artifacts, tests);
  std::cout << "eval unseen-arch " << arch << ": gen mean@" << e << " = "
            << mean_of(gen_run.result.at_epoch(e)) << " vs random init "
            << mean_of(ri_run.result.at_epoch(e)) << "\n";
  write_run_record(out_dir / (method + ".csv"), "eval unseen-arch", config_hash(cfg),
                   cfg.eval.seed, watch.seconds(), artifacts);
  return 0;
}

int cmd_analyze_geometry(const GlobalOpts& g, const fs::path& ae_path, const fs::path& zoo_dir,
                         const fs::path& out_path) {
  if (skip_existing(g, {out_path}, "analyze geometry")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);
  auto loaded = load_split_vectors(zoo_dir, manifest, "train");
  EmbeddingMatrix zs = ae.encode_batch(loaded.vectors);
  auto geo = analyze_geometry(zs, loaded.accuracies);
  auto hist_json = [](const Histogram& h) {
    return json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
  };
  json j;
  j["count"] = zs.count();
  j["dim"] = zs.dim;
  j["norms"] = geo.norms;
  j["norm_hist"] = hist_json(geo.norm_hist);
  j["cosine_hist"] = hist_json(geo.cosine_hist);
  json dims = json::array();
  for (const auto& h : geo.per_dim_all) dims.push_back(hist_json(h));
  j["per_dim_all"] = std::move(dims);
  json tdims = json::array();
  for (const auto& h : geo.per_dim_top) tdims.push_back(hist_json(h));
  j["per_dim_top30"] = std::move(tdims);
  atomic_write(out_path, j.dump());
  std::cout << "analyze geometry: " << zs.count() << " embeddings -> " << out_path << "\n";
  write_run_record(out_path, "analyze geometry", "", 0, watch.seconds(), {out_path.string()});
  return 0;
}

int cmd_analyze_robustness(const GlobalOpts& g, const fs::path& config_path,
                           const fs::path& ae_path, const fs::path& zoo_dir,
                           std::vector<double> levels, const fs::path& out_path) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_path}, "analyze robustness")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);
  auto test_vectors = load_split_vectors(zoo_dir, manifest, "test");
  auto train = load_split_vectors(zoo_dir, manifest, "train");
  WeightVector mean_vec;
  mean_vec.layout = train.vectors.front().layout;
  mean_vec.values.assign(static_cast<size_t>(mean_vec.layout->total), 0.0f);
  for (const auto& v : train.vectors) {
    for (size_t i = 0; i < v.values.size(); ++i) mean_vec.values[i] += v.values[i];
  }
  for (auto& x : mean_vec.values) x /= static_cast<float>(train.vectors.size());
  EmbeddingMatrix anchors = ae.encode_batch(train.vectors);
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = spec_from_zoo_config(manifest.config);
  if (levels.empty()) levels = {0.0, 0.05, 0.1, 0.5};
  auto sweep = robustness_sweep(ae, test_vectors.vectors, anchors, levels, spec, test, mean_vec,
                                cfg.eval.seed);
  json j = json::array();
  for (const auto& p : sweep) {
    j.push_back({{"level", p.level}, {"mean_accuracy", p.mean_accuracy}, {"r2", p.r2}});
  }
  atomic_write(out_path, j.dump(2));
  std::cout << "analyze robustness: " << j.dump() << "\n";
  write_run_record(out_path, "analyze robustness", config_hash(cfg), cfg.eval.seed,
                   watch.seconds(), {out_path.string()});
  return 0;
}

int cmd_analyze_smoothness(const GlobalOpts& g, const fs::path& config_path,
                           const fs::path& ae_path, const fs::path& zoo_dir, int pair_count,
                           int steps, const fs::path& out_path) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_path}, "analyze smoothness")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = spec_from_zoo_config(manifest.config);

  // (i) along each test model's trajectory: first to last checkpoint
  std::vector<std::pair<Embedding, Embedding>> traj_pairs;
  for (const auto* m : manifest.split_models("test")) {
    if (m->checkpoints.size() < 2) continue;
    auto first = read_wts(zoo_dir / m->checkpoints.front().path);
    auto last = read_wts(zoo_dir / m->checkpoints.back().path);
    traj_pairs.emplace_back(ae.encode(first), ae.encode(last));
  }
  // (ii) random pairs across different models' trajectories
  auto test_vectors = load_split_vectors(zoo_dir, manifest, "test");
  EmbeddingMatrix zs = ae.encode_batch(test_vectors.vectors);
  RngStream rng(cfg.eval.seed);
  std::vector<std::pair<Embedding, Embedding>> cross_pairs;
  const int64_t m = zs.count();
  for (int p = 0; p < pair_count && m >= 2; ++p) {
    const auto i = static_cast<int64_t>(rng.below(static_cast<uint64_t>(m)));
    auto j2 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(m - 1)));
    if (j2 >= i) ++j2;
    Embedding a(zs.rows.begin() + i * zs.dim, zs.rows.begin() + (i + 1) * zs.dim);
    Embedding b(zs.rows.begin() + j2 * zs.dim, zs.rows.begin() + (j2 + 1) * zs.dim);
    cross_pairs.emplace_back(std::move(a), std::move(b));
  }

  json j;
  auto run_mode = [&](const std::string& name,
                      const std::vector<std::pair<Embedding, Embedding>>& pairs) {
    if (pairs.empty()) return;
    auto res = smoothness_interpolation(ae, pairs, steps, spec, test);
    json jm;
    jm["ts"] = res.ts;
    std::vector<double> mean_acc(static_cast<size_t>(steps), 0.0);
    for (const auto& pa : res.pair_accuracy) {
      for (int s = 0; s < steps; ++s) mean_acc[static_cast<size_t>(s)] += pa[static_cast<size_t>(s)];
    }
    for (auto& v : mean_acc) v /= static_cast<double>(res.pair_accuracy.size());
    jm["mean_accuracy"] = mean_acc;
    jm["pairs"] = res.pair_accuracy.size();
    j[name] = std::move(jm);
  };
  run_mode("same_model", traj_pairs);
  run_mode("cross_model", cross_pairs);
  atomic_write(out_path, j.dump(2));
  std::cout << "analyze smoothness -> " << out_path << "\n";
  write_run_record(out_path, "analyze smoothness", config_hash(cfg), cfg.eval.seed,
                   watch.seconds(), {out_path.string()});
  return 0;
}

int cmd_analyze_distance(const GlobalOpts& g, const fs::path& config_path, const fs::path& ae_path,
                         const fs::path& zoo_dir, int pair_count, int epochs,
                         const fs::path& out_path) {
  auto cfg = parse_config_file(config_path);
  if (skip_existing(g, {out_path}, "analyze distance")) return 0;
  Stopwatch watch;
  HyperAe ae = HyperAe::load(ae_path);
  auto manifest = read_manifest(zoo_dir);
  auto test_vectors = load_split_vectors(zoo_dir, manifest, "test", {manifest.config.epochs});
  if (test_vectors.vectors.empty()) throw MissingArtifactError("zoo has no test checkpoints");
  if (pair_count > static_cast<int>(test_vectors.vectors.size())) {
    pair_count = static_cast<int>(test_vectors.vectors.size());
  }
  std::vector<WeightVector> originals(test_vectors.vectors.begin(),
                                      test_vectors.vectors.begin() + pair_count);
  auto zs = ae.encode_batch(originals);
  auto recon = ae.decode_batch(zs);

  auto train_full = cfg.dataset.load("train", data_root());
  auto train = cfg.eval.finetune_train_n > 0 && cfg.eval.finetune_train_n < train_full.size()
                   ? subset(train_full, cfg.eval.finetune_train_n, cfg.eval.seed)
                   : train_full;
  auto test = cfg.dataset.load("test", data_root());
  const NetSpec spec = spec_from_zoo_config(manifest.config);
  const ZooConfig hyper = finetune_hyper(cfg, cfg.dataset);

  auto orig_runs =
      finetune_population(originals, spec, hyper, epochs, train, test, "orig", cfg.eval.seed, true);
  auto recon_runs =
      finetune_population(recon, spec, hyper, epochs, train, test, "recon", cfg.eval.seed, true);

  json pairs = json::array();
  for (int p = 0; p < pair_count; ++p) {
    WeightTrajectory a{orig_runs.weight_trajectories[static_cast<size_t>(p)],
                       orig_runs.result.trajectories[static_cast<size_t>(p)]};
    WeightTrajectory b{recon_runs.weight_trajectories[static_cast<size_t>(p)],
                       recon_runs.result.trajectories[static_cast<size_t>(p)]};
    auto track = weight_distance_tracking(a, b);
    json jt = json::array();
    for (const auto& pt : track) {
      jt.push_back({{"epoch", pt.epoch},
                    {"l2_distance", pt.l2_distance},
                    {"accuracy_gap", pt.accuracy_gap}});
    }
    pairs.push_back(std::move(jt));
  }
  json j;
  j["pairs"] = std::move(pairs);
  atomic_write(out_path, j.dump(2));
  std::cout << "analyze distance: " << pair_count << " pairs over " << epochs << " epochs -> "
            << out_path << "\n";
  write_run_record(out_path, "analyze distance", config_hash(cfg), cfg.eval.seed, watch.seconds(),
                   {out_path.string()});
  return 0;
}

int cmd_report(const GlobalOpts& g, const fs::path& dir, const fs::path& out_path) {
  if (skip_existing(g, {out_path}, "report")) return 0;
  Stopwatch watch;
  // Gather per-method final-epoch samples from every population CSV.
  std::map<std::string, std::map<int, std::vector<double>>> methods;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string method, seed, epoch, acc, failed;
      std::getline(ss, method, ',');
      std::getline(ss, seed, ',');
      std::getline(ss, epoch, ',');
      std::getline(ss, acc, ',');
      std::getline(ss, failed, ',');
      if (failed == "1") continue;
      methods[method][std::stoi(epoch)].push_back(std::stod(acc));
    }
  }
  if (methods.empty()) throw MissingArtifactError("no population CSVs in " + dir.string());
  json j;
  uint64_t bseed = 1;
  for (const auto& [method, epochs] : methods) {
    json jm;
    for (const auto& [epoch, accs] : epochs) {
      auto s = summarize(accs, bseed++);
      jm["epochs"][std::to_string(epoch)] = {{"mean", s.mean},
                                             {"stddev", s.stddev},
                                             {"median", s.median},
                                             {"ci_low", s.ci_low},
                                             {"ci_high", s.ci_high},
                                             {"n", accs.size()}};
    }
    j["methods"][method] = std::move(jm);
  }
  // Pairwise tests at each method's final shared epoch.
  json tests = json::array();
  for (auto ita = methods.begin(); ita != methods.end(); ++ita) {
    for (auto itb = std::next(ita); itb != methods.end(); ++itb) {
      const int ea = ita->second.rbegin()->first;
      const int eb = itb->second.rbegin()->first;
      const int shared = std::min(ea, eb);
      if (!ita->second.contains(shared) || !itb->second.contains(shared)) continue;
      const auto& a = ita->second.at(shared);
      const auto& b = itb->second.at(shared);
      if (a.size() < 3 || b.size() < 3) continue;
      auto r = mwu_test(a, b);
      tests.push_back({{"a", ita->first},
                       {"b", itb->first},
                       {"epoch", shared},
                       {"p_value", r.p_value},
                       {"cles", r.cles}});
    }
  }
  j["tests"] = std::move(tests);
  atomic_write(out_path, j.dump(2));
  std::cout << "report: " << methods.size() << " methods -> " << out_path << "\n";
  write_run_record(out_path, "report", "", 0, watch.seconds(), {out_path.string()});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weightgen: generative hyper-representations over model-zoo weights"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--threads", g.threads, "cap worker threads (1 = fully deterministic order)");
  app.add_flag("--force", g.force, "overwrite existing outputs");

  std::string config_path, zoo_dir, ae_path, emb_path, sampler_path, method = "kde30";
  std::string out_path, split = "test", arch = "4conv", other_zoo;
  std::vector<double> levels;
  int n = 50, epochs = 0, steps = 11, pairs = 250;
  uint64_t seed = 11;

  // zoo
  auto* zoo = app.add_subcommand("zoo", "model zoo construction and checks");
  auto* zoo_gen = zoo->add_subcommand("gen", "train a population and write the zoo directory");
  zoo_gen->add_option("--config", config_path, "experiment config")->required();
  zoo_gen->add_option("--out", out_path, "zoo directory")->required();
  auto* zoo_eval = zoo->add_subcommand("eval", "re-evaluate stored checkpoints");
  zoo_eval->add_option("--config", config_path)->required();
  zoo_eval->add_option("--zoo", zoo_dir)->required();
  zoo_eval->add_option("--out", out_path)->required();

  // ae
  auto* ae = app.add_subcommand("ae", "hyper-representation autoencoder");
  auto* ae_train = ae->add_subcommand("train", "train on the zoo train split");
  ae_train->add_option("--config", config_path)->required();
  ae_train->add_option("--zoo", zoo_dir)->required();
  ae_train->add_option("--out", out_path)->required();
  auto* ae_rec = ae->add_subcommand("reconstruct", "encode/decode a split and score it");
  ae_rec->add_option("--config", config_path)->required();
  ae_rec->add_option("--ae", ae_path)->required();
  ae_rec->add_option("--zoo", zoo_dir)->required();
  ae_rec->add_option("--split", split, "zoo split (train|val|test)");
  ae_rec->add_option("--out", out_path)->required();

  // sampler fit
  auto* sampler = app.add_subcommand("sampler", "fit sampling models over anchors");
  auto* sampler_fit = sampler->add_subcommand("fit", "fit a sampler on the zoo train split");
  sampler_fit->add_option("--config", config_path)->required();
  sampler_fit->add_option("--method", method,
                          "uniform|kde|kde30|counterfactual|neigh|neigh30|gan|gan30")
      ->required();
  sampler_fit->add_option("--ae", ae_path)->required();
  sampler_fit->add_option("--zoo", zoo_dir)->required();
  sampler_fit->add_option("--out", out_path)->required();

  // sample
  auto* sample = app.add_subcommand("sample", "draw embeddings from a fitted sampler");
  sample->add_option("--sampler", sampler_path)->required();
  sample->add_option("--n", n, "number of samples");
  sample->add_option("--seed", seed);
  sample->add_option("--out", out_path)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate populations");
  auto* eval_init = eval->add_subcommand("init", "decode embeddings and score at epoch 0");
  eval_init->add_option("--config", config_path)->required();
  eval_init->add_option("--emb", emb_path)->required();
  eval_init->add_option("--ae", ae_path)->required();
  eval_init->add_option("--method", method, "method label for the report");
  eval_init->add_option("--out", out_path, "report directory")->required();
  auto* eval_ft = eval->add_subcommand("finetune", "decode and fine-tune with a scratch baseline");
  eval_ft->add_option("--config", config_path)->required();
  eval_ft->add_option("--emb", emb_path)->required();
  eval_ft->add_option("--ae", ae_path)->required();
  eval_ft->add_option("--method", method);
  eval_ft->add_option("--epochs", epochs, "override eval.finetune_epochs");
  eval_ft->add_option("--out", out_path)->required();
  auto* eval_ens = eval->add_subcommand("ensemble", "mean-softmax ensembles over sizes");
  eval_ens->add_option("--config", config_path)->required();
  eval_ens->add_option("--emb", emb_path)->required();
  eval_ens->add_option("--ae", ae_path)->required();
  eval_ens->add_option("--method", method);
  eval_ens->add_option("--out", out_path)->required();
  auto* eval_tr = eval->add_subcommand("transfer", "sample, decode and fine-tune on the target");
  eval_tr->add_option("--config", config_path)->required();
  eval_tr->add_option("--ae", ae_path)->required();
  eval_tr->add_option("--zoo", zoo_dir)->required();
  eval_tr->add_option("--method", method);
  eval_tr->add_option("--epochs", epochs);
  eval_tr->add_option("--out", out_path)->required();
  auto* eval_uz = eval->add_subcommand("unseen-zoo", "condition on another zoo's weights");
  eval_uz->add_option("--config", config_path)->required();
  eval_uz->add_option("--ae", ae_path)->required();
  eval_uz->add_option("--zoo", other_zoo, "the unseen zoo directory")->required();
  eval_uz->add_option("--out", out_path)->required();
  auto* eval_ua = eval->add_subcommand("unseen-arch", "redistribute weights to a new architecture");
  eval_ua->add_option("--config", config_path)->required();
  eval_ua->add_option("--emb", emb_path)->required();
  eval_ua->add_option("--ae", ae_path)->required();
  eval_ua->add_option("--arch", arch, "res-skip | 4conv | 4conv-id");
  eval_ua->add_option("--epochs", epochs);
  eval_ua->add_option("--out", out_path)->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "hyper-representation analyses");
  auto* an_geo = analyze->add_subcommand("geometry", "norms, cosine distances, per-dim hists");
  an_geo->add_option("--ae", ae_path)->required();
  an_geo->add_option("--zoo", zoo_dir)->required();
  an_geo->add_option("--out", out_path)->required();
  auto* an_rob = analyze->add_subcommand("robustness", "noise sweep over embeddings");
  an_rob->add_option("--config", config_path)->required();
  an_rob->add_option("--ae", ae_path)->required();
  an_rob->add_option("--zoo", zoo_dir)->required();
  an_rob->add_option("--levels", levels, "relative noise levels");
  an_rob->add_option("--out", out_path)->required();
  auto* an_smooth = analyze->add_subcommand("smoothness", "interpolation accuracy profiles");
  an_smooth->add_option("--config", config_path)->required();
  an_smooth->add_option("--ae", ae_path)->required();
  an_smooth->add_option("--zoo", zoo_dir)->required();
  an_smooth->add_option("--pairs", pairs, "cross-model pair count");
  an_smooth->add_option("--steps", steps, "interpolation steps");
  an_smooth->add_option("--out", out_path)->required();
  auto* an_dist = analyze->add_subcommand("distance", "weight distance during fine-tuning");
  an_dist->add_option("--config", config_path)->required();
  an_dist->add_option("--ae", ae_path)->required();
  an_dist->add_option("--zoo", zoo_dir)->required();
  an_dist->add_option("--pairs", pairs, "model pairs to track");
  an_dist->add_option("--epochs", epochs, "fine-tuning epochs")->default_val(5);
  an_dist->add_option("--out", out_path)->required();

  // report
  auto* report = app.add_subcommand("report", "aggregate population CSVs with pairwise tests");
  report->add_option("--dir", zoo_dir, "reports directory")->required();
  report->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);
  if (g.threads > 0) set_max_threads(g.threads);

  try {
    if (zoo_gen->parsed()) return cmd_zoo_gen(g, config_path, out_path);
    if (zoo_eval->parsed()) return cmd_zoo_eval(g, config_path, zoo_dir, out_path);
    if (ae_train->parsed()) return cmd_ae_train(g, config_path, zoo_dir, out_path);
    if (ae_rec->parsed()) return cmd_ae_reconstruct(g, config_path, ae_path, zoo_dir, split, out_path);
    if (sampler_fit->parsed()) return cmd_sampler_fit(g, config_path, method, ae_path, zoo_dir, out_path);
    if (sample->parsed()) return cmd_sample(g, sampler_path, n, seed, out_path);
    if (eval_init->parsed()) return cmd_eval_init(g, config_path, emb_path, ae_path, method, out_path);
    if (eval_ft->parsed())
      return cmd_eval_finetune(g, config_path, emb_path, ae_path, method, epochs, out_path, true);
    if (eval_ens->parsed()) return cmd_eval_ensemble(g, config_path, emb_path, ae_path, method, out_path);
    if (eval_tr->parsed())
      return cmd_eval_transfer(g, config_path, ae_path, zoo_dir, method, epochs, out_path);
    if (eval_uz->parsed()) return cmd_eval_unseen_zoo(g, config_path, ae_path, other_zoo, out_path);
    if (eval_ua->parsed())
      return cmd_eval_unseen_arch(g, config_path, emb_path, ae_path, arch, epochs, out_path);
    if (an_geo->parsed()) return cmd_analyze_geometry(g, ae_path, zoo_dir, out_path);
    if (an_rob->parsed())
      return cmd_analyze_robustness(g, config_path, ae_path, zoo_dir, levels, out_path);
    if (an_smooth->parsed())
      return cmd_analyze_smoothness(g, config_path, ae_path, zoo_dir, pairs, steps, out_path);
    if (an_dist->parsed())
      return cmd_analyze_distance(g, config_path, ae_path, zoo_dir, pairs, epochs, out_path);
    if (report->parsed()) return cmd_report(g, zoo_dir, out_path);
    std::cerr << "no command\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const SamplingError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
