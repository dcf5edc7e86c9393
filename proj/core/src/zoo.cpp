#include "weightgen/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "weightgen/errors.hpp"
#include "weightgen/io.hpp"
#include "weightgen/nn.hpp"
#include "weightgen/ops.hpp"
#include "weightgen/optim.hpp"
#include "weightgen/parallel.hpp"

namespace weightgen {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Gelu: return "gelu";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "tanh";
}

std::string to_string(InitScheme s) {
  switch (s) {
    case InitScheme::Uniform: return "uniform";
    case InitScheme::KaimingUniform: return "kaiming-uniform";
    case InitScheme::Normal: return "normal";
    case InitScheme::KaimingNormal: return "kaiming-normal";
  }
  return "uniform";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

InitScheme init_from_string(const std::string& s) {
  if (s == "uniform") return InitScheme::Uniform;
  if (s == "kaiming-uniform") return InitScheme::KaimingUniform;
  if (s == "normal") return InitScheme::Normal;
  if (s == "kaiming-normal") return InitScheme::KaimingNormal;
  throw ConfigError("unknown init scheme '" + s + "'");
}

NetSpec table3_spec(int input_channels, Activation act) {
  NetSpec spec;
  spec.act = act;
  spec.convs.push_back({input_channels, 8, 5, 1, 0, true, false, false});
  spec.convs.push_back({8, 6, 5, 1, 0, true, false, false});
  spec.convs.push_back({6, 4, 2, 1, 0, false, false, false});
  spec.fcs = {{36, 20}, {20, 10}};
  return spec;
}

NetSpec table3_res_skip_spec(int input_channels, Activation act) {
  NetSpec spec = table3_spec(input_channels, act);
  for (auto& c : spec.convs) c.res_skip = true;
  return spec;
}

NetSpec four_conv_spec(int input_channels, Activation act, bool id_skip) {
  // 28 -> conv5 -> 24 -> pool -> 12 -> conv3 -> 10 -> pool -> 5 -> conv3 -> 3
  // -> conv3(p1) -> 3; fc input stays 4*3*3 = 36.
  NetSpec spec;
  spec.act = act;
  spec.convs.push_back({input_channels, 6, 5, 1, 0, true, false, false});
  spec.convs.push_back({6, 6, 3, 1, 0, true, false, false});
  spec.convs.push_back({6, 6, 3, 1, 0, false, false, false});
  spec.convs.push_back({6, 4, 3, 1, 1, false, false, false});
  if (id_skip) {
    // identity skips where channel counts allow it
    spec.convs[1].id_skip = true;
    spec.convs[2].id_skip = true;
  }
  spec.fcs = {{36, 20}, {20, 10}};
  return spec;
}

namespace {

Tensor init_weight(std::vector<int> shape, int fan_in, InitScheme scheme, float uniform_range,
                   RngStream& rng) {
  switch (scheme) {
    case InitScheme::Uniform:
      return Tensor::rand_uniform(std::move(shape), -uniform_range, uniform_range, rng, true);
    case InitScheme::KaimingUniform: {
      const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
      return Tensor::rand_uniform(std::move(shape), -bound, bound, rng, true);
    }
    case InitScheme::Normal:
      return Tensor::rand_normal(std::move(shape), 0.0f, uniform_range, rng, true);
    case InitScheme::KaimingNormal: {
      const float std_dev = std::sqrt(2.0f / static_cast<float>(fan_in));
      return Tensor::rand_normal(std::move(shape), 0.0f, std_dev, rng, true);
    }
  }
  throw ConfigError("unknown init scheme");
}

Tensor apply_act(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::Tanh: return tanh(x);
    case Activation::Gelu: return gelu(x);
    case Activation::Relu: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  return tanh(x);
}

/// Center-crop the trailing spatial dims of src [B,C,H,W] to h x w.
Tensor center_crop(const Tensor& src, int h, int w) {
  const int sh = src.dim(2), sw = src.dim(3);
  if (sh == h && sw == w) return src;
  const int oy = (sh - h) / 2, ox = (sw - w) / 2;
  // reshape to [B*C, sh, sw] rows and slice twice
  Tensor rows = reshape(src, {src.dim(0) * src.dim(1), sh, sw});
  Tensor cut_h = slice_axis1(rows, oy, h);                 // [B*C, h, sw]
  Tensor cut = slice_lastdim(cut_h, ox, w);                // [B*C, h, w]
  return reshape(cut, {src.dim(0), src.dim(1), h, w});
}

}  // namespace

ConvNet ConvNet::build(const NetSpec& spec, InitScheme init, uint64_t seed, float uniform_range) {
  ConvNet net;
  net.spec_ = spec;
  RngStream root(seed);
  std::vector<std::pair<LayerKind, std::vector<int>>> layout_specs;
  for (size_t i = 0; i < spec.convs.size(); ++i) {
    const auto& c = spec.convs[i];
    auto rng = root.fork("conv" + std::to_string(i));
    const int fan_in = c.in_ch * c.k * c.k;
    net.conv_w_.push_back(init_weight({c.out_ch, c.in_ch, c.k, c.k}, fan_in, init, uniform_range, rng));
    net.conv_b_.push_back(Tensor::zeros({c.out_ch}, true));
    layout_specs.emplace_back(LayerKind::Conv, std::vector<int>{c.out_ch, c.in_ch, c.k, c.k});
    if (c.res_skip) {
      auto srng = root.fork("skip" + std::to_string(i));
      net.skip_w_.push_back(init_weight({c.out_ch, c.in_ch, 1, 1}, c.in_ch, init, uniform_range, srng));
      net.skip_b_.push_back(Tensor::zeros({c.out_ch}, true));
    } else {
      net.skip_w_.emplace_back();
      net.skip_b_.emplace_back();
    }
  }
  for (size_t i = 0; i < spec.fcs.size(); ++i) {
    const auto& [in, out] = spec.fcs[i];
    auto rng = root.fork("fc" + std::to_string(i));
    net.fc_w_.push_back(init_weight({out, in}, in, init, uniform_range, rng));
    net.fc_b_.push_back(Tensor::zeros({out}, true));
    layout_specs.emplace_back(LayerKind::Fc, std::vector<int>{out, in});
  }
  net.layout_ = std::make_shared<LayerLayout>(make_layout(layout_specs));
  if (!spec.param_scale.empty() && spec.param_scale.size() != net.layout_->layers.size()) {
    throw ConfigError("param_scale must list one factor per layer");
  }
  return net;
}

Tensor ConvNet::forward(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != spec_.convs.front().in_ch) {
    throw ShapeError("forward: input " + shape_str(x.shape()) + " does not match architecture (" +
                     std::to_string(spec_.convs.front().in_ch) + " channels)");
  }
  Tensor h = x;
  for (size_t i = 0; i < spec_.convs.size(); ++i) {
    const auto& c = spec_.convs[i];
    Tensor main = conv2d(h, conv_w_[i], conv_b_[i], c.stride, c.pad);
    if (c.res_skip) {
      Tensor skip = conv2d(h, skip_w_[i], skip_b_[i], 1, 0);
      main = add(main, center_crop(skip, main.dim(2), main.dim(3)));
    }
    if (c.id_skip && h.dim(1) == main.dim(1)) {
      main = add(main, center_crop(h, main.dim(2), main.dim(3)));
    }
    if (c.pool_after) main = maxpool2d(main, 2);
    h = apply_act(main, spec_.act);
  }
  Tensor flat = reshape(h, {h.dim(0), h.dim(1) * h.dim(2) * h.dim(3)});
  for (size_t i = 0; i < fc_w_.size(); ++i) {
    flat = linear(flat, fc_w_[i], fc_b_[i]);
    if (i + 1 < fc_w_.size()) flat = apply_act(flat, spec_.act);
  }
  return flat;
}

std::vector<std::pair<Tensor, Tensor>> ConvNet::main_params() const {
  std::vector<std::pair<Tensor, Tensor>> out;
  for (size_t i = 0; i < conv_w_.size(); ++i) out.emplace_back(conv_w_[i], conv_b_[i]);
  for (size_t i = 0; i < fc_w_.size(); ++i) out.emplace_back(fc_w_[i], fc_b_[i]);
  return out;
}

std::vector<Tensor> ConvNet::all_params() const {
  std::vector<Tensor> out;
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    out.push_back(conv_w_[i]);
    out.push_back(conv_b_[i]);
    if (skip_w_[i].defined()) {
      out.push_back(skip_w_[i]);
      out.push_back(skip_b_[i]);
    }
  }
  for (size_t i = 0; i < fc_w_.size(); ++i) {
    out.push_back(fc_w_[i]);
    out.push_back(fc_b_[i]);
  }
  return out;
}

std::vector<std::string> ConvNet::param_names() const {
  std::vector<std::string> out;
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    out.push_back("conv" + std::to_string(i) + ".w");
    out.push_back("conv" + std::to_string(i) + ".b");
    if (skip_w_[i].defined()) {
      out.push_back("skip" + std::to_string(i) + ".w");
      out.push_back("skip" + std::to_string(i) + ".b");
    }
  }
  for (size_t i = 0; i < fc_w_.size(); ++i) {
    out.push_back("fc" + std::to_string(i) + ".w");
    out.push_back("fc" + std::to_string(i) + ".b");
  }
  return out;
}

int64_t ConvNet::param_count() const { return layout_->total; }

WeightVector ConvNet::to_vector() const {
  WeightVector v = flatten(main_params(), layout_);
  if (!spec_.param_scale.empty()) {
    std::vector<float> inv(spec_.param_scale.size());
    for (size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0f / spec_.param_scale[i];
    v = scale_layers(v, inv);
  }
  return v;
}

void ConvNet::load(const WeightVector& stored) {
  if (!stored.layout || !stored.layout->compatible(*layout_)) {
    throw LayoutError("load: weight vector layout does not match architecture");
  }
  WeightVector effective = stored;
  if (!spec_.param_scale.empty()) effective = scale_layers(stored, spec_.param_scale);
  auto tensors = unflatten(effective);
  size_t li = 0;
  for (size_t i = 0; i < conv_w_.size(); ++i, ++li) {
    std::copy(tensors[li].first.values().begin(), tensors[li].first.values().end(),
              conv_w_[i].values().begin());
    std::copy(tensors[li].second.values().begin(), tensors[li].second.values().end(),
              conv_b_[i].values().begin());
  }
  for (size_t i = 0; i < fc_w_.size(); ++i, ++li) {
    std::copy(tensors[li].first.values().begin(), tensors[li].first.values().end(),
              fc_w_[i].values().begin());
    std::copy(tensors[li].second.values().begin(), tensors[li].second.values().end(),
              fc_b_[i].values().begin());
  }
}

std::vector<int> ZooConfig::resolved_checkpoint_epochs() const {
  if (!checkpoint_epochs.empty()) return checkpoint_epochs;
  // Desk analog of the paper's 21-25-of-50 window: the last five epochs.
  std::vector<int> out;
  for (int e = std::max(0, epochs - 4); e <= epochs; ++e) out.push_back(e);
  return out;
}

void apply_dataset_defaults(ZooConfig& cfg) {
  if (cfg.dataset == "svhn") {
    cfg.input_channels = 1;
    cfg.activation = Activation::Tanh;
    cfg.weight_decay = 0.0f;
    cfg.lr = 3e-3f;
    cfg.init = InitScheme::Uniform;
  } else if (cfg.dataset == "cifar10") {
    cfg.input_channels = 3;
    cfg.activation = Activation::Gelu;
    cfg.weight_decay = 1e-2f;
    cfg.lr = 1e-4f;
    cfg.init = InitScheme::KaimingUniform;
  } else if (cfg.dataset == "stl10") {
    cfg.input_channels = 3;
    cfg.activation = Activation::Tanh;
    cfg.weight_decay = 1e-3f;
    cfg.lr = 1e-4f;
    cfg.init = InitScheme::KaimingUniform;
  } else {
    // mnist row; also the default for synthetic datasets
    cfg.activation = Activation::Tanh;
    cfg.weight_decay = 0.0f;
    cfg.lr = 3e-4f;
    cfg.init = InitScheme::Uniform;
  }
}

NetSpec spec_from_zoo_config(const ZooConfig& cfg) {
  return table3_spec(cfg.input_channels, cfg.activation);
}

namespace {

double accuracy_on(const ConvNet& net, const ImageDataset& data, int batch_size = 256) {
  NoGradGuard ng;
  int64_t correct = 0;
  std::vector<int64_t> rows;
  for (int64_t start = 0; start < data.size(); start += batch_size) {
    const int64_t end = std::min<int64_t>(start + batch_size, data.size());
    rows.resize(static_cast<size_t>(end - start));
    for (int64_t i = start; i < end; ++i) rows[static_cast<size_t>(i - start)] = i;
    auto [x, y] = data.batch(rows);
    Tensor logits = net.forward(x);
    const auto lv = logits.values();
    const int classes = logits.dim(1);
    for (size_t i = 0; i < y.size(); ++i) {
      const float* row = lv.data() + i * static_cast<size_t>(classes);
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      if (best == y[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

TrainedModel train_model(const NetSpec& spec, const ZooConfig& cfg, uint64_t seed,
                         const ImageDataset& train, const ImageDataset& test) {
  TrainedModel result;
  result.seed = seed;
  ConvNet net = ConvNet::build(spec, cfg.init, seed, cfg.uniform_range);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam opt(net.all_params(), adam_cfg, net.param_names());

  const auto checkpoint_epochs = cfg.resolved_checkpoint_epochs();
  auto want_checkpoint = [&](int epoch) {
    return std::find(checkpoint_epochs.begin(), checkpoint_epochs.end(), epoch) !=
           checkpoint_epochs.end();
  };

  result.epoch_accuracy.push_back(accuracy_on(net, test));
  if (want_checkpoint(0)) result.checkpoints.emplace_back(0, net.to_vector());

  RngStream root(seed);
  std::vector<int64_t> order(static_cast<size_t>(train.size()));
  for (int64_t i = 0; i < train.size(); ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto erng = root.fork("epoch" + std::to_string(epoch));
    erng.shuffle(order);
    bool nan_hit = false;
    for (int64_t start = 0; start < train.size(); start += cfg.batch_size) {
      const int64_t end = std::min<int64_t>(start + cfg.batch_size, train.size());
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
      result.failed = true;
      break;
    }
    result.epoch_accuracy.push_back(accuracy_on(net, test));
    if (want_checkpoint(epoch)) result.checkpoints.emplace_back(epoch, net.to_vector());
  }
  return result;
}

double evaluate_model(const WeightVector& stored, const NetSpec& spec, const ImageDataset& data) {
  ConvNet net = ConvNet::build(spec, InitScheme::Uniform, 0);
  net.load(stored);
  return accuracy_on(net, data);
}

std::vector<float> model_softmax(const WeightVector& stored, const NetSpec& spec,
                                 const ImageDataset& data) {
  ConvNet net = ConvNet::build(spec, InitScheme::Uniform, 0);
  net.load(stored);
  NoGradGuard ng;
  std::vector<float> out;
  out.reserve(static_cast<size_t>(data.size()) * 10);
  std::vector<int64_t> rows;
  constexpr int batch_size = 256;
  for (int64_t start = 0; start < data.size(); start += batch_size) {
    const int64_t end = std::min<int64_t>(start + batch_size, data.size());
    rows.resize(static_cast<size_t>(end - start));
    for (int64_t i = start; i < end; ++i) rows[static_cast<size_t>(i - start)] = i;
    auto [x, y] = data.batch(rows);
    Tensor probs = softmax_rows(net.forward(x));
    out.insert(out.end(), probs.values().begin(), probs.values().end());
  }
  return out;
}

namespace {

nlohmann::json config_to_json(const ZooConfig& cfg) {
  return nlohmann::json{{"dataset", cfg.dataset},
                        {"input_channels", cfg.input_channels},
                        {"activation", to_string(cfg.activation)},
                        {"weight_decay", cfg.weight_decay},
                        {"lr", cfg.lr},
                        {"init", to_string(cfg.init)},
                        {"optimizer", cfg.optimizer},
                        {"uniform_range", cfg.uniform_range},
                        {"batch_size", cfg.batch_size},
                        {"epochs", cfg.epochs},
                        {"checkpoint_epochs", cfg.resolved_checkpoint_epochs()},
                        {"models", cfg.models},
                        {"base_seed", cfg.base_seed},
                        {"split_seed", cfg.split_seed},
                        {"data_seed", cfg.data_seed},
                        {"train_subset", cfg.train_subset},
                        {"test_subset", cfg.test_subset}};
}

ZooConfig config_from_json(const nlohmann::json& j) {
  ZooConfig cfg;
  cfg.dataset = j.at("dataset").get<std::string>();
  cfg.input_channels = j.at("input_channels").get<int>();
  cfg.activation = activation_from_string(j.at("activation").get<std::string>());
  cfg.weight_decay = j.at("weight_decay").get<float>();
  cfg.lr = j.at("lr").get<float>();
  cfg.init = init_from_string(j.at("init").get<std::string>());
  cfg.optimizer = j.at("optimizer").get<std::string>();
  cfg.uniform_range = j.at("uniform_range").get<float>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.checkpoint_epochs = j.at("checkpoint_epochs").get<std::vector<int>>();
  cfg.models = j.at("models").get<int>();
  cfg.base_seed = j.at("base_seed").get<uint64_t>();
  cfg.split_seed = j.at("split_seed").get<uint64_t>();
  cfg.data_seed = j.at("data_seed").get<uint64_t>();
  cfg.train_subset = j.at("train_subset").get<int64_t>();
  cfg.test_subset = j.at("test_subset").get<int64_t>();
  return cfg;
}

}  // namespace

std::vector<const ModelRecord*> ZooManifest::split_models(const std::string& split) const {
  std::vector<const ModelRecord*> out;
  for (const auto& m : models) {
    if (!m.failed && m.split == split) out.push_back(&m);
  }
  return out;
}

ZooManifest generate_zoo(const ZooConfig& cfg, const std::filesystem::path& dir,
                         const ImageDataset& train, const ImageDataset& test) {
  if (cfg.models < 10) throw ConfigError("generate_zoo: need at least 10 models");
  std::filesystem::create_directories(dir / "models");
  const NetSpec spec = spec_from_zoo_config(cfg);

  std::vector<TrainedModel> trained(static_cast<size_t>(cfg.models));
  parallel_tasks(cfg.models, [&](int64_t i) {
    trained[static_cast<size_t>(i)] =
        train_model(spec, cfg, cfg.base_seed + static_cast<uint64_t>(i), train, test);
  });

  ZooManifest manifest;
  manifest.config = cfg;

  // Split assignment over the non-failed models, drawn with the split seed.
  std::vector<int> ok_indices;
  for (int i = 0; i < cfg.models; ++i) {
    if (!trained[static_cast<size_t>(i)].failed) ok_indices.push_back(i);
  }
  RngStream split_rng(cfg.split_seed);
  split_rng.shuffle(ok_indices);
  const size_t n_train = static_cast<size_t>(std::llround(0.70 * static_cast<double>(ok_indices.size())));
  const size_t n_val = static_cast<size_t>(std::llround(0.15 * static_cast<double>(ok_indices.size())));
  std::vector<std::string> split_of(static_cast<size_t>(cfg.models));
  for (size_t rank = 0; rank < ok_indices.size(); ++rank) {
    const auto idx = static_cast<size_t>(ok_indices[rank]);
    split_of[idx] = rank < n_train ? "train" : (rank < n_train + n_val ? "val" : "test");
  }

  for (int i = 0; i < cfg.models; ++i) {
    auto& t = trained[static_cast<size_t>(i)];
    ModelRecord rec;
    rec.seed = t.seed;
    rec.failed = t.failed;
    rec.split = t.failed ? "" : split_of[static_cast<size_t>(i)];
    rec.epoch_accuracy = t.epoch_accuracy;
    for (auto& [epoch, vec] : t.checkpoints) {
      const std::string rel = "models/" + std::to_string(t.seed) + "/epoch_" +
                              std::to_string(epoch) + ".wts";
      write_wts(dir / rel, vec);
      CheckpointRecord ck;
      ck.epoch = epoch;
      ck.test_accuracy = epoch < static_cast<int>(t.epoch_accuracy.size())
                             ? t.epoch_accuracy[static_cast<size_t>(epoch)]
                             : 0.0;
      ck.path = rel;
      rec.checkpoints.push_back(std::move(ck));
    }
    manifest.models.push_back(std::move(rec));
  }
  write_manifest(dir, manifest);
  return manifest;
}

void write_manifest(const std::filesystem::path& dir, const ZooManifest& manifest) {
  nlohmann::json j;
  j["schema_version"] = manifest.schema_version;
  j["config"] = config_to_json(manifest.config);
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : manifest.models) {
    nlohmann::json rec{{"seed", m.seed},
                       {"failed", m.failed},
                       {"split", m.split},
                       {"epoch_accuracy", m.epoch_accuracy}};
    nlohmann::json cks = nlohmann::json::array();
    for (const auto& c : m.checkpoints) {
      cks.push_back({{"epoch", c.epoch}, {"test_accuracy", c.test_accuracy}, {"path", c.path}});
    }
    rec["checkpoints"] = std::move(cks);
    models.push_back(std::move(rec));
  }
  j["models"] = std::move(models);
  atomic_write(dir / "manifest.json", j.dump(2));
}

ZooManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw MissingArtifactError("no manifest.json in " + dir.string() +
                                      " (produce it with 'zoo gen')");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  ZooManifest manifest;
  manifest.schema_version = j.at("schema_version").get<int>();
  if (manifest.schema_version != 1) {
    throw FormatError("manifest.json: unsupported schema version " +
                      std::to_string(manifest.schema_version));
  }
  manifest.config = config_from_json(j.at("config"));
  for (const auto& rec : j.at("models")) {
    ModelRecord m;
    m.seed = rec.at("seed").get<uint64_t>();
    m.failed = rec.at("failed").get<bool>();
    m.split = rec.at("split").get<std::string>();
    m.epoch_accuracy = rec.at("epoch_accuracy").get<std::vector<double>>();
    for (const auto& c : rec.at("checkpoints")) {
      CheckpointRecord ck;
      ck.epoch = c.at("epoch").get<int>();
      ck.test_accuracy = c.at("test_accuracy").get<double>();
      ck.path = c.at("path").get<std::string>();
      m.checkpoints.push_back(std::move(ck));
    }
    manifest.models.push_back(std::move(m));
  }
  return manifest;
}

ZooVectors load_split_vectors(const std::filesystem::path& dir, const ZooManifest& manifest,
                              const std::string& split, const std::vector<int>& epochs) {
  ZooVectors out;
  for (const auto* m : manifest.split_models(split)) {
    for (const auto& ck : m->checkpoints) {
      if (!epochs.empty() &&
          std::find(epochs.begin(), epochs.end(), ck.epoch) == epochs.end()) {
        continue;
      }
      out.vectors.push_back(read_wts(dir / ck.path));
      out.accuracies.push_back(ck.test_accuracy);
      out.sources.push_back(ck.path);
    }
  }
  return out;
}

}  // namespace weightgen
