#include "weightgen/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"
#include "weightgen/errors.hpp"

namespace weightgen {

namespace {

using nlohmann::json;

/// Strict-object reader: every key must be consumed, every access is typed,
/// and errors carry the full path of the offending key.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  T get(const char* key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return typed<T>(key);
  }

  template <class T>
  T require(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": missing required key");
    return typed<T>(key);
  }

  json child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : json::object();
  }

  std::optional<json> optional_child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ConfigError(path_ + "." + it.key() + ": unknown key");
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  template <class T>
  T typed(const char* key) {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DatasetSpec parse_dataset(const json& j, const std::string& path) {
  StrictObject o(j, path);
  DatasetSpec ds;
  ds.type = o.get<std::string>("type", ds.type);
  if (ds.type != "synth" && ds.type != "idx") {
    throw ConfigError(path + ".type: must be 'synth' or 'idx'");
  }
  ds.name = o.get<std::string>("name", ds.type == "synth" ? "synth" : "mnist");
  ds.seed = o.get<uint64_t>("seed", ds.seed);
  ds.classes = o.get<int>("classes", ds.classes);
  ds.channels = o.get<int>("channels", ds.channels);
  ds.train_n = o.get<int64_t>("train_n", ds.train_n);
  ds.test_n = o.get<int64_t>("test_n", ds.test_n);
  ds.dir = o.get<std::string>("dir", ds.name);
  ds.train_subset = o.get<int64_t>("train_subset", ds.train_subset);
  ds.subset_seed = o.get<uint64_t>("subset_seed", ds.subset_seed);
  o.finish();
  if (ds.channels != 1 && ds.channels != 3) {
    throw ConfigError(path + ".channels: must be 1 or 3");
  }
  return ds;
}

json dataset_to_json(const DatasetSpec& ds) {
  return json{{"type", ds.type},
              {"name", ds.name},
              {"seed", ds.seed},
              {"classes", ds.classes},
              {"channels", ds.channels},
              {"train_n", ds.train_n},
              {"test_n", ds.test_n},
              {"dir", ds.dir},
              {"train_subset", ds.train_subset},
              {"subset_seed", ds.subset_seed}};
}

ZooConfig parse_zoo(const json& j, const std::string& path, const DatasetSpec& ds) {
  StrictObject o(j, path);
  ZooConfig z;
  z.dataset = ds.name;
  z.input_channels = ds.channels;
  apply_dataset_defaults(z);  // Table-4 row for the dataset, then overrides
  z.input_channels = ds.channels;
  if (o.has("activation")) z.activation = activation_from_string(o.require<std::string>("activation"));
  else o.get<std::string>("activation", "");
  if (o.has("init")) z.init = init_from_string(o.require<std::string>("init"));
  else o.get<std::string>("init", "");
  z.weight_decay = o.get<float>("weight_decay", z.weight_decay);
  z.lr = o.get<float>("lr", z.lr);
  z.optimizer = o.get<std::string>("optimizer", z.optimizer);
  if (z.optimizer != "adam") throw ConfigError(path + ".optimizer: only 'adam' is supported");
  z.uniform_range = o.get<float>("uniform_range", z.uniform_range);
  z.batch_size = o.get<int>("batch_size", z.batch_size);
  z.epochs = o.get<int>("epochs", z.epochs);
  z.checkpoint_epochs = o.get<std::vector<int>>("checkpoint_epochs", z.checkpoint_epochs);
  z.models = o.get<int>("M", z.models);
  z.base_seed = o.get<uint64_t>("base_seed", z.base_seed);
  z.split_seed = o.get<uint64_t>("split_seed", z.split_seed);
  z.data_seed = o.get<uint64_t>("data_seed", z.data_seed);
  z.train_subset = o.get<int64_t>("train_subset", z.train_subset);
  z.test_subset = o.get<int64_t>("test_subset", z.test_subset);
  o.finish();
  if (z.models < 10) throw ConfigError(path + ".M: need at least 10 models");
  return z;
}

json zoo_to_json(const ZooConfig& z) {
  return json{{"activation", to_string(z.activation)},
              {"init", to_string(z.init)},
              {"weight_decay", z.weight_decay},
              {"lr", z.lr},
              {"optimizer", z.optimizer},
              {"uniform_range", z.uniform_range},
              {"batch_size", z.batch_size},
              {"epochs", z.epochs},
              {"checkpoint_epochs", z.checkpoint_epochs},
              {"M", z.models},
              {"base_seed", z.base_seed},
              {"split_seed", z.split_seed},
              {"data_seed", z.data_seed},
              {"train_subset", z.train_subset},
              {"test_subset", z.test_subset}};
}

AeConfig parse_ae(const json& j, const std::string& path) {
  StrictObject o(j, path);
  AeConfig a;  // desk-scale defaults
  a.d_token = o.get<int>("d_token", a.d_token);
  a.d_hidden = o.get<int>("d_hidden", a.d_hidden);
  a.n_layers = o.get<int>("n_layers", a.n_layers);
  a.n_heads = o.get<int>("n_heads", a.n_heads);
  a.d_z = o.get<int>("d_z", a.d_z);
  a.compression = o.get<std::string>("compression", a.compression);
  a.dropout = o.get<float>("dropout", a.dropout);
  a.weight_decay = o.get<float>("weight_decay", a.weight_decay);
  a.lr = o.get<float>("lr", a.lr);
  a.beta = o.get<float>("beta", a.beta);
  a.epochs = o.get<int>("epochs", a.epochs);
  a.batch_size = o.get<int>("batch_size", a.batch_size);
  a.lwln = o.get<bool>("lwln", a.lwln);
  a.temperature = o.get<float>("temperature", a.temperature);
  a.erase_fraction = o.get<float>("erase_fraction", a.erase_fraction);
  a.val_every = o.get<int>("val_every", a.val_every);
  a.seed = o.get<uint64_t>("seed", a.seed);
  o.finish();
  a.validate();
  return a;
}

json ae_to_json(const AeConfig& a) {
  return json{{"d_token", a.d_token},
              {"d_hidden", a.d_hidden},
              {"n_layers", a.n_layers},
              {"n_heads", a.n_heads},
              {"d_z", a.d_z},
              {"compression", a.compression},
              {"dropout", a.dropout},
              {"weight_decay", a.weight_decay},
              {"lr", a.lr},
              {"beta", a.beta},
              {"epochs", a.epochs},
              {"batch_size", a.batch_size},
              {"lwln", a.lwln},
              {"temperature", a.temperature},
              {"erase_fraction", a.erase_fraction},
              {"val_every", a.val_every},
              {"seed", a.seed}};
}

const std::set<std::string> kMethods = {"uniform", "kde",   "kde30", "counterfactual",
                                        "neigh",   "neigh30", "gan",   "gan30"};

SamplerSpec parse_sampler(const json& j, const std::string& path) {
  StrictObject o(j, path);
  SamplerSpec s;
  s.method = o.require<std::string>("method");
  if (!kMethods.contains(s.method)) {
    throw ConfigError(path + ".method: unknown sampling method '" + s.method + "'");
  }
  s.n = o.get<int>("n", s.n);
  s.seed = o.get<uint64_t>("seed", s.seed);
  s.bandwidth = o.get<float>("bandwidth", s.bandwidth);
  s.quantile = o.get<float>("quantile", s.quantile);
  if (auto nj = o.optional_child("neighbor")) {
    StrictObject no(*nj, path + ".neighbor");
    s.neighbor.low_dim = no.get<int>("d", s.neighbor.low_dim);
    s.neighbor.hidden = no.get<int>("hidden", s.neighbor.hidden);
    s.neighbor.knn = no.get<int>("knn", s.neighbor.knn);
    s.neighbor.epochs = no.get<int>("epochs", s.neighbor.epochs);
    s.neighbor.lr = no.get<float>("lr", s.neighbor.lr);
    s.neighbor.seed = no.get<uint64_t>("seed", s.neighbor.seed);
    no.finish();
  }
  if (auto gj = o.optional_child("gan")) {
    StrictObject go(*gj, path + ".gan");
    s.gan.noise_dim = go.get<int>("noise_dim", s.gan.noise_dim);
    s.gan.lr_generator = go.get<float>("lr_generator", s.gan.lr_generator);
    s.gan.lr_discriminator = go.get<float>("lr_discriminator", s.gan.lr_discriminator);
    s.gan.epochs = go.get<int>("epochs", s.gan.epochs);
    s.gan.batch_size = go.get<int>("batch_size", s.gan.batch_size);
    s.gan.seed = go.get<uint64_t>("seed", s.gan.seed);
    go.finish();
  }
  o.finish();
  return s;
}

json sampler_to_json(const SamplerSpec& s) {
  return json{{"method", s.method},
              {"n", s.n},
              {"seed", s.seed},
              {"bandwidth", s.bandwidth},
              {"quantile", s.quantile},
              {"neighbor",
               {{"d", s.neighbor.low_dim},
                {"hidden", s.neighbor.hidden},
                {"knn", s.neighbor.knn},
                {"epochs", s.neighbor.epochs},
                {"lr", s.neighbor.lr},
                {"seed", s.neighbor.seed}}},
              {"gan",
               {{"noise_dim", s.gan.noise_dim},
                {"lr_generator", s.gan.lr_generator},
                {"lr_discriminator", s.gan.lr_discriminator},
                {"epochs", s.gan.epochs},
                {"batch_size", s.gan.batch_size},
                {"seed", s.gan.seed}}}};
}

EvalPlan parse_eval(const json& j, const std::string& path) {
  StrictObject o(j, path);
  EvalPlan e;
  e.finetune_epochs = o.get<int>("finetune_epochs", e.finetune_epochs);
  e.ensemble_sizes = o.get<std::vector<int>>("ensemble_sizes", e.ensemble_sizes);
  e.ensemble_trials = o.get<int>("ensemble_trials", e.ensemble_trials);
  e.population = o.get<int>("population", e.population);
  e.finetune_train_n = o.get<int64_t>("finetune_train_n", e.finetune_train_n);
  e.seed = o.get<uint64_t>("seed", e.seed);
  if (auto tj = o.optional_child("transfer_target")) {
    e.transfer_target = parse_dataset(*tj, path + ".transfer_target");
  }
  o.finish();
  return e;
}

json eval_to_json(const EvalPlan& e) {
  json j{{"finetune_epochs", e.finetune_epochs},
         {"ensemble_sizes", e.ensemble_sizes},
         {"ensemble_trials", e.ensemble_trials},
         {"population", e.population},
         {"finetune_train_n", e.finetune_train_n},
         {"seed", e.seed}};
  if (e.transfer_target) j["transfer_target"] = dataset_to_json(*e.transfer_target);
  return j;
}

}  // namespace

float SamplerSpec::top_fraction() const {
  return method.ends_with("30") ? 0.3f : 1.0f;
}

bool SamplerSpec::needs_kde() const {
  return method == "kde" || method == "kde30" || method == "counterfactual";
}

ImageDataset DatasetSpec::load(const std::string& split,
                               const std::filesystem::path& root) const {
  if (type == "synth") {
    const int64_t n = split == "train" ? train_n : test_n;
    auto ds = synth_dataset(seed, n, classes, channels, split);
    ds.name = name;
    return ds;
  }
  auto ds = load_idx_dataset(root / dir, split, channels, name);
  if (split == "train" && train_subset > 0 && train_subset < ds.size()) {
    ds = subset(ds, train_subset, subset_seed);
  }
  return ds;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  StrictObject o(j, "config");
  ExperimentConfig cfg;
  cfg.schema_version = o.get<int>("schema_version", 1);
  if (cfg.schema_version != 1) {
    throw ConfigError("config.schema_version: unsupported version " +
                      std::to_string(cfg.schema_version));
  }
  cfg.output_dir = o.get<std::string>("output_dir", cfg.output_dir);
  cfg.seed = o.get<uint64_t>("seed", cfg.seed);
  cfg.dataset = parse_dataset(o.child("dataset"), "config.dataset");
  cfg.zoo = parse_zoo(o.child("zoo"), "config.zoo", cfg.dataset);
  cfg.ae = parse_ae(o.child("ae"), "config.ae");
  if (auto sj = o.optional_child("samplers")) {
    if (!sj->is_array()) throw ConfigError("config.samplers: expected an array");
    int idx = 0;
    for (const auto& item : *sj) {
      cfg.samplers.push_back(parse_sampler(item, "config.samplers[" + std::to_string(idx) + "]"));
      ++idx;
    }
  }
  cfg.eval = parse_eval(o.child("eval"), "config.eval");
  o.finish();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["dataset"] = dataset_to_json(cfg.dataset);
  j["zoo"] = zoo_to_json(cfg.zoo);
  j["ae"] = ae_to_json(cfg.ae);
  json samplers = json::array();
  for (const auto& s : cfg.samplers) samplers.push_back(sampler_to_json(s));
  j["samplers"] = std::move(samplers);
  j["eval"] = eval_to_json(cfg.eval);
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canon = serialize_config(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canon) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path data_root() {
  if (const char* env = std::getenv("WEIGHTGEN_DATA_DIR")) return env;
  return "data";
}

}  // namespace weightgen
