#include "weightgen/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "weightgen/errors.hpp"
#include "weightgen/ops.hpp"
#include "weightgen/optim.hpp"

namespace weightgen {

AnchorSet select_anchors(const EmbeddingMatrix& embeddings, std::span<const double> accuracies,
                         float top_fraction) {
  if (top_fraction <= 0.0f || top_fraction > 1.0f) {
    throw ConfigError("select_anchors: top_fraction must be in (0, 1]");
  }
  const int64_t m = embeddings.count();
  if (m == 0 || static_cast<int64_t>(accuracies.size()) != m) {
    throw InputError("select_anchors: accuracy count " + std::to_string(accuracies.size()) +
                     " does not match " + std::to_string(m) + " embeddings");
  }
  AnchorSet out;
  out.embeddings.dim = embeddings.dim;
  out.top_fraction = top_fraction;
  if (top_fraction == 1.0f) {
    out.embeddings = embeddings;
    out.accuracies.assign(accuracies.begin(), accuracies.end());
    return out;
  }
  std::vector<double> sorted(accuracies.begin(), accuracies.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Guard against float->double promotion noise (0.3f * 10 ceiling to 4).
  const double raw_keep = static_cast<double>(top_fraction) * static_cast<double>(m);
  const auto keep = static_cast<size_t>(std::ceil(raw_keep * (1.0 - 1e-6)));
  const double threshold = sorted[keep - 1];
  for (int64_t i = 0; i < m; ++i) {
    if (accuracies[static_cast<size_t>(i)] >= threshold) {
      const float* row = embeddings.rows.data() + i * embeddings.dim;
      out.embeddings.rows.insert(out.embeddings.rows.end(), row, row + embeddings.dim);
      out.accuracies.push_back(accuracies[static_cast<size_t>(i)]);
    }
  }
  if (out.accuracies.empty()) throw InputError("select_anchors: empty anchor set");
  return out;
}

EmbeddingMatrix sample_uniform(int dim, int n, uint64_t seed) {
  RngStream rng(seed);
  EmbeddingMatrix out;
  out.dim = dim;
  out.rows.resize(static_cast<size_t>(dim) * n);
  for (auto& v : out.rows) v = rng.uniform(-1.0f, 1.0f);
  return out;
}

// ---------------------------------------------------------------------------
// KDE
// ---------------------------------------------------------------------------

namespace {

double quantile_sorted(const std::vector<double>& sorted_vals, double q) {
  if (sorted_vals.empty()) throw InputError("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted_vals.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const auto hi = static_cast<size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac;
}

constexpr float kMinBandwidth = 0.01f;  // keeps densities resolvable on the audit grid

}  // namespace

KdeModel kde_fit(const AnchorSet& anchors, float h_override) {
  const int64_t m = anchors.embeddings.count();
  if (m < 2) throw InputError("kde_fit: need at least 2 anchors, got " + std::to_string(m));
  KdeModel model;
  model.dim = anchors.embeddings.dim;
  model.anchor_count = static_cast<int>(m);
  model.anchors = anchors.embeddings.rows;
  model.bandwidth.resize(static_cast<size_t>(model.dim));
  if (h_override != 0.0f) {
    if (h_override < 0.0f) throw ConfigError("kde_fit: bandwidth must be positive");
    std::fill(model.bandwidth.begin(), model.bandwidth.end(), h_override);
    return model;
  }
  const double m_factor = std::pow(static_cast<double>(m), -0.2);
  std::vector<double> column(static_cast<size_t>(m));
  for (int d = 0; d < model.dim; ++d) {
    for (int64_t i = 0; i < m; ++i) column[static_cast<size_t>(i)] = model.anchor(static_cast<int>(i), d);
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : column) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(m - 1));
    std::sort(column.begin(), column.end());
    const double iqr = quantile_sorted(column, 0.75) - quantile_sorted(column, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = sd;  // IQR can collapse on discrete-ish dims
    double h = 0.9 * spread * m_factor;
    model.bandwidth[static_cast<size_t>(d)] =
        std::max(static_cast<float>(h), kMinBandwidth);
  }
  return model;
}

double kde_density(const KdeModel& model, int dim, double x) {
  if (dim < 0 || dim >= model.dim) throw InputError("kde_density: dimension out of range");
  const double h = model.bandwidth[static_cast<size_t>(dim)];
  const double norm = 1.0 / (static_cast<double>(model.anchor_count) * h *
                             std::sqrt(2.0 * std::numbers::pi));
  double acc = 0.0;
  for (int i = 0; i < model.anchor_count; ++i) {
    const double t = (x - model.anchor(i, dim)) / h;
    acc += std::exp(-0.5 * t * t);
  }
  return acc * norm;
}

EmbeddingMatrix kde_sample(const KdeModel& model, int n, uint64_t seed) {
  RngStream rng(seed);
  EmbeddingMatrix out;
  out.dim = model.dim;
  out.rows.resize(static_cast<size_t>(model.dim) * n);
  for (int s = 0; s < n; ++s) {
    float* row = out.rows.data() + static_cast<size_t>(s) * model.dim;
    for (int d = 0; d < model.dim; ++d) {
      const int idx = static_cast<int>(rng.below(static_cast<uint64_t>(model.anchor_count)));
      const float h = model.bandwidth[static_cast<size_t>(d)];
      row[d] = std::clamp(model.anchor(idx, d) + h * rng.normal(), -1.0f, 1.0f);
    }
  }
  return out;
}

EmbeddingMatrix sample_counterfactual(const KdeModel& model, int n, float quantile,
                                      uint64_t seed) {
  if (quantile <= 0.0f || quantile >= 0.5f) {
    throw ConfigError("sample_counterfactual: quantile must be in (0, 0.5)");
  }
  RngStream rng(seed);
  // Per-dimension density threshold: the q-quantile of anchor densities.
  std::vector<double> thresholds(static_cast<size_t>(model.dim));
  std::vector<double> densities(static_cast<size_t>(model.anchor_count));
  for (int d = 0; d < model.dim; ++d) {
    for (int i = 0; i < model.anchor_count; ++i) {
      densities[static_cast<size_t>(i)] = kde_density(model, d, model.anchor(i, d));
    }
    std::sort(densities.begin(), densities.end());
    thresholds[static_cast<size_t>(d)] = quantile_sorted(densities, quantile);
  }
  EmbeddingMatrix out;
  out.dim = model.dim;
  out.rows.resize(static_cast<size_t>(model.dim) * n);
  constexpr int kMaxProposals = 10000;
  for (int s = 0; s < n; ++s) {
    float* row = out.rows.data() + static_cast<size_t>(s) * model.dim;
    for (int d = 0; d < model.dim; ++d) {
      bool accepted = false;
      for (int attempt = 0; attempt < kMaxProposals; ++attempt) {
        const float x = rng.uniform(-1.0f, 1.0f);
        if (kde_density(model, d, x) < thresholds[static_cast<size_t>(d)]) {
          row[d] = x;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        throw SamplingError("sample_counterfactual: rejection cap exhausted on dimension " +
                            std::to_string(d));
      }
    }
  }
  return out;
}

void save_kde(const std::filesystem::path& path, const KdeModel& model) {
  nlohmann::json j;
  j["kind"] = "kde";
  j["schema_version"] = 1;
  j["dim"] = model.dim;
  j["anchor_count"] = model.anchor_count;
  j["bandwidth"] = model.bandwidth;
  j["anchors"] = model.anchors;
  atomic_write(path, j.dump());
}

KdeModel load_kde(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (j.value("kind", "") != "kde") throw FormatError(path.string() + ": not a kde checkpoint");
  KdeModel model;
  model.dim = j.at("dim").get<int>();
  model.anchor_count = j.at("anchor_count").get<int>();
  model.bandwidth = j.at("bandwidth").get<std::vector<float>>();
  model.anchors = j.at("anchors").get<std::vector<float>>();
  return model;
}

// ---------------------------------------------------------------------------
// Neighbor map
// ---------------------------------------------------------------------------

namespace {

Tensor rows_to_tensor(const EmbeddingMatrix& m) {
  return Tensor::from({static_cast<int>(m.count()), m.dim}, m.rows);
}

std::vector<std::vector<int>> knn_indices(const EmbeddingMatrix& anchors, int k) {
  const int m = static_cast<int>(anchors.count());
  const int d = anchors.dim;
  std::vector<std::vector<int>> out(static_cast<size_t>(m));
  std::vector<std::pair<double, int>> dist(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const float* a = anchors.rows.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < m; ++j) {
      const float* b = anchors.rows.data() + static_cast<size_t>(j) * d;
      double acc = 0.0;
      for (int t = 0; t < d; ++t) {
        acc += (static_cast<double>(a[t]) - b[t]) * (static_cast<double>(a[t]) - b[t]);
      }
      dist[static_cast<size_t>(j)] = {acc, j};
    }
    std::sort(dist.begin(), dist.end());
    for (int j = 1; j <= k && j < m; ++j) {  // skip self at rank 0
      out[static_cast<size_t>(i)].push_back(dist[static_cast<size_t>(j)].second);
    }
  }
  return out;
}

}  // namespace

NeighborMap NeighborMap::fit(const AnchorSet& anchors, const NeighborMapConfig& cfg) {
  const int64_t m = anchors.embeddings.count();
  if (m < 20) throw InputError("neighbor map: need at least 20 anchors, got " + std::to_string(m));
  NeighborMap map;
  map.cfg_ = cfg;
  map.dim_ = anchors.embeddings.dim;
  RngStream root(cfg.seed);
  auto erng = root.fork("enc");
  auto drng = root.fork("dec");
  map.enc_ = Mlp::make({map.dim_, cfg.hidden, cfg.low_dim}, Mlp::Act::Relu, erng);
  map.dec_ = Mlp::make({cfg.low_dim, cfg.hidden, map.dim_}, Mlp::Act::Relu, drng);

  ParamList plist;
  map.enc_.collect("enc", plist);
  map.dec_.collect("dec", plist);
  Adam opt(plist.tensors, {.lr = cfg.lr}, plist.names);

  const auto neighbors = knn_indices(anchors.embeddings, cfg.knn);
  std::vector<size_t> order(static_cast<size_t>(m));
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int d = map.dim_;
  auto gather_rows = [&](const std::vector<int>& idx) {
    Tensor t = Tensor::zeros({static_cast<int>(idx.size()), d});
    auto tv = t.values();
    for (size_t i = 0; i < idx.size(); ++i) {
      const float* src = anchors.embeddings.rows.data() + static_cast<size_t>(idx[i]) * d;
      std::copy(src, src + d, tv.data() + i * d);
    }
    return t;
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto srng = root.fork("epoch" + std::to_string(epoch));
    srng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<int> batch_idx, nbr_idx, far_idx;
      for (size_t i = start; i < end; ++i) {
        const int a = static_cast<int>(order[i]);
        batch_idx.push_back(a);
        const auto& nb = neighbors[static_cast<size_t>(a)];
        nbr_idx.push_back(nb[static_cast<size_t>(srng.below(nb.size()))]);
        far_idx.push_back(static_cast<int>(srng.below(static_cast<uint64_t>(m))));
      }
      Tensor x = gather_rows(batch_idx);
      Tensor low = map.enc_(x);
      Tensor recon = tanh(map.dec_(low));
      Tensor loss = mse_loss(recon, x);

      // neighborhood shaping: pull kNN pairs together, push random rows apart
      Tensor low_nbr = map.enc_(gather_rows(nbr_idx));
      Tensor low_far = map.enc_(gather_rows(far_idx));
      Tensor pull = mse_loss(low, low_nbr);
      Tensor d_far = sub(low, low_far);
      Tensor far_sq = mean_all(mul(d_far, d_far));
      // hinge: encourage squared distance of at least push_margin
      Tensor push = relu(sub(Tensor::scalar(cfg.push_margin), far_sq));
      loss = add(loss, scale(add(pull, push), cfg.neighbor_weight));

      opt.zero_grad();
      backward(loss);
      opt.step();
    }
  }

  // Round-trip validation on the anchors.
  EmbeddingMatrix lows = map.forward_batch(anchors.embeddings);
  EmbeddingMatrix back = map.inverse_batch(lows);
  std::vector<double> rel(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    double num = 0.0, den = 0.0;
    for (int t = 0; t < d; ++t) {
      const double a = anchors.embeddings.rows[static_cast<size_t>(i) * d + t];
      const double b = back.rows[static_cast<size_t>(i) * d + t];
      num += (a - b) * (a - b);
      den += a * a;
    }
    rel[static_cast<size_t>(i)] = den > 0 ? std::sqrt(num / den) : 0.0;
  }
  std::sort(rel.begin(), rel.end());
  map.fit_error_ = rel[rel.size() / 2];
  if (map.fit_error_ > cfg.max_median_rel_error) {
    throw NumericError("neighbor map: round-trip median relative error " +
                       std::to_string(map.fit_error_) + " exceeds " +
                       std::to_string(cfg.max_median_rel_error));
  }
  map.box_lo_.assign(static_cast<size_t>(cfg.low_dim), std::numeric_limits<float>::max());
  map.box_hi_.assign(static_cast<size_t>(cfg.low_dim), std::numeric_limits<float>::lowest());
  for (int64_t i = 0; i < lows.count(); ++i) {
    for (int t = 0; t < cfg.low_dim; ++t) {
      const float v = lows.rows[static_cast<size_t>(i) * cfg.low_dim + t];
      map.box_lo_[static_cast<size_t>(t)] = std::min(map.box_lo_[static_cast<size_t>(t)], v);
      map.box_hi_[static_cast<size_t>(t)] = std::max(map.box_hi_[static_cast<size_t>(t)], v);
    }
  }
  return map;
}

std::vector<float> NeighborMap::forward(std::span<const float> z) const {
  EmbeddingMatrix m;
  m.dim = dim_;
  m.rows.assign(z.begin(), z.end());
  auto out = forward_batch(m);
  return out.rows;
}

std::vector<float> NeighborMap::inverse(std::span<const float> low) const {
  EmbeddingMatrix m;
  m.dim = cfg_.low_dim;
  m.rows.assign(low.begin(), low.end());
  auto out = inverse_batch(m);
  return out.rows;
}

EmbeddingMatrix NeighborMap::forward_batch(const EmbeddingMatrix& zs) const {
  if (zs.dim != dim_) throw InputError("neighbor map: wrong input dimension");
  NoGradGuard ng;
  Tensor low = enc_(rows_to_tensor(zs));
  EmbeddingMatrix out;
  out.dim = cfg_.low_dim;
  out.rows.assign(low.values().begin(), low.values().end());
  return out;
}

EmbeddingMatrix NeighborMap::inverse_batch(const EmbeddingMatrix& lows) const {
  if (lows.dim != cfg_.low_dim) throw InputError("neighbor map: wrong low-d dimension");
  NoGradGuard ng;
  Tensor high = tanh(dec_(rows_to_tensor(lows)));
  EmbeddingMatrix out;
  out.dim = dim_;
  out.rows.assign(high.values().begin(), high.values().end());
  return out;
}

EmbeddingMatrix sample_neighbor(const NeighborMap& map, int n, uint64_t seed) {
  const int ld = map.low_dim();
  const auto& lo = map.box_lo();
  const auto& hi = map.box_hi();
  if (lo.empty()) throw InputError("sample_neighbor: map has no fitted anchor box");
  RngStream rng(seed);
  EmbeddingMatrix draws;
  draws.dim = ld;
  draws.rows.resize(static_cast<size_t>(ld) * n);
  for (int s = 0; s < n; ++s) {
    for (int d = 0; d < ld; ++d) {
      draws.rows[static_cast<size_t>(s) * ld + d] =
          rng.uniform(lo[static_cast<size_t>(d)], hi[static_cast<size_t>(d)]);
    }
  }
  return map.inverse_batch(draws);
}

void NeighborMap::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["kind"] = "neighbor_map";
  header["schema_version"] = 1;
  header["dim"] = dim_;
  header["fit_median_rel_error"] = fit_error_;
  header["box_lo"] = box_lo_;
  header["box_hi"] = box_hi_;
  header["config"] = {{"low_dim", cfg_.low_dim},   {"hidden", cfg_.hidden},
                      {"knn", cfg_.knn},           {"epochs", cfg_.epochs},
                      {"batch_size", cfg_.batch_size},
                      {"lr", cfg_.lr},             {"neighbor_weight", cfg_.neighbor_weight},
                      {"push_margin", cfg_.push_margin},
                      {"max_median_rel_error", cfg_.max_median_rel_error},
                      {"seed", cfg_.seed}};
  BlobCheckpoint ckpt;
  ckpt.header_json = header.dump();
  ParamList plist;
  enc_.collect("enc", plist);
  dec_.collect("dec", plist);
  for (size_t i = 0; i < plist.tensors.size(); ++i) ckpt.add(plist.names[i], plist.tensors[i]);
  write_wza(path, ckpt);
}

NeighborMap NeighborMap::load(const std::filesystem::path& path) {
  BlobCheckpoint ckpt = read_wza(path);
  nlohmann::json header = nlohmann::json::parse(ckpt.header_json);
  if (header.value("kind", "") != "neighbor_map") {
    throw FormatError(path.string() + ": not a neighbor-map checkpoint");
  }
  NeighborMap map;
  const auto& jc = header.at("config");
  map.cfg_.low_dim = jc.at("low_dim").get<int>();
  map.cfg_.hidden = jc.at("hidden").get<int>();
  map.cfg_.knn = jc.at("knn").get<int>();
  map.cfg_.epochs = jc.at("epochs").get<int>();
  map.cfg_.batch_size = jc.at("batch_size").get<int>();
  map.cfg_.lr = jc.at("lr").get<float>();
  map.cfg_.neighbor_weight = jc.at("neighbor_weight").get<float>();
  map.cfg_.push_margin = jc.at("push_margin").get<float>();
  map.cfg_.max_median_rel_error = jc.at("max_median_rel_error").get<float>();
  map.cfg_.seed = jc.at("seed").get<uint64_t>();
  map.dim_ = header.at("dim").get<int>();
  map.fit_error_ = header.at("fit_median_rel_error").get<double>();
  map.box_lo_ = header.at("box_lo").get<std::vector<float>>();
  map.box_hi_ = header.at("box_hi").get<std::vector<float>>();
  RngStream root(map.cfg_.seed);
  auto erng = root.fork("enc");
  auto drng = root.fork("dec");
  map.enc_ = Mlp::make({map.dim_, map.cfg_.hidden, map.cfg_.low_dim}, Mlp::Act::Relu, erng);
  map.dec_ = Mlp::make({map.cfg_.low_dim, map.cfg_.hidden, map.dim_}, Mlp::Act::Relu, drng);
  ParamList plist;
  map.enc_.collect("enc", plist);
  map.dec_.collect("dec", plist);
  for (size_t i = 0; i < plist.tensors.size(); ++i) {
    const auto& vals = ckpt.get(plist.names[i]);
    std::copy(vals.begin(), vals.end(), plist.tensors[i].values().begin());
  }
  return map;
}

// ---------------------------------------------------------------------------
// Latent GAN
// ---------------------------------------------------------------------------

Tensor LatentGan::generate(const Tensor& noise) const { return tanh(gen_(noise)); }

Tensor LatentGan::discriminate(const Tensor& x, bool update_power_iteration) {
  Tensor h = x;
  for (size_t l = 0; l < disc_.size(); ++l) {
    const auto& layer = disc_[l];
    auto& u = sn_u_[l];
    auto& v = sn_v_[l];
    const int out_dim = layer.w.dim(0), in_dim = layer.w.dim(1);
    if (update_power_iteration) {
      // one power-iteration step on the raw weight, outside the graph
      const auto wv = layer.w.values();
      auto matvec_t = [&](const std::vector<float>& uu, std::vector<float>& vv) {
        for (int j = 0; j < in_dim; ++j) vv[static_cast<size_t>(j)] = 0.0f;
        for (int i = 0; i < out_dim; ++i) {
          const float ui = uu[static_cast<size_t>(i)];
          const float* row = wv.data() + static_cast<size_t>(i) * in_dim;
          for (int j = 0; j < in_dim; ++j) vv[static_cast<size_t>(j)] += ui * row[j];
        }
      };
      auto matvec = [&](const std::vector<float>& vv, std::vector<float>& uu) {
        for (int i = 0; i < out_dim; ++i) {
          const float* row = wv.data() + static_cast<size_t>(i) * in_dim;
          float acc = 0.0f;
          for (int j = 0; j < in_dim; ++j) acc += row[j] * vv[static_cast<size_t>(j)];
          uu[static_cast<size_t>(i)] = acc;
        }
      };
      auto normalize = [](std::vector<float>& vec) {
        double norm = 0.0;
        for (float x2 : vec) norm += static_cast<double>(x2) * x2;
        const float inv = static_cast<float>(1.0 / std::max(std::sqrt(norm), 1e-12));
        for (float& x2 : vec) x2 *= inv;
      };
      matvec_t(u, v);
      normalize(v);
      matvec(v, u);
      normalize(u);
    }
    // sigma = u^T W v computed in-graph so gradients see the normalization
    Tensor ut = Tensor::from({1, out_dim}, std::vector<float>(u));
    Tensor vt = Tensor::from({1, in_dim}, std::vector<float>(v));
    Tensor wv_row = linear(vt, layer.w, Tensor());          // [1, out]
    Tensor sigma = sum_all(mul(wv_row, ut));                // [1]
    Tensor w_sn = mul_scalar_tensor(layer.w, reciprocal(sigma));
    h = linear(h, w_sn, layer.b);
    if (l + 1 < disc_.size()) h = relu(h);
  }
  return h;
}

LatentGan LatentGan::train(const AnchorSet& anchors, const GanConfig& cfg) {
  const int64_t m = anchors.embeddings.count();
  if (m < 32) throw InputError("latent gan: need at least 32 anchors, got " + std::to_string(m));
  LatentGan gan;
  gan.cfg_ = cfg;
  gan.dim_ = anchors.embeddings.dim;
  RngStream root(cfg.seed);
  auto grng = root.fork("gen");
  gan.gen_ = Mlp::make({cfg.noise_dim, 128, 256, 512, gan.dim_}, Mlp::Act::Relu, grng);
  auto drng = root.fork("disc");
  const std::vector<int> disc_dims = {gan.dim_, 1024, 512, 256, 1};
  for (size_t i = 0; i + 1 < disc_dims.size(); ++i) {
    gan.disc_.push_back(LinearLayer::kaiming(disc_dims[i], disc_dims[i + 1], drng));
    std::vector<float> u(static_cast<size_t>(disc_dims[i + 1]));
    std::vector<float> v(static_cast<size_t>(disc_dims[i]));
    for (auto& x : u) x = drng.normal();
    for (auto& x : v) x = drng.normal();
    gan.sn_u_.push_back(std::move(u));
    gan.sn_v_.push_back(std::move(v));
  }

  ParamList gen_params;
  gan.gen_.collect("gen", gen_params);
  Adam gen_opt(gen_params.tensors, {.lr = cfg.lr_generator}, gen_params.names);
  ParamList disc_params;
  for (size_t i = 0; i < gan.disc_.size(); ++i) {
    gan.disc_[i].collect("disc" + std::to_string(i), disc_params);
  }
  Adam disc_opt(disc_params.tensors, {.lr = cfg.lr_discriminator}, disc_params.names);

  std::vector<size_t> order(static_cast<size_t>(m));
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const int d = gan.dim_;

  auto snapshot_params = [&]() {
    std::vector<std::vector<float>> snap;
    for (const auto& t : gen_params.tensors) snap.emplace_back(t.values().begin(), t.values().end());
    return snap;
  };
  auto restore_params = [&](const std::vector<std::vector<float>>& snap) {
    for (size_t i = 0; i < snap.size(); ++i) {
      std::copy(snap[i].begin(), snap[i].end(), gen_params.tensors[i].values().begin());
    }
  };
  std::vector<std::vector<float>> last_good = snapshot_params();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto erng = root.fork("epoch" + std::to_string(epoch));
    erng.shuffle(order);
    bool nan_hit = false;
    for (size_t start = 0; start + 1 < order.size() && !nan_hit;
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const int bsz = static_cast<int>(end - start);
      Tensor real = Tensor::zeros({bsz, d});
      for (size_t i = start; i < end; ++i) {
        const float* src = anchors.embeddings.rows.data() + order[i] * d;
        std::copy(src, src + d, real.values().data() + (i - start) * d);
      }
      // discriminator step
      Tensor noise = Tensor::zeros({bsz, cfg.noise_dim});
      for (auto& x : noise.values()) x = erng.normal();
      Tensor fake;
      {
        NoGradGuard ng;
        fake = gan.generate(noise);
      }
      Tensor d_loss = add(bce_logits(gan.discriminate(real, true), 1.0f),
                          bce_logits(gan.discriminate(fake, false), 0.0f));
      if (!std::isfinite(d_loss.value())) {
        nan_hit = true;
        break;
      }
      disc_opt.zero_grad();
      backward(d_loss);
      disc_opt.step();

      // generator step (non-saturating objective)
      Tensor noise2 = Tensor::zeros({bsz, cfg.noise_dim});
      for (auto& x : noise2.values()) x = erng.normal();
      Tensor g_loss = bce_logits(gan.discriminate(gan.generate(noise2), false), 1.0f);
      if (!std::isfinite(g_loss.value())) {
        nan_hit = true;
        break;
      }
      gen_opt.zero_grad();
      disc_opt.zero_grad();  // discriminator grads from this pass are discarded
      backward(g_loss);
      gen_opt.step();
    }
    if (nan_hit) {
      restore_params(last_good);
      break;
    }
    last_good = snapshot_params();
  }
  return gan;
}

EmbeddingMatrix LatentGan::sample(int n, uint64_t seed) const {
  RngStream rng(seed);
  NoGradGuard ng;
  Tensor noise = Tensor::zeros({n, cfg_.noise_dim});
  for (auto& x : noise.values()) x = rng.normal();
  Tensor out = generate(noise);
  EmbeddingMatrix m;
  m.dim = dim_;
  m.rows.assign(out.values().begin(), out.values().end());
  return m;
}

void LatentGan::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["kind"] = "latent_gan";
  header["schema_version"] = 1;
  header["dim"] = dim_;
  header["config"] = {{"noise_dim", cfg_.noise_dim},
                      {"lr_generator", cfg_.lr_generator},
                      {"lr_discriminator", cfg_.lr_discriminator},
                      {"epochs", cfg_.epochs},
                      {"batch_size", cfg_.batch_size},
                      {"seed", cfg_.seed}};
  BlobCheckpoint ckpt;
  ckpt.header_json = header.dump();
  ParamList plist;
  gen_.collect("gen", plist);
  for (size_t i = 0; i < disc_.size(); ++i) disc_[i].collect("disc" + std::to_string(i), plist);
  for (size_t i = 0; i < plist.tensors.size(); ++i) ckpt.add(plist.names[i], plist.tensors[i]);
  for (size_t i = 0; i < sn_u_.size(); ++i) {
    ckpt.add_raw("sn_u" + std::to_string(i), {static_cast<int>(sn_u_[i].size())}, sn_u_[i]);
    ckpt.add_raw("sn_v" + std::to_string(i), {static_cast<int>(sn_v_[i].size())}, sn_v_[i]);
  }
  write_wza(path, ckpt);
}

LatentGan LatentGan::load(const std::filesystem::path& path) {
  BlobCheckpoint ckpt = read_wza(path);
  nlohmann::json header = nlohmann::json::parse(ckpt.header_json);
  if (header.value("kind", "") != "latent_gan") {
    throw FormatError(path.string() + ": not a latent-gan checkpoint");
  }
  LatentGan gan;
  const auto& jc = header.at("config");
  gan.cfg_.noise_dim = jc.at("noise_dim").get<int>();
  gan.cfg_.lr_generator = jc.at("lr_generator").get<float>();
  gan.cfg_.lr_discriminator = jc.at("lr_discriminator").get<float>();
  gan.cfg_.epochs = jc.at("epochs").get<int>();
  gan.cfg_.batch_size = jc.at("batch_size").get<int>();
  gan.cfg_.seed = jc.at("seed").get<uint64_t>();
  gan.dim_ = header.at("dim").get<int>();
  RngStream root(gan.cfg_.seed);
  auto grng = root.fork("gen");
  gan.gen_ = Mlp::make({gan.cfg_.noise_dim, 128, 256, 512, gan.dim_}, Mlp::Act::Relu, grng);
  auto drng2 = root.fork("disc");
  const std::vector<int> disc_dims = {gan.dim_, 1024, 512, 256, 1};
  for (size_t i = 0; i + 1 < disc_dims.size(); ++i) {
    gan.disc_.push_back(LinearLayer::kaiming(disc_dims[i], disc_dims[i + 1], drng2));
  }
  ParamList plist;
  gan.gen_.collect("gen", plist);
  for (size_t i = 0; i < gan.disc_.size(); ++i) {
    gan.disc_[i].collect("disc" + std::to_string(i), plist);
  }
  for (size_t i = 0; i < plist.tensors.size(); ++i) {
    const auto& vals = ckpt.get(plist.names[i]);
    std::copy(vals.begin(), vals.end(), plist.tensors[i].values().begin());
  }
  for (size_t i = 0; i < gan.disc_.size(); ++i) {
    gan.sn_u_.push_back(ckpt.get("sn_u" + std::to_string(i)));
    gan.sn_v_.push_back(ckpt.get("sn_v" + std::to_string(i)));
  }
  return gan;
}

}  // namespace weightgen
