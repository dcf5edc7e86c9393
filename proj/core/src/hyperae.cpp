#include "weightgen/hyperae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "weightgen/errors.hpp"
#include "weightgen/ops.hpp"
#include "weightgen/optim.hpp"

namespace weightgen {

void AeConfig::validate() const {
  if (d_hidden % n_heads != 0) {
    throw ConfigError("ae: d_hidden (" + std::to_string(d_hidden) +
                      ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
  }
  if (beta < 0.0f || beta > 1.0f) throw ConfigError("ae: beta must be in [0,1]");
  if (compression != "linear") throw ConfigError("ae: unknown compression '" + compression + "'");
  if (d_token <= 0 || d_z <= 0 || n_layers <= 0) throw ConfigError("ae: dimensions must be positive");
  if (temperature <= 0.0f) throw ConfigError("ae: temperature must be positive");
}

double loss_mse_value(const std::vector<WeightVector>& recon,
                      const std::vector<WeightVector>& orig) {
  if (recon.size() != orig.size() || recon.empty()) {
    throw InputError("loss_mse: mismatched or empty batches");
  }
  double acc = 0.0;
  int64_t count = 0;
  for (size_t i = 0; i < recon.size(); ++i) {
    if (recon[i].size() != orig[i].size()) throw ShapeError("loss_mse: vector length mismatch");
    for (size_t j = 0; j < recon[i].values.size(); ++j) {
      const double d = static_cast<double>(recon[i].values[j]) - orig[i].values[j];
      acc += d * d;
    }
    count += recon[i].size();
  }
  return acc / static_cast<double>(count);
}

double loss_lwln_value(const std::vector<WeightVector>& recon,
                       const std::vector<WeightVector>& orig, const LayerStats& stats) {
  if (recon.size() != orig.size() || recon.empty()) {
    throw InputError("loss_lwln: mismatched or empty batches");
  }
  const auto layout = orig.front().layout;
  if (stats.sigma.size() != layout->layers.size()) {
    throw InputError("loss_lwln: stats do not match layout");
  }
  double acc = 0.0;
  int64_t count = 0;
  for (size_t i = 0; i < recon.size(); ++i) {
    for (size_t l = 0; l < layout->layers.size(); ++l) {
      const auto& spec = layout->layers[l];
      const double inv_var = 1.0 / (static_cast<double>(stats.sigma[l]) * stats.sigma[l]);
      for (int64_t j = spec.offset; j < spec.offset + spec.extent; ++j) {
        const double d = static_cast<double>(recon[i].values[static_cast<size_t>(j)]) -
                         orig[i].values[static_cast<size_t>(j)];
        acc += d * d * inv_var;
      }
    }
    count += orig[i].size();
  }
  return acc / static_cast<double>(count);
}

double r_squared(const std::vector<WeightVector>& recon, const std::vector<WeightVector>& orig,
                 const WeightVector& train_mean) {
  if (recon.size() != orig.size() || recon.empty()) {
    throw InputError("r_squared: mismatched or empty sets");
  }
  double num = 0.0, denom = 0.0;
  for (size_t i = 0; i < recon.size(); ++i) {
    for (size_t j = 0; j < orig[i].values.size(); ++j) {
      const double dr = static_cast<double>(recon[i].values[j]) - orig[i].values[j];
      const double dm = static_cast<double>(train_mean.values[j]) - orig[i].values[j];
      num += dr * dr;
      denom += dm * dm;
    }
  }
  if (denom == 0.0) throw NumericError("r_squared: zero variance around the mean vector");
  return 1.0 - num / denom;
}

Tensor ntxent_loss(const Tensor& projections_2b, float temperature) {
  const int rows = projections_2b.dim(0);
  if (rows < 4 || rows % 2 != 0) {
    throw InputError("ntxent: need an even number of views >= 4, got " + std::to_string(rows));
  }
  const int half = rows / 2;
  Tensor pn = normalize_rows(projections_2b);
  Tensor sim = scale(linear(pn, pn, Tensor()), 1.0f / temperature);
  // mask self-similarity on the diagonal
  Tensor mask = Tensor::zeros({rows, rows});
  for (int i = 0; i < rows; ++i) {
    mask.values()[static_cast<size_t>(i) * rows + i] = -1e9f;
  }
  Tensor masked = add(sim, mask);
  std::vector<int> positives(static_cast<size_t>(rows));
  for (int i = 0; i < rows; ++i) positives[static_cast<size_t>(i)] = (i + half) % rows;
  return cross_entropy_logits(masked, positives);
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

HyperAe HyperAe::build(const AeConfig& cfg, std::shared_ptr<const LayerLayout> layout,
                       const LayerStats& stats) {
  cfg.validate();
  if (!layout) throw LayoutError("hyperae: null layout");
  if (stats.sigma.size() != layout->layers.size()) {
    throw ConfigError("hyperae: layer stats do not match the layout");
  }
  HyperAe ae;
  ae.cfg_ = cfg;
  ae.layout_ = std::move(layout);
  ae.stats_ = stats;
  RngStream root(cfg.seed);

  const int tokens = ae.layout_->token_count;
  for (size_t l = 0; l < ae.layout_->layers.size(); ++l) {
    auto rng = root.fork("embed" + std::to_string(l));
    ae.embedders_.push_back(
        LinearLayer::xavier(ae.layout_->layers[l].neuron_raw_dim, cfg.d_token, rng));
    auto drng = root.fork("debed" + std::to_string(l));
    ae.debedders_.push_back(
        LinearLayer::xavier(cfg.d_token, ae.layout_->layers[l].neuron_raw_dim, drng));
  }
  auto prng = root.fork("pos");
  ae.enc_pos_ = Tensor::rand_normal({tokens, cfg.d_token}, 0.0f, 0.02f, prng, true);
  ae.dec_pos_ = Tensor::rand_normal({tokens, cfg.d_token}, 0.0f, 0.02f, prng, true);
  ae.cls_ = Tensor::rand_normal({1, cfg.d_token}, 0.0f, 0.02f, prng, true);

  auto make_blocks = [&](const char* tag) {
    std::vector<Block> blocks;
    for (int i = 0; i < cfg.n_layers; ++i) {
      auto rng = root.fork(std::string(tag) + std::to_string(i));
      Block b;
      b.ln1 = LayerNormLayer::make(cfg.d_token);
      b.ln2 = LayerNormLayer::make(cfg.d_token);
      b.qkv = LinearLayer::xavier(cfg.d_token, 3 * cfg.d_hidden, rng);
      b.attn_out = LinearLayer::xavier(cfg.d_hidden, cfg.d_token, rng);
      b.mlp1 = LinearLayer::xavier(cfg.d_token, 2 * cfg.d_token, rng);
      b.mlp2 = LinearLayer::xavier(2 * cfg.d_token, cfg.d_token, rng);
      blocks.push_back(std::move(b));
    }
    return blocks;
  };
  ae.enc_blocks_ = make_blocks("enc");
  ae.dec_blocks_ = make_blocks("dec");

  auto crng = root.fork("compress");
  ae.compress_ = LinearLayer::xavier(cfg.d_token, cfg.d_z, crng);
  ae.decompress_ = LinearLayer::xavier(cfg.d_z, tokens * cfg.d_token, crng);
  auto hrng = root.fork("proj");
  ae.proj_head_ = Mlp::make({cfg.d_z, 400, 400, 400, 400, 50}, Mlp::Act::Relu, hrng);
  return ae;
}

ParamList HyperAe::params() const {
  ParamList out;
  for (size_t l = 0; l < embedders_.size(); ++l) {
    embedders_[l].collect("embed" + std::to_string(l), out);
  }
  for (size_t l = 0; l < debedders_.size(); ++l) {
    debedders_[l].collect("debed" + std::to_string(l), out);
  }
  out.add("enc_pos", enc_pos_);
  out.add("dec_pos", dec_pos_);
  out.add("cls", cls_);
  auto collect_blocks = [&](const std::vector<Block>& blocks, const std::string& tag) {
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = tag + std::to_string(i);
      blocks[i].ln1.collect(p + ".ln1", out);
      blocks[i].qkv.collect(p + ".qkv", out);
      blocks[i].attn_out.collect(p + ".attn_out", out);
      blocks[i].ln2.collect(p + ".ln2", out);
      blocks[i].mlp1.collect(p + ".mlp1", out);
      blocks[i].mlp2.collect(p + ".mlp2", out);
    }
  };
  collect_blocks(enc_blocks_, "enc");
  collect_blocks(dec_blocks_, "dec");
  compress_.collect("compress", out);
  decompress_.collect("decompress", out);
  proj_head_.collect("proj", out);
  return out;
}

std::vector<std::vector<float>> HyperAe::snapshot() const {
  std::vector<std::vector<float>> snap;
  for (const auto& t : params().tensors) {
    snap.emplace_back(t.values().begin(), t.values().end());
  }
  return snap;
}

void HyperAe::restore(const std::vector<std::vector<float>>& snap) {
  auto ps = params();
  for (size_t i = 0; i < ps.tensors.size(); ++i) {
    std::copy(snap[i].begin(), snap[i].end(), ps.tensors[i].values().begin());
  }
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

Tensor HyperAe::run_blocks(const std::vector<Block>& blocks, Tensor x, bool train,
                           RngStream* rng) const {
  const int batch = x.dim(0), tokens = x.dim(1);
  const int heads = cfg_.n_heads;
  const int head_dim = cfg_.d_hidden / heads;
  for (const auto& b : blocks) {
    // attention sublayer, pre-LN
    Tensor normed = b.ln1(x);
    Tensor flat = reshape(normed, {batch * tokens, cfg_.d_token});
    Tensor qkv = b.qkv(flat);  // [B*T, 3*d_hidden]
    auto split_heads = [&](int which) {
      Tensor part = slice_lastdim(qkv, which * cfg_.d_hidden, cfg_.d_hidden);
      Tensor shaped = reshape(part, {batch, tokens, heads, head_dim});
      return reshape(permute_0213(shaped), {batch * heads, tokens, head_dim});
    };
    Tensor q = split_heads(0), k = split_heads(1), v = split_heads(2);
    Tensor scores = scale(bmm(q, k, false, true), 1.0f / std::sqrt(static_cast<float>(head_dim)));
    Tensor probs = softmax_rows(scores);
    if (train && rng) probs = dropout(probs, cfg_.dropout, *rng, true);
    Tensor ctx = bmm(probs, v);  // [B*H, T, hd]
    Tensor merged = reshape(
        permute_0213(reshape(ctx, {batch, heads, tokens, head_dim})), {batch * tokens, cfg_.d_hidden});
    Tensor attn = b.attn_out(merged);
    if (train && rng) attn = dropout(attn, cfg_.dropout, *rng, true);
    x = add(x, reshape(attn, {batch, tokens, cfg_.d_token}));

    // mlp sublayer, pre-LN
    Tensor normed2 = reshape(b.ln2(x), {batch * tokens, cfg_.d_token});
    Tensor h = b.mlp2(gelu(b.mlp1(normed2)));
    if (train && rng) h = dropout(h, cfg_.dropout, *rng, true);
    x = add(x, reshape(h, {batch, tokens, cfg_.d_token}));
  }
  return x;
}

Tensor HyperAe::encode_tokens(const std::vector<const WeightVector*>& batch, bool train,
                              RngStream* rng) const {
  const int bsz = static_cast<int>(batch.size());
  const auto& layers = layout_->layers;
  std::vector<Tensor> parts;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
    Tensor raw = Tensor::zeros({bsz, spec.neuron_count, spec.neuron_raw_dim});
    auto rv = raw.values();
    for (int bi = 0; bi < bsz; ++bi) {
      const auto& vals = batch[static_cast<size_t>(bi)]->values;
      for (int ni = 0; ni < spec.neuron_count; ++ni) {
        float* dst = rv.data() + (static_cast<size_t>(bi) * spec.neuron_count + ni) *
                                     spec.neuron_raw_dim;
        std::memcpy(dst, vals.data() + spec.offset + ni * per_neuron,
                    static_cast<size_t>(per_neuron) * sizeof(float));
        dst[per_neuron] = vals[static_cast<size_t>(spec.offset + spec.weight_count() + ni)];
      }
    }
    Tensor flat = reshape(raw, {bsz * spec.neuron_count, spec.neuron_raw_dim});
    Tensor emb = embedders_[l](flat);
    parts.push_back(reshape(emb, {bsz, spec.neuron_count, cfg_.d_token}));
  }
  Tensor x = concat_axis1(parts);                      // [B, 48, d]
  x = add_bcast0(x, enc_pos_);                         // learned position encodings
  Tensor cls_rows = broadcast0(cls_, bsz);             // [B, 1, d]
  x = concat_axis1({x, cls_rows});                     // [B, 49, d]
  x = run_blocks(enc_blocks_, x, train, rng);
  Tensor cls_out = reshape(slice_axis1(x, layout_->token_count, 1), {bsz, cfg_.d_token});
  return tanh(compress_(cls_out));
}

Tensor HyperAe::decode_tokens(const Tensor& z, bool train, RngStream* rng) const {
  const int bsz = z.dim(0);
  const int tokens = layout_->token_count;
  Tensor x = reshape(decompress_(z), {bsz, tokens, cfg_.d_token});
  x = add_bcast0(x, dec_pos_);
  x = run_blocks(dec_blocks_, x, train, rng);

  // Per-layer debedders back to raw neuron values, packed in token-payload
  // order (per neuron: kernel weights then bias). flat_targets and the
  // scatter back to WeightVector use the same ordering.
  std::vector<Tensor> rows;
  int tok_start = 0;
  for (size_t l = 0; l < layout_->layers.size(); ++l) {
    const auto& spec = layout_->layers[l];
    Tensor part = slice_axis1(x, tok_start, spec.neuron_count);
    tok_start += spec.neuron_count;
    Tensor raw = debedders_[l](reshape(part, {bsz * spec.neuron_count, cfg_.d_token}));
    rows.push_back(reshape(raw, {bsz, spec.neuron_count * spec.neuron_raw_dim, 1}));
  }
  Tensor packed = concat_axis1(rows);
  return reshape(packed, {bsz, static_cast<int>(layout_->total)});
}

Tensor HyperAe::flat_targets(const std::vector<const WeightVector*>& batch) const {
  // Token-payload order: per layer, per neuron: kernel weights then bias.
  const int bsz = static_cast<int>(batch.size());
  Tensor t = Tensor::zeros({bsz, static_cast<int>(layout_->total)});
  auto tv = t.values();
  for (int bi = 0; bi < bsz; ++bi) {
    float* dst = tv.data() + static_cast<size_t>(bi) * layout_->total;
    const auto& vals = batch[static_cast<size_t>(bi)]->values;
    size_t cursor = 0;
    for (const auto& spec : layout_->layers) {
      const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
      for (int ni = 0; ni < spec.neuron_count; ++ni) {
        std::memcpy(dst + cursor, vals.data() + spec.offset + ni * per_neuron,
                    static_cast<size_t>(per_neuron) * sizeof(float));
        cursor += static_cast<size_t>(per_neuron);
        dst[cursor++] = vals[static_cast<size_t>(spec.offset + spec.weight_count() + ni)];
      }
    }
  }
  return t;
}

namespace {

// Per-element loss weights in token-payload order.
Tensor recon_weights(const LayerLayout& layout, const LayerStats& stats, bool lwln) {
  std::vector<float> w(static_cast<size_t>(layout.total), 1.0f);
  if (lwln) {
    size_t cursor = 0;
    for (size_t l = 0; l < layout.layers.size(); ++l) {
      const auto& spec = layout.layers[l];
      const float inv_var = 1.0f / (stats.sigma[l] * stats.sigma[l]);
      const size_t count = static_cast<size_t>(spec.extent);
      for (size_t i = 0; i < count; ++i) w[cursor++] = inv_var;
    }
  }
  return Tensor::from({static_cast<int>(layout.total)}, std::move(w));
}

void scatter_flat_to_vector(const float* flat, const LayerLayout& layout, WeightVector& out) {
  size_t cursor = 0;
  for (const auto& spec : layout.layers) {
    const int64_t per_neuron = spec.weight_count() / spec.neuron_count;
    for (int ni = 0; ni < spec.neuron_count; ++ni) {
      std::memcpy(out.values.data() + spec.offset + ni * per_neuron, flat + cursor,
                  static_cast<size_t>(per_neuron) * sizeof(float));
      cursor += static_cast<size_t>(per_neuron);
      out.values[static_cast<size_t>(spec.offset + spec.weight_count() + ni)] = flat[cursor++];
    }
  }
}

}  // namespace

Embedding HyperAe::encode(const WeightVector& v) const {
  EmbeddingMatrix m = encode_batch({v});
  return Embedding(m.rows.begin(), m.rows.end());
}

WeightVector HyperAe::decode(const Embedding& z) const {
  if (static_cast<int>(z.size()) != cfg_.d_z) {
    throw InputError("decode: embedding length " + std::to_string(z.size()) + ", expected " +
                     std::to_string(cfg_.d_z));
  }
  EmbeddingMatrix m;
  m.dim = cfg_.d_z;
  m.rows = z;
  return decode_batch(m).front();
}

EmbeddingMatrix HyperAe::encode_batch(const std::vector<WeightVector>& vs) const {
  NoGradGuard ng;
  EmbeddingMatrix out;
  out.dim = cfg_.d_z;
  constexpr int chunk = 64;
  for (size_t start = 0; start < vs.size(); start += chunk) {
    const size_t end = std::min(vs.size(), start + chunk);
    std::vector<const WeightVector*> batch;
    for (size_t i = start; i < end; ++i) {
      if (!vs[i].layout || !vs[i].layout->compatible(*layout_)) {
        throw LayoutError("encode: vector layout does not match the autoencoder");
      }
      batch.push_back(&vs[i]);
    }
    Tensor z = encode_tokens(batch, false, nullptr);
    out.rows.insert(out.rows.end(), z.values().begin(), z.values().end());
  }
  return out;
}

std::vector<WeightVector> HyperAe::decode_batch(const EmbeddingMatrix& zs) const {
  if (zs.dim != cfg_.d_z) {
    throw InputError("decode: embedding dim " + std::to_string(zs.dim) + ", expected " +
                     std::to_string(cfg_.d_z));
  }
  NoGradGuard ng;
  std::vector<WeightVector> out;
  constexpr int chunk = 64;
  const int64_t count = zs.count();
  for (int64_t start = 0; start < count; start += chunk) {
    const int64_t end = std::min<int64_t>(count, start + chunk);
    const int bsz = static_cast<int>(end - start);
    Tensor z = Tensor::from({bsz, cfg_.d_z},
                            std::vector<float>(zs.rows.begin() + start * cfg_.d_z,
                                               zs.rows.begin() + end * cfg_.d_z));
    Tensor flat = decode_tokens(z, false, nullptr);
    for (int bi = 0; bi < bsz; ++bi) {
      WeightVector v;
      v.layout = layout_;
      v.values.resize(static_cast<size_t>(layout_->total));
      scatter_flat_to_vector(flat.values().data() + static_cast<size_t>(bi) * layout_->total,
                             *layout_, v);
      out.push_back(std::move(v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

HyperAe train_hyperae(const HyperAe::TrainData& data, const AeConfig& cfg,
                      std::shared_ptr<const LayerLayout> layout) {
  if (data.train.empty()) throw InputError("train_hyperae: empty train split");
  LayerStats stats = layer_stats(data.train);
  HyperAe ae = HyperAe::build(cfg, layout, stats);

  // Train-split mean vector anchors the R^2 metric.
  WeightVector mean_vec;
  mean_vec.layout = layout;
  mean_vec.values.assign(static_cast<size_t>(layout->total), 0.0f);
  for (const auto& v : data.train) {
    for (size_t i = 0; i < v.values.size(); ++i) mean_vec.values[i] += v.values[i];
  }
  for (auto& x : mean_vec.values) x /= static_cast<float>(data.train.size());

  ParamList plist = ae.params();
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam opt(plist.tensors, adam_cfg, plist.names);

  Tensor weights = recon_weights(*layout, stats, cfg.lwln);
  RngStream root(cfg.seed);

  auto evaluate_val = [&]() {
    const auto& probe = data.val.empty() ? data.train : data.val;
    auto zs = ae.encode_batch(probe);
    auto recon = ae.decode_batch(zs);
    return r_squared(recon, probe, mean_vec);
  };

  double best_r2 = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_snap = ae.snapshot();
  std::vector<size_t> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  bool aborted = false;

  for (int epoch = 1; epoch <= cfg.epochs && !aborted; ++epoch) {
    auto erng = root.fork("epoch" + std::to_string(epoch));
    auto arng = erng.fork("augment");
    auto drng = erng.fork("dropout");
    erng.shuffle(order);

    double ep_loss = 0.0, ep_recon = 0.0, ep_contrast = 0.0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const int bsz = static_cast<int>(end - start);
      if (bsz < 2) break;  // contrastive pairs need at least two samples

      std::vector<WeightVector> view1, view2;
      view1.reserve(static_cast<size_t>(bsz));
      view2.reserve(static_cast<size_t>(bsz));
      for (size_t i = start; i < end; ++i) {
        const WeightVector& v = data.train[order[i]];
        view1.push_back(permute_augment(v, arng));
        if (cfg.beta < 1.0f) {
          view2.push_back(erase_augment(permute_augment(v, arng), cfg.erase_fraction, arng));
        }
      }
      std::vector<const WeightVector*> batch1;
      for (const auto& v : view1) batch1.push_back(&v);

      Tensor z1 = ae.encode_tokens(batch1, true, &drng);
      Tensor recon = ae.decode_tokens(z1, true, &drng);
      Tensor target = ae.flat_targets(batch1);
      Tensor recon_loss = weighted_mse_loss(recon, target, weights);

      Tensor loss;
      double contrast_val = 0.0;
      if (cfg.beta < 1.0f) {
        std::vector<const WeightVector*> batch2;
        for (const auto& v : view2) batch2.push_back(&v);
        Tensor z2 = ae.encode_tokens(batch2, true, &drng);
        Tensor stacked = reshape(
            concat_axis1({reshape(z1, {1, bsz, cfg.d_z}), reshape(z2, {1, bsz, cfg.d_z})}),
            {2 * bsz, cfg.d_z});
        Tensor contrast = ntxent_loss(ae.project(stacked), cfg.temperature);
        contrast_val = contrast.value();
        loss = add(scale(recon_loss, cfg.beta), scale(contrast, 1.0f - cfg.beta));
      } else {
        loss = recon_loss;
      }

      const double loss_val = loss.value();
      if (!std::isfinite(loss_val)) {
        aborted = true;  // keep the last good (best-validation) parameters
        break;
      }
      opt.zero_grad();
      backward(loss);
      opt.step();
      ep_loss += loss_val;
      ep_recon += recon_loss.value();
      ep_contrast += contrast_val;
      ++steps;
    }
    if (steps == 0) continue;

    AeTrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = ep_loss / steps;
    entry.recon = ep_recon / steps;
    entry.contrastive = ep_contrast / steps;
    entry.val_r2 = std::numeric_limits<double>::quiet_NaN();
    if (!aborted && (epoch % cfg.val_every == 0 || epoch == cfg.epochs)) {
      entry.val_r2 = evaluate_val();
      if (entry.val_r2 > best_r2) {
        best_r2 = entry.val_r2;
        best_snap = ae.snapshot();
      }
    }
    ae.log_.push_back(entry);
  }

  ae.restore(best_snap);
  return ae;
}

Tensor HyperAe::project(const Tensor& z) const { return proj_head_(z); }

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void HyperAe::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["kind"] = "hyperae";
  header["schema_version"] = 1;
  header["config"] = {{"d_token", cfg_.d_token},
                      {"d_hidden", cfg_.d_hidden},
                      {"n_layers", cfg_.n_layers},
                      {"n_heads", cfg_.n_heads},
                      {"d_z", cfg_.d_z},
                      {"compression", cfg_.compression},
                      {"dropout", cfg_.dropout},
                      {"weight_decay", cfg_.weight_decay},
                      {"lr", cfg_.lr},
                      {"beta", cfg_.beta},
                      {"epochs", cfg_.epochs},
                      {"batch_size", cfg_.batch_size},
                      {"lwln", cfg_.lwln},
                      {"temperature", cfg_.temperature},
                      {"erase_fraction", cfg_.erase_fraction},
                      {"val_every", cfg_.val_every},
                      {"seed", cfg_.seed}};
  header["layer_stats"] = {{"mu", stats_.mu}, {"sigma", stats_.sigma}};
  nlohmann::json jlayout = nlohmann::json::array();
  for (const auto& spec : layout_->layers) {
    jlayout.push_back({{"kind", spec.kind == LayerKind::Conv ? "conv" : "fc"},
                       {"shape", spec.weight_shape}});
  }
  header["layout"] = std::move(jlayout);
  nlohmann::json jlog = nlohmann::json::array();
  for (const auto& e : log_) {
    jlog.push_back({{"epoch", e.epoch},
                    {"loss", e.loss},
                    {"recon", e.recon},
                    {"contrastive", e.contrastive},
                    {"val_r2", std::isfinite(e.val_r2) ? nlohmann::json(e.val_r2)
                                                       : nlohmann::json(nullptr)}});
  }
  header["log"] = std::move(jlog);

  BlobCheckpoint ckpt;
  ckpt.header_json = header.dump();
  ParamList plist = params();
  for (size_t i = 0; i < plist.tensors.size(); ++i) {
    ckpt.add(plist.names[i], plist.tensors[i]);
  }
  write_wza(path, ckpt);
}

HyperAe HyperAe::load(const std::filesystem::path& path) {
  BlobCheckpoint ckpt = read_wza(path);
  nlohmann::json header = nlohmann::json::parse(ckpt.header_json);
  if (header.value("kind", "") != "hyperae") {
    throw FormatError(path.string() + ": not a hyper-representation checkpoint");
  }
  AeConfig cfg;
  const auto& jc = header.at("config");
  cfg.d_token = jc.at("d_token").get<int>();
  cfg.d_hidden = jc.at("d_hidden").get<int>();
  cfg.n_layers = jc.at("n_layers").get<int>();
  cfg.n_heads = jc.at("n_heads").get<int>();
  cfg.d_z = jc.at("d_z").get<int>();
  cfg.compression = jc.at("compression").get<std::string>();
  cfg.dropout = jc.at("dropout").get<float>();
  cfg.weight_decay = jc.at("weight_decay").get<float>();
  cfg.lr = jc.at("lr").get<float>();
  cfg.beta = jc.at("beta").get<float>();
  cfg.epochs = jc.at("epochs").get<int>();
  cfg.batch_size = jc.at("batch_size").get<int>();
  cfg.lwln = jc.at("lwln").get<bool>();
  cfg.temperature = jc.at("temperature").get<float>();
  cfg.erase_fraction = jc.at("erase_fraction").get<float>();
  cfg.val_every = jc.at("val_every").get<int>();
  cfg.seed = jc.at("seed").get<uint64_t>();

  std::vector<std::pair<LayerKind, std::vector<int>>> specs;
  for (const auto& jl : header.at("layout")) {
    specs.emplace_back(jl.at("kind").get<std::string>() == "conv" ? LayerKind::Conv : LayerKind::Fc,
                       jl.at("shape").get<std::vector<int>>());
  }
  auto layout = std::make_shared<LayerLayout>(make_layout(specs));
  LayerStats stats;
  stats.mu = header.at("layer_stats").at("mu").get<std::vector<float>>();
  stats.sigma = header.at("layer_stats").at("sigma").get<std::vector<float>>();

  HyperAe ae = build(cfg, layout, stats);
  ParamList plist = ae.params();
  for (size_t i = 0; i < plist.tensors.size(); ++i) {
    const auto& vals = ckpt.get(plist.names[i]);
    if (vals.size() != static_cast<size_t>(plist.tensors[i].numel())) {
      throw FormatError(path.string() + ": parameter " + plist.names[i] + " has wrong size");
    }
    std::copy(vals.begin(), vals.end(), plist.tensors[i].values().begin());
  }
  if (header.contains("log")) {
    for (const auto& je : header.at("log")) {
      AeTrainLogEntry e;
      e.epoch = je.at("epoch").get<int>();
      e.loss = je.at("loss").get<double>();
      e.recon = je.at("recon").get<double>();
      e.contrastive = je.at("contrastive").get<double>();
      e.val_r2 = je.at("val_r2").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                           : je.at("val_r2").get<double>();
      ae.log_.push_back(e);
    }
  }
  return ae;
}

}  // namespace weightgen
