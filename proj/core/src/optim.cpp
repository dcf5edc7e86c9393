#include "weightgen/optim.hpp"

#include <cmath>

namespace weightgen {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg, std::vector<std::string> names)
    : params_(std::move(params)), names_(std::move(names)), cfg_(cfg) {
  slots_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    const size_t n = static_cast<size_t>(params_[i].numel());
    slots_[i].m.assign(n, 0.0f);
    slots_[i].v.assign(n, 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto impl = params_[pi].impl();
    auto& slot = slots_[pi];
    auto& w = *impl->data;
    const float* g = impl->grad ? impl->grad->data() : nullptr;
    for (size_t i = 0; i < w.size(); ++i) {
      float gi = g ? g[i] : 0.0f;
      if (!std::isfinite(gi)) {
        const std::string name = pi < names_.size() ? names_[pi] : ("param" + std::to_string(pi));
        throw NumericError("adam: non-finite gradient in " + name);
      }
      if (cfg_.weight_decay != 0.0f) gi += cfg_.weight_decay * w[i];
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0f - cfg_.beta1) * gi;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0f - cfg_.beta2) * gi * gi;
      const float mhat = static_cast<float>(slot.m[i] / bc1);
      const float vhat = static_cast<float>(slot.v[i] / bc2);
      w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace weightgen
