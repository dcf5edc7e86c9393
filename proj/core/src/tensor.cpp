#include "weightgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace weightgen {

namespace {
thread_local bool t_grad_enabled = true;

std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  for (int d : impl->shape) {
    if (d < 0) throw ShapeError("tensor dimension must be non-negative, got " + shape_str(impl->shape));
  }
  impl->data = std::make_shared<std::vector<float>>(static_cast<size_t>(impl->numel()), 0.0f);
  impl->requires_grad = requires_grad;
  return impl;
}
}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl_->data->begin(), t.impl_->data->end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  int64_t n = impl->numel();
  if (static_cast<int64_t>(values.size()) != n) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(impl->shape));
  }
  impl->data = std::make_shared<std::vector<float>>(std::move(values));
  return Tensor(impl);
}

Tensor Tensor::scalar(float value) { return from({1}, {value}); }

Tensor Tensor::rand_uniform(std::vector<int> shape, float lo, float hi, RngStream& rng,
                            bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (auto& v : *t.impl_->data) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::rand_normal(std::vector<int> shape, float mean, float stddev, RngStream& rng,
                           bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (auto& v : *t.impl_->data) v = rng.normal(mean, stddev);
  return t;
}

float Tensor::value() const {
  if (numel() != 1) throw ShapeError("value(): tensor is not scalar, shape " + shape_str(impl_->shape));
  return (*impl_->data)[0];
}

std::span<const float> Tensor::grad_values() const {
  if (!impl_->grad) throw NumericError("grad_values(): no gradient present");
  return {impl_->grad->data(), impl_->grad->size()};
}

void Tensor::zero_grad() {
  if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0f);
}

void Tensor::assert_finite(const std::string& what) const {
  for (float v : *impl_->data) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value in " + what);
    }
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev; }

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, shape " + shape_str(loss.shape()));
  }
  auto root = loss.impl();
  if (!root->requires_grad) return;

  // Post-order DFS; reversed it gives a topological order root-first.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [impl, next_child] = stack.back();
    if (next_child < impl->parents.size()) {
      TensorImpl* child = impl->parents[next_child].get();
      ++next_child;
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(impl);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  (*root->grad)[0] = 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    if (impl->backward && impl->grad) impl->backward(*impl);
  }

  // Free intermediate gradients and graph edges; leaf (parameter) gradients
  // survive for the optimizer.
  for (TensorImpl* impl : order) {
    if (impl->backward || !impl->parents.empty()) {
      impl->grad.reset();
      impl->backward = nullptr;
      impl->parents.clear();
    }
  }
}

}  // namespace weightgen
