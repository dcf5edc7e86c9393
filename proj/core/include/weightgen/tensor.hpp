#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "weightgen/errors.hpp"
#include "weightgen/rng.hpp"

namespace weightgen {

class Tensor;

/// One node of the implicit computation graph. Parents are held by value so
/// the graph keeps every buffer it needs alive; `backward` accumulates the
/// node's output gradient into its parents' gradients.
struct TensorImpl {
  std::vector<int> shape;
  std::shared_ptr<std::vector<float>> data;
  std::shared_ptr<std::vector<float>> grad;  // allocated on demand
  bool requires_grad = false;
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (!grad) grad = std::make_shared<std::vector<float>>(static_cast<size_t>(numel()), 0.0f);
  }
};

/// Dense row-major float32 tensor. Cheap to copy (shared storage). Values
/// are immutable once created except through optimizer steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, float value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value);
  static Tensor rand_uniform(std::vector<int> shape, float lo, float hi, RngStream& rng,
                             bool requires_grad = false);
  static Tensor rand_normal(std::vector<int> shape, float mean, float stddev, RngStream& rng,
                            bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const std::vector<int>& shape() const { return impl_->shape; }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const { return impl_->numel(); }

  std::span<float> values() { return {impl_->data->data(), impl_->data->size()}; }
  std::span<const float> values() const { return {impl_->data->data(), impl_->data->size()}; }
  /// Scalar extraction; requires numel() == 1.
  float value() const;

  bool requires_grad() const { return impl_->requires_grad; }
  std::span<const float> grad_values() const;
  bool has_grad() const { return impl_ && impl_->grad != nullptr; }
  void zero_grad();

  /// Throws NumericError naming `what` if any element is NaN or infinite.
  void assert_finite(const std::string& what) const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Reverse-mode sweep from a scalar loss. Gradients of non-leaf nodes are
/// freed as soon as the sweep completes; graph edges are released too, so a
/// tensor can only be backpropagated once.
void backward(const Tensor& loss);

/// Thread-local autograd mode; disable for evaluation passes.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace weightgen
