#pragma once

// Finite-difference gradient harness. The loss is recomputed by an
// independent float64 reference function; central differences on that
// reference are compared against the engine's reverse-mode gradients.
// No test-framework dependency so both the unit and acceptance suites can
// drive it.

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "weightgen/ops.hpp"
#include "weightgen/tensor.hpp"

namespace gradcheck {

using weightgen::Tensor;

struct Case {
  std::string name;
  std::vector<Tensor> inputs;  // all require grad
  // Builds a scalar loss through the engine.
  std::function<Tensor(const std::vector<Tensor>&)> engine_fn;
  // Same scalar from float64 copies of the inputs.
  std::function<double(const std::vector<std::vector<double>>&)> ref_fn;
};

struct Result {
  bool ok = true;
  size_t elements_checked = 0;
  double max_rel = 0.0;
  std::string detail;
};

inline Result evaluate(const Case& c, double h = 1e-3, double rtol = 1e-4, double atol = 1e-6) {
  Result res;
  Tensor loss = c.engine_fn(c.inputs);
  if (loss.numel() != 1) {
    res.ok = false;
    res.detail = c.name + ": engine loss is not scalar";
    return res;
  }
  weightgen::backward(loss);

  std::vector<std::vector<double>> ref_inputs;
  for (const auto& t : c.inputs) {
    ref_inputs.emplace_back(t.values().begin(), t.values().end());
  }
  const double base = c.ref_fn(ref_inputs);
  const double engine_val = static_cast<double>(loss.value());
  if (std::abs(engine_val - base) > 1e-4 * (1.0 + std::abs(base))) {
    res.ok = false;
    std::ostringstream os;
    os << c.name << ": forward mismatch engine=" << engine_val << " ref=" << base;
    res.detail = os.str();
    return res;
  }

  for (size_t ti = 0; ti < c.inputs.size(); ++ti) {
    if (!c.inputs[ti].has_grad()) {
      res.ok = false;
      res.detail = c.name + ": missing gradient for input " + std::to_string(ti);
      return res;
    }
    auto grad = c.inputs[ti].grad_values();
    for (size_t i = 0; i < grad.size(); ++i) {
      const double keep = ref_inputs[ti][i];
      ref_inputs[ti][i] = keep + h;
      const double fp = c.ref_fn(ref_inputs);
      ref_inputs[ti][i] = keep - h;
      const double fm = c.ref_fn(ref_inputs);
      ref_inputs[ti][i] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double got = static_cast<double>(grad[i]);
      const double err = std::abs(got - fd);
      const double rel = err / std::max({std::abs(fd), std::abs(got), 1e-300});
      ++res.elements_checked;
      if (err > atol && rel > rtol) {
        res.ok = false;
        std::ostringstream os;
        os << c.name << ": input " << ti << " elem " << i << " fd=" << fd << " engine=" << got
           << " rel=" << rel;
        res.detail = os.str();
        return res;
      }
      if (err > atol) res.max_rel = std::max(res.max_rel, rel);
    }
  }
  return res;
}

/// Scalarize a tensor-valued op with fixed random weights so the whole
/// Jacobian is exercised: loss = sum_i r_i * y_i.
inline Tensor weighted_sum(const Tensor& y, const std::vector<float>& r) {
  Tensor rw = Tensor::from(y.shape(), std::vector<float>(r.begin(), r.begin() + y.numel()));
  return weightgen::sum_all(weightgen::mul(y, rw));
}

inline double ref_weighted_sum(const std::vector<double>& y, const std::vector<float>& r) {
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) acc += y[i] * static_cast<double>(r[i]);
  return acc;
}

}  // namespace gradcheck
