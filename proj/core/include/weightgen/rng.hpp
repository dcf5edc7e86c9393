#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace weightgen {

/// Counter-based random stream. One root seed per run; every stochastic
/// consumer derives its own named stream, so results do not depend on
/// scheduling or thread count. The generator is SplitMix64 on a counter,
/// which is stateless per draw and cheap to fork.
class RngStream {
 public:
  RngStream() : key_(0x9e3779b97f4a7c15ULL) {}
  explicit RngStream(uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  /// Derive an independent child stream from a label.
  RngStream fork(std::string_view label) const;
  /// Derive an independent child stream from an index.
  RngStream fork(uint64_t index) const;

  uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_double();
  /// Uniform float in [lo, hi).
  float uniform(float lo, float hi);
  /// Standard normal via Box-Muller (no cached spare, two draws per call).
  float normal();
  float normal(float mean, float stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }
  /// Random permutation of [0, n).
  std::vector<int> permutation(int n);

  uint64_t key() const { return key_; }

 private:
  static uint64_t mix(uint64_t z);
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace weightgen
