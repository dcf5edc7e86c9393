#include "weightgen/rng.hpp"

#include <cmath>
#include <numbers>

namespace weightgen {

uint64_t RngStream::mix(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream RngStream::fork(std::string_view label) const {
  // FNV-1a over the label, folded into the parent key.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  RngStream child;
  child.key_ = mix(key_ ^ mix(h));
  return child;
}

RngStream RngStream::fork(uint64_t index) const {
  RngStream child;
  child.key_ = mix(key_ ^ mix(index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  return child;
}

uint64_t RngStream::next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float RngStream::uniform(float lo, float hi) {
  return lo + static_cast<float>(next_double()) * (hi - lo);
}

float RngStream::normal() {
  // Box-Muller; guard the log argument away from zero.
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < 1e-300) u1 = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u1));
  return static_cast<float>(r * std::cos(2.0 * std::numbers::pi * u2));
}

uint64_t RngStream::below(uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling to avoid modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

std::vector<int> RngStream::permutation(int n) {
  std::vector<int> p(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
  shuffle(p);
  return p;
}

}  // namespace weightgen
