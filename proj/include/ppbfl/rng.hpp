#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ppbfl {

// Deterministic random stream with keyed splitting. fork() derives a child
// stream from the parent's identity seed and a label, not from the parent's
// draw position, so sibling streams may be consumed in any order (including
// concurrently) without changing any result.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  Rng fork(std::string_view label) const;
  Rng fork(std::string_view label, uint64_t a) const;
  Rng fork(std::string_view label, uint64_t a, uint64_t b) const;

  uint64_t seed() const { return seed_; }

  uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double();

  double uniform(double lo, double hi);

  // Uniform in [0, n); n must be positive.
  size_t next_index(size_t n);

  // Standard normal via Box-Muller; pairs are cached.
  double normal();

  bool bernoulli(double p);

  void fill(unsigned char* out, size_t n);

  // Fisher-Yates, explicit so results do not depend on the standard
  // library's std::shuffle implementation.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_index(i)]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace ppbfl
