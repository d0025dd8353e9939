#include "ppbfl/rng.hpp"

#include <cmath>

namespace ppbfl {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

Rng Rng::fork(std::string_view label) const {
  return Rng(splitmix64(seed_ ^ fnv1a(label)));
}

Rng Rng::fork(std::string_view label, uint64_t a) const {
  return Rng(splitmix64(splitmix64(seed_ ^ fnv1a(label)) ^ a));
}

Rng Rng::fork(std::string_view label, uint64_t a, uint64_t b) const {
  return Rng(splitmix64(splitmix64(splitmix64(seed_ ^ fnv1a(label)) ^ a) ^ b));
}

uint64_t Rng::next_u64() { return gen_(); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

size_t Rng::next_index(size_t n) {
  // Rejection sampling keeps the draw unbiased for any n.
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
  uint64_t x = next_u64();
  while (x > limit) x = next_u64();
  return static_cast<size_t>(x % n);
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(t);
  has_cached_normal_ = true;
  return r * std::cos(t);
}

bool Rng::bernoulli(double p) { return next_double() < p; }

void Rng::fill(unsigned char* out, size_t n) {
  size_t i = 0;
  while (i < n) {
    uint64_t x = next_u64();
    for (int k = 0; k < 8 && i < n; ++k, ++i) {
      out[i] = static_cast<unsigned char>(x >> (8 * k));
    }
  }
}

}  // namespace ppbfl
