#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>

#include "ppbfl/error.hpp"

// Units-in-last-place distance between two doubles (monotone key trick).
inline uint64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  if (!std::isfinite(a) || !std::isfinite(b)) return UINT64_MAX;
  auto key = [](double x) -> uint64_t {
    uint64_t u = std::bit_cast<uint64_t>(x);
    return (u >> 63) ? ~u : (u | 0x8000000000000000ULL);
  };
  const uint64_t ka = key(a), kb = key(b);
  return ka > kb ? ka - kb : kb - ka;
}

// True iff fn throws a ppbfl::Error carrying exactly this code.
inline bool throws_code(ppbfl::Errc code, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ppbfl::Error& e) {
    return e.code() == code;
  } catch (...) {
    return false;
  }
  return false;
}
