#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

#include "selabel/errors.hpp"

namespace selabel {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Vigna).
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

// Output of the SplitMix64 stream seeded with `seed` at position `index`.
// Counter-based: any position can be evaluated independently, so draws for
// distinct indices are order-free and safe to compute in parallel.
inline constexpr std::uint64_t stream_at(std::uint64_t seed, std::uint64_t index) {
  return detail::mix64(seed + (index + 1) * detail::kGolden);
}

// Maps 64 random bits to a double in (0, 1]. The half-open-at-zero range
// keeps log() finite and conformal p-values strictly positive.
inline double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// One Uniform(0,1] draw keyed by (seed, index).
inline double indexed_uniform(std::uint64_t seed, std::uint64_t index) {
  return unit_from_bits(stream_at(seed, index));
}

// Sequential view over a counter-based stream. Cheap to construct; carries a
// position counter so callers can draw a variable number of values without
// coordinating with other streams.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {}

  // Hierarchical sub-stream derivation: each path element re-keys the stream,
  // so (root, {a, b}) and (root, {a, c}) never collide in practice.
  static RandomStream derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = root;
    for (std::uint64_t tag : path) s = stream_at(s, tag);
    return RandomStream(s);
  }

  std::uint64_t next_u64() { return stream_at(seed_, counter_++); }

  // Uniform on (0, 1].
  double next_unit() { return unit_from_bits(next_u64()); }

  // Unbiased integer in [0, bound) via 128-bit multiply (Lemire).
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  // Standard normal via Box-Muller.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled with the
  // boost Gamma(shape+1) * U^(1/shape).
  double next_gamma(double shape) {
    require(std::isfinite(shape) && shape > 0.0, "gamma shape must be positive");
    if (shape < 1.0) {
      const double u = next_unit();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = next_normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = next_unit();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double next_beta(double a, double b) {
    const double x = next_gamma(a);
    const double y = next_gamma(b);
    return x / (x + y);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Sub-stream tags. Distinct constants keep draws for different purposes out
// of each other's counter space.
namespace stream_tag {
inline constexpr std::uint64_t kTrial = 0x01;
inline constexpr std::uint64_t kPValues = 0x02;
inline constexpr std::uint64_t kTune = 0x03;
inline constexpr std::uint64_t kBootstrap = 0x04;
inline constexpr std::uint64_t kSplit = 0x05;
}  // namespace stream_tag

}  // namespace selabel
