#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "invr/errors.hpp"

namespace invr {

/// Deterministic random source. All distributions are implemented on top of
/// the raw mt19937_64 stream so that a seed reproduces the same values on
/// every platform and release (std::*_distribution makes no such promise).
class Rng {
 public:
  static constexpr const char* algorithm = "mt19937_64/box-muller/v1";

  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
  /// result unbiased and seed-deterministic.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw parameter_error("Rng::integer: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t draw;
    do {
      draw = gen_();
    } while (draw >= limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

  /// Standard normal via Box-Muller; caches the second value of each pair.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  /// k distinct values from [lo, hi], ascending. Partial Fisher-Yates.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t lo, std::int64_t hi,
                                                       std::size_t k) {
    const std::size_t pool_size = static_cast<std::size_t>(hi - lo + 1);
    if (k > pool_size) throw parameter_error("sample_without_replacement: k exceeds pool");
    std::vector<std::int64_t> pool(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool[i] = lo + static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(
          integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool_size - 1)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::int64_t> picked(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(picked.begin(), picked.end());
    return picked;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace invr
