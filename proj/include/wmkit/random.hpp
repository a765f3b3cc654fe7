#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace wmkit
{

/// All stochastic operations take this engine explicitly; there is no global
/// generator anywhere in the library.
using Rng = std::mt19937_64;

inline double uniform01(Rng & rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Fills `out` with independent N(0, 1) draws from a single distribution
/// object, in index order.
inline void fill_standard_normal(Rng & rng, std::span<double> out)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double & v : out) {
    v = normal(rng);
  }
}

/// floor(x + 0.5): halves round away from zero for non-negative inputs.
inline std::size_t round_half_up(double x)
{
  return x <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(x + 0.5));
}

/// `count` distinct indices from [0, n) by partial Fisher-Yates, in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng & rng)
{
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool[i] = i;
  }
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace wmkit
