#pragma once

#include "wmkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wmkit
{

enum class Branch
{
  Joint,
  Semantic,
  Detail,
};

/// H x W x C grid of reals stored row-major with channels innermost.
struct LatentGrid
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;
  Branch branch = Branch::Joint;

  LatentGrid() = default;
  LatentGrid(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0, Branch b = Branch::Joint)
  : height(h), width(w), channels(c), values(h * w * c, fill), branch(b)
  {
  }
  LatentGrid(std::size_t h, std::size_t w, std::size_t c, std::vector<double> data, Branch b = Branch::Joint)
  : height(h), width(w), channels(c), values(std::move(data)), branch(b)
  {
    if (values.size() != h * w * c) {
      fail(ErrorCode::ShapeMismatch, "latent grid payload does not match its shape");
    }
  }

  std::size_t positions() const noexcept { return height * width; }
  std::span<double> at(std::size_t pos) { return {values.data() + pos * channels, channels}; }
  std::span<const double> at(std::size_t pos) const
  {
    return {values.data() + pos * channels, channels};
  }
  bool same_shape(const LatentGrid & o) const noexcept
  {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool all_finite() const
  {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

/// H x W grid of code indices over a vocabulary of size `vocab`. The index
/// equal to `vocab` is the MASK sentinel.
struct TokenGrid
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint32_t vocab = 0;
  std::vector<std::uint32_t> indices;

  TokenGrid() = default;
  TokenGrid(std::size_t h, std::size_t w, std::uint32_t k, std::uint32_t fill = 0)
  : height(h), width(w), vocab(k), indices(h * w, fill)
  {
  }
  TokenGrid(std::size_t h, std::size_t w, std::uint32_t k, std::vector<std::uint32_t> data)
  : height(h), width(w), vocab(k), indices(std::move(data))
  {
    if (indices.size() != h * w) {
      fail(ErrorCode::ShapeMismatch, "token grid payload does not match its shape");
    }
  }

  static TokenGrid all_masked(std::size_t h, std::size_t w, std::uint32_t k)
  {
    return TokenGrid(h, w, k, k);
  }

  std::uint32_t mask_token() const noexcept { return vocab; }
  std::size_t positions() const noexcept { return height * width; }
  bool is_masked(std::size_t pos) const { return indices[pos] == vocab; }
  bool same_shape(const TokenGrid & o) const noexcept
  {
    return height == o.height && width == o.width;
  }
  bool operator==(const TokenGrid &) const = default;
};

inline constexpr double kUnitNormTolerance = 1e-6;
inline constexpr double kZeroNorm = 1e-12;

namespace detail
{

inline double norm_of(std::span<const double> v)
{
  double s = 0.0;
  for (double x : v) {
    s += x * x;
  }
  return std::sqrt(s);
}

inline std::vector<double> unit(std::span<const double> v)
{
  const double n = norm_of(v);
  if (!(n >= kZeroNorm)) {
    fail(ErrorCode::ZeroVector, "latent vector norm below 1e-12 cannot be normalized");
  }
  std::vector<double> out(v.begin(), v.end());
  for (double & x : out) {
    x /= n;
  }
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// K x d matrix of unit-norm code vectors.
class Codebook
{
public:
  /// Rows must already be unit norm (1e-6); see `normalized` otherwise.
  Codebook(std::size_t size, std::size_t dim, std::vector<double> entries)
  : size_(size), dim_(dim), entries_(std::move(entries))
  {
    if (size_ < 2 || dim_ < 1) {
      fail(ErrorCode::InvalidArgument, "codebook needs K >= 2 and d >= 1");
    }
    if (size_ > std::numeric_limits<std::uint32_t>::max() - 1) {
      fail(ErrorCode::InvalidArgument, "codebook too large for 32-bit token indices");
    }
    if (entries_.size() != size_ * dim_) {
      fail(ErrorCode::DimensionMismatch, "codebook payload does not match K x d");
    }
    for (std::size_t k = 0; k < size_; ++k) {
      if (std::abs(detail::norm_of(row(k)) - 1.0) > kUnitNormTolerance) {
        fail(ErrorCode::InvalidArgument, "codebook row " + std::to_string(k) + " is not unit norm");
      }
    }
  }

  static Codebook normalized(std::size_t size, std::size_t dim, std::vector<double> entries)
  {
    if (entries.size() != size * dim || dim == 0) {
      fail(ErrorCode::DimensionMismatch, "codebook payload does not match K x d");
    }
    for (std::size_t k = 0; k < size; ++k) {
      const auto u = detail::unit({entries.data() + k * dim, dim});
      std::copy(u.begin(), u.end(), entries.begin() + static_cast<std::ptrdiff_t>(k * dim));
    }
    return Codebook(size, dim, std::move(entries));
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<double> & entries() const noexcept { return entries_; }
  std::span<const double> row(std::size_t k) const { return {entries_.data() + k * dim_, dim_}; }

private:
  std::size_t size_;
  std::size_t dim_;
  std::vector<double> entries_;
};

struct Quantized
{
  TokenGrid tokens;
  LatentGrid latents;
};

/// Nearest code to the L2-normalized latent at every position. Ties resolve
/// to the lowest index.
inline Quantized quantize(const LatentGrid & grid, const Codebook & cb)
{
  if (grid.channels != cb.dim()) {
    fail(
      ErrorCode::DimensionMismatch, "latent channels " + std::to_string(grid.channels) +
                                      " != codebook dim " + std::to_string(cb.dim()));
  }
  Quantized out{
    TokenGrid(grid.height, grid.width, static_cast<std::uint32_t>(cb.size())),
    LatentGrid(grid.height, grid.width, grid.channels, 0.0, grid.branch)};
  for (std::size_t pos = 0; pos < grid.positions(); ++pos) {
    const auto x = detail::unit(grid.at(pos));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cb.size(); ++k) {
      const double d = detail::squared_distance(x, cb.row(k));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    out.tokens.indices[pos] = static_cast<std::uint32_t>(best);
    std::ranges::copy(cb.row(best), out.latents.at(pos).begin());
  }
  return out;
}

inline LatentGrid dequantize(const TokenGrid & tokens, const Codebook & cb, Branch branch = Branch::Joint)
{
  LatentGrid out(tokens.height, tokens.width, cb.dim(), 0.0, branch);
  for (std::size_t pos = 0; pos < tokens.positions(); ++pos) {
    const auto idx = tokens.indices[pos];
    if (idx == tokens.mask_token()) {
      fail(ErrorCode::MaskedTokenPresent, "cannot dequantize MASK at position " + std::to_string(pos));
    }
    if (idx >= cb.size()) {
      fail(ErrorCode::IndexOutOfRange, "token " + std::to_string(idx) + " outside codebook");
    }
    std::ranges::copy(cb.row(idx), out.at(pos).begin());
  }
  return out;
}

enum class CodecMode
{
  Discrete,
  Continuous,
};

/// Two codebooks of equal dimension; Continuous mode bypasses quantization.
struct FactorizedCodec
{
  Codebook semantic;
  Codebook detail;
  CodecMode mode = CodecMode::Discrete;

  FactorizedCodec(Codebook s, Codebook d, CodecMode m)
  : semantic(std::move(s)), detail(std::move(d)), mode(m)
  {
    if (semantic.dim() != detail.dim()) {
      fail(ErrorCode::DimensionMismatch, "semantic and detail codebooks differ in dimension");
    }
  }
};

struct HybridLatent
{
  LatentGrid joint;  // semantic channels first, then detail channels
  std::optional<TokenGrid> semantic_tokens;
  std::optional<TokenGrid> detail_tokens;
};

inline LatentGrid concat_channels(const LatentGrid & a, const LatentGrid & b)
{
  if (a.height != b.height || a.width != b.width) {
    fail(ErrorCode::DimensionMismatch, "cannot concatenate grids of different spatial shape");
  }
  LatentGrid out(a.height, a.width, a.channels + b.channels);
  for (std::size_t pos = 0; pos < a.positions(); ++pos) {
    auto dst = out.at(pos);
    std::ranges::copy(a.at(pos), dst.begin());
    std::ranges::copy(b.at(pos), dst.begin() + static_cast<std::ptrdiff_t>(a.channels));
  }
  return out;
}

inline HybridLatent hybrid_encode(
  const LatentGrid & x_semantic, const LatentGrid & x_detail, const FactorizedCodec & codec)
{
  if (!x_semantic.same_shape(x_detail)) {
    fail(ErrorCode::DimensionMismatch, "semantic and detail latents differ in shape");
  }
  if (x_semantic.channels != codec.semantic.dim()) {
    fail(ErrorCode::DimensionMismatch, "latent channels do not match codec dimension");
  }
  if (codec.mode == CodecMode::Continuous) {
    return {concat_channels(x_semantic, x_detail), std::nullopt, std::nullopt};
  }
  auto qs = quantize(x_semantic, codec.semantic);
  auto qd = quantize(x_detail, codec.detail);
  return {concat_channels(qs.latents, qd.latents), std::move(qs.tokens), std::move(qd.tokens)};
}

/// K x K cosine similarities, row-major. Exactly symmetric, clamped to [-1, 1].
inline std::vector<double> similarity_matrix(const Codebook & cb)
{
  const std::size_t k = cb.size();
  std::vector<double> s(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double dot = 0.0;
      const auto a = cb.row(i);
      const auto b = cb.row(j);
      for (std::size_t c = 0; c < cb.dim(); ++c) {
        dot += a[c] * b[c];
      }
      s[i * k + j] = s[j * k + i] = std::clamp(dot, -1.0, 1.0);
    }
  }
  return s;
}

/**
 * Soft-assignment entropy regularizer.
 *
 * p(pos, k) = softmax_k(-|x_hat - c_k|^2 / temperature). Returns the mean
 * per-position entropy minus the entropy of the mean assignment. Minimizing
 * it favours confident per-position assignments and diverse codebook usage.
 */
inline double entropy_penalty(const LatentGrid & grid, const Codebook & cb, double temperature)
{
  if (!(temperature > 0.0)) {
    fail(ErrorCode::InvalidArgument, "temperature must be positive");
  }
  if (grid.channels != cb.dim()) {
    fail(ErrorCode::DimensionMismatch, "latent channels do not match codebook dimension");
  }
  const std::size_t k = cb.size();
  const std::size_t n = grid.positions();
  if (n == 0) {
    fail(ErrorCode::InvalidArgument, "entropy penalty of an empty grid");
  }
  std::vector<double> mean_p(k, 0.0);
  std::vector<double> logits(k);
  double sample_entropy = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto x = detail::unit(grid.at(pos));
    for (std::size_t c = 0; c < k; ++c) {
      logits[c] = -detail::squared_distance(x, cb.row(c)) / temperature;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) {
      z += std::exp(l - mx);
    }
    const double log_z = mx + std::log(z);
    for (std::size_t c = 0; c < k; ++c) {
      const double logp = logits[c] - log_z;
      const double p = std::exp(logp);
      if (p > 0.0) {
        sample_entropy -= p * logp;
      }
      mean_p[c] += p;
    }
  }
  double batch_entropy = 0.0;
  for (double & p : mean_p) {
    p /= static_cast<double>(n);
    if (p > 0.0) {
      batch_entropy -= p * std::log(p);
    }
  }
  return sample_entropy / static_cast<double>(n) - batch_entropy;
}

struct VqLosses
{
  double codebook = 0.0;
  double commitment = 0.0;
};

/// Commitment weight used when none is configured (VQGAN convention).
inline constexpr double kDefaultCommitmentBeta = 0.25;

/**
 * Codebook and commitment terms as values.
 *
 * Both are the mean over positions of |x - q|^2. For a trainable port the
 * codebook term stops the gradient through x, the commitment term through q.
 */
inline VqLosses vq_losses(const LatentGrid & x, const LatentGrid & q, double beta = kDefaultCommitmentBeta)
{
  if (!x.same_shape(q)) {
    fail(ErrorCode::DimensionMismatch, "vq_losses needs matching shapes");
  }
  if (!(beta >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "beta must be non-negative");
  }
  const std::size_t n = x.positions();
  if (n == 0) {
    return {};
  }
  double total = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    total += detail::squared_distance(x.at(pos), q.at(pos));
  }
  const double mean = total / static_cast<double>(n);
  return {mean, beta * mean};
}

struct CodebookUsage
{
  std::vector<std::size_t> counts;
  double utilization = 0.0;
};

inline CodebookUsage codebook_usage(std::span<const TokenGrid> grids, std::size_t k)
{
  CodebookUsage usage{std::vector<std::size_t>(k, 0), 0.0};
  for (const auto & g : grids) {
    for (auto idx : g.indices) {
      if (idx >= k) {
        fail(ErrorCode::IndexOutOfRange, "token " + std::to_string(idx) + " outside vocabulary");
      }
      ++usage.counts[idx];
    }
  }
  if (k > 0) {
    const auto used = std::count_if(usage.counts.begin(), usage.counts.end(), [](auto c) { return c > 0; });
    usage.utilization = static_cast<double>(used) / static_cast<double>(k);
  }
  return usage;
}

/// Fraction of positions where `generated` repeats `last_context`.
inline double token_copy_rate(const TokenGrid & last_context, const TokenGrid & generated)
{
  if (!last_context.same_shape(generated)) {
    fail(ErrorCode::ShapeMismatch, "copy rate needs equally shaped grids");
  }
  if (generated.positions() == 0) {
    fail(ErrorCode::ShapeMismatch, "copy rate of an empty grid");
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < generated.positions(); ++i) {
    same += last_context.indices[i] == generated.indices[i] ? 1 : 0;
  }
  return static_cast<double>(same) / static_cast<double>(generated.positions());
}

}  // namespace wmkit
