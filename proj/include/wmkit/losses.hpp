#pragma once

#include "wmkit/error.hpp"
#include "wmkit/quantizer.hpp"
#include "wmkit/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wmkit
{

inline constexpr double kDefaultKdModelTemperature = 2.0;   // T, published
inline constexpr double kDefaultKdTargetTemperature = 0.2;  // T', published
inline constexpr double kDefaultKdWeight = 0.5;             // lambda, published

/// Loss value plus, when requested, the gradient with respect to the
/// differentiated argument (same layout as that argument's values).
struct LossValue
{
  double value = 0.0;
  std::vector<double> gradient;
};

/**
 * Flow-matching regression: mean over all entries of
 * (v_pred - (eps - x))^2. Gradient is with respect to v_pred.
 */
inline LossValue fm_loss(
  const FrameLatent & v_pred, const FrameLatent & x, const FrameLatent & eps, bool with_gradient = false)
{
  if (!v_pred.same_shape(x) || !x.same_shape(eps)) {
    fail(ErrorCode::ShapeMismatch, "fm_loss arguments differ in shape");
  }
  const std::size_t n = v_pred.values.size();
  if (n == 0) {
    fail(ErrorCode::ShapeMismatch, "fm_loss of an empty grid");
  }
  LossValue out;
  if (with_gradient) {
    out.gradient.resize(n);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = v_pred.values[i] - (eps.values[i] - x.values[i]);
    out.value += r * r;
    if (with_gradient) {
      out.gradient[i] = 2.0 * r * inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

namespace detail
{

/// log-softmax of `scores / temperature`.
inline std::vector<double> log_softmax(std::span<const double> scores, double temperature = 1.0)
{
  std::vector<double> out(scores.size());
  std::size_t top = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[top]) {
      top = k;
    }
  }
  const double mx = scores[top] / temperature;
  double rest = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (k != top) {
      rest += std::exp(scores[k] / temperature - mx);
    }
  }
  const double log_z = std::log1p(rest);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (scores[k] / temperature - mx) - log_z;
  }
  return out;
}

}  // namespace detail

/**
 * Cross-entropy over masked positions (mask bit 0), averaged over the number
 * of masked positions. Revealed positions contribute nothing. Gradient is
 * with respect to the logits.
 */
inline LossValue masked_ce_loss(
  const Logits & logits, const TokenGrid & targets, const Mask & mask, bool with_gradient = false)
{
  if (logits.height != targets.height || logits.width != targets.width ||
      mask.height != targets.height || mask.width != targets.width ||
      mask.bits.size() != targets.positions() ||
      logits.values.size() != targets.positions() * logits.vocab) {
    fail(ErrorCode::ShapeMismatch, "logits, targets and mask disagree in shape");
  }
  const auto masked = static_cast<std::size_t>(std::count(mask.bits.begin(), mask.bits.end(), std::uint8_t{0}));
  if (masked == 0) {
    fail(ErrorCode::NoMaskedPositions, "mask reveals every position");
  }
  LossValue out;
  if (with_gradient) {
    out.gradient.assign(logits.values.size(), 0.0);
  }
  const double inv = 1.0 / static_cast<double>(masked);
  for (std::size_t pos = 0; pos < targets.positions(); ++pos) {
    if (mask.bits[pos] != 0) {
      continue;
    }
    const auto target = targets.indices[pos];
    if (target >= logits.vocab) {
      fail(ErrorCode::MaskedTokenPresent, "target at position " + std::to_string(pos) + " is not a real token");
    }
    const auto logp = detail::log_softmax(logits.at(pos));
    out.value -= logp[target] * inv;
    if (with_gradient) {
      for (std::size_t k = 0; k < logits.vocab; ++k) {
        out.gradient[pos * logits.vocab + k] = (std::exp(logp[k]) - (k == target ? 1.0 : 0.0)) * inv;
      }
    }
  }
  return out;
}

/**
 * Soft-target distillation against codebook similarities.
 *
 * p_o = softmax(u / T), p_t = softmax(s / T') per position;
 * loss = T * T' * sum over positions of KL(p_t || p_o).
 * The prefactor is T * T', not the T^2 of classic distillation.
 * Gradient with respect to u is T' * (p_o - p_t).
 */
inline LossValue kd_soft_target_loss(
  const Logits & u, const Logits & s, double t_model = kDefaultKdModelTemperature,
  double t_target = kDefaultKdTargetTemperature, bool with_gradient = false)
{
  if (u.height != s.height || u.width != s.width || u.vocab != s.vocab ||
      u.values.size() != s.values.size()) {
    fail(ErrorCode::ShapeMismatch, "logits and similarity rows differ in shape");
  }
  if (!(t_model > 0.0) || !(t_target > 0.0)) {
    fail(ErrorCode::InvalidArgument, "temperatures must be positive");
  }
  LossValue out;
  if (with_gradient) {
    out.gradient.assign(u.values.size(), 0.0);
  }
  for (std::size_t pos = 0; pos < u.positions(); ++pos) {
    const auto log_po = detail::log_softmax(u.at(pos), t_model);
    const auto log_pt = detail::log_softmax(s.at(pos), t_target);
    double kl = 0.0;
    for (std::size_t k = 0; k < u.vocab; ++k) {
      const double pt = std::exp(log_pt[k]);
      if (pt > 0.0) {
        kl += pt * (log_pt[k] - log_po[k]);
      }
      if (with_gradient) {
        out.gradient[pos * u.vocab + k] = t_target * (std::exp(log_po[k]) - pt);
      }
    }
    out.value += kl;
  }
  out.value *= t_model * t_target;
  return out;
}

/// Gathers similarity rows S[target] for every position; the result feeds
/// `kd_soft_target_loss` as `s`.
inline Logits similarity_targets(std::span<const double> similarity, const TokenGrid & targets)
{
  const std::size_t k = targets.vocab;
  if (similarity.size() != k * k) {
    fail(ErrorCode::ShapeMismatch, "similarity matrix is not K x K");
  }
  Logits out(targets.height, targets.width, k);
  for (std::size_t pos = 0; pos < targets.positions(); ++pos) {
    const auto t = targets.indices[pos];
    if (t >= k) {
      fail(ErrorCode::MaskedTokenPresent, "target at position " + std::to_string(pos) + " is not a real token");
    }
    std::copy_n(similarity.begin() + static_cast<std::ptrdiff_t>(t * k), k, out.at(pos).begin());
  }
  return out;
}

/// ce + lambda * kd. Gradients combine when both are present.
inline LossValue combined_mgm_loss(const LossValue & ce, const LossValue & kd, double lambda = kDefaultKdWeight)
{
  if (!std::isfinite(ce.value) || !std::isfinite(kd.value) || !std::isfinite(lambda)) {
    fail(ErrorCode::InvalidArgument, "combined loss inputs must be finite");
  }
  LossValue out{ce.value + lambda * kd.value, {}};
  if (!ce.gradient.empty() && !kd.gradient.empty()) {
    if (ce.gradient.size() != kd.gradient.size()) {
      fail(ErrorCode::ShapeMismatch, "gradient sizes differ");
    }
    out.gradient.resize(ce.gradient.size());
    for (std::size_t i = 0; i < out.gradient.size(); ++i) {
      out.gradient[i] = ce.gradient[i] + lambda * kd.gradient[i];
    }
  }
  return out;
}

}  // namespace wmkit
