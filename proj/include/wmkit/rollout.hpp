#pragma once

#include "wmkit/error.hpp"
#include "wmkit/quantizer.hpp"
#include "wmkit/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wmkit
{

using FrameLatent = LatentGrid;

inline constexpr std::size_t kDefaultContextFrames = 5;  // published: 5 frames at 5 Hz
inline constexpr double kDefaultContextRate = 5.0;
inline constexpr std::size_t kDefaultFmSteps = 30;       // published ODE step count
inline constexpr double kDefaultContextNoiseProb = 0.5;  // published
inline constexpr double kDefaultContextNoiseTauMax = 0.3;
inline constexpr double kDefaultContextDropProb = 0.5;   // published (early training)
inline constexpr double kDefaultMaskFrameFrac = 0.10;    // published
inline constexpr double kDefaultMaskTokenFrac = 0.10;    // published

/// Sliding FIFO of the most recent frames, oldest first.
template <typename Frame>
class ContextWindow
{
public:
  explicit ContextWindow(std::size_t capacity = kDefaultContextFrames, double rate_hz = kDefaultContextRate)
  : capacity_(capacity), rate_hz_(rate_hz)
  {
    if (capacity_ == 0) {
      fail(ErrorCode::InvalidArgument, "context capacity must be positive");
    }
  }

  /// Appends `frame`, evicting the oldest frame once capacity is exceeded.
  void push(Frame frame)
  {
    frames_.push_back(std::move(frame));
    if (frames_.size() > capacity_) {
      frames_.pop_front();
    }
  }

  std::size_t capacity() const noexcept { return capacity_; }
  double rate_hz() const noexcept { return rate_hz_; }
  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  bool full() const noexcept { return frames_.size() == capacity_; }
  const Frame & newest() const
  {
    if (frames_.empty()) {
      fail(ErrorCode::ContextUnderfilled, "context window is empty");
    }
    return frames_.back();
  }
  const std::deque<Frame> & frames() const noexcept { return frames_; }
  std::deque<Frame> & frames() noexcept { return frames_; }

private:
  std::size_t capacity_;
  double rate_hz_;
  std::deque<Frame> frames_;
};

// ---------------------------------------------------------------------------
// Flow matching

/// (1 - tau) * x + tau * eps
inline FrameLatent fm_interpolate(const FrameLatent & x, const FrameLatent & eps, double tau)
{
  if (!x.same_shape(eps)) {
    fail(ErrorCode::ShapeMismatch, "interpolation endpoints differ in shape");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    fail(ErrorCode::TauOutOfRange, "tau must lie in [0, 1]");
  }
  FrameLatent out = x;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (1.0 - tau) * x.values[i] + tau * eps.values[i];
  }
  return out;
}

/// One explicit Euler step toward tau = 0: x - delta * v.
inline FrameLatent fm_euler_step(const FrameLatent & x_tau, const FrameLatent & v, double delta)
{
  if (!x_tau.same_shape(v)) {
    fail(ErrorCode::ShapeMismatch, "velocity shape differs from latent shape");
  }
  if (!(delta > 0.0)) {
    fail(ErrorCode::InvalidArgument, "step size must be positive");
  }
  FrameLatent out = x_tau;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] -= delta * v.values[i];
  }
  return out;
}

/// (noised target, tau, context) -> velocity pointing toward the noise.
using VelocityPredictor =
  std::function<FrameLatent(const FrameLatent &, double, const ContextWindow<FrameLatent> &)>;

struct LatentShape
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
};

/**
 * Generates one frame by integrating the predicted velocity from pure noise
 * at tau = 1 down to tau = 0 on a uniform grid of `steps` Euler steps.
 *
 * The noise is drawn from `rng` in row-major order before the first
 * predictor call, so the result depends only on (predictor, context, shape,
 * steps, rng state).
 */
inline FrameLatent fm_sample_frame(
  const VelocityPredictor & predict, const ContextWindow<FrameLatent> & ctx, LatentShape shape,
  std::size_t steps, Rng & rng)
{
  if (steps < 1) {
    fail(ErrorCode::InvalidArgument, "flow sampler needs at least one step");
  }
  FrameLatent x(shape.height, shape.width, shape.channels);
  fill_standard_normal(rng, x.values);
  const double delta = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double tau = 1.0 - static_cast<double>(i) * delta;
    FrameLatent v = predict(x, tau, ctx);
    if (!v.same_shape(x)) {
      fail(ErrorCode::PredictorShapeMismatch, "velocity predictor returned a differently shaped grid");
    }
    x = fm_euler_step(x, v, delta);
  }
  return x;
}

/// Shape taken from the newest context frame.
inline FrameLatent fm_sample_frame(
  const VelocityPredictor & predict, const ContextWindow<FrameLatent> & ctx,
  std::size_t steps, Rng & rng)
{
  const auto & ref = ctx.newest();
  return fm_sample_frame(predict, ctx, {ref.height, ref.width, ref.channels}, steps, rng);
}

/// Exact conditional velocity of the linear path ending at `target`:
/// on x = (1 - tau) * target + tau * eps it equals eps - target.
inline VelocityPredictor oracle_velocity(FrameLatent target)
{
  return [target = std::move(target)](const FrameLatent & x, double tau, const ContextWindow<FrameLatent> &) {
    if (!x.same_shape(target)) {
      fail(ErrorCode::PredictorShapeMismatch, "oracle target shape differs from sampler shape");
    }
    FrameLatent v = x;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      v.values[i] = (x.values[i] - target.values[i]) / tau;
    }
    return v;
  };
}

inline VelocityPredictor zero_velocity()
{
  return [](const FrameLatent & x, double, const ContextWindow<FrameLatent> &) {
    return FrameLatent(x.height, x.width, x.channels);
  };
}

/// Oracle toward the newest context frame.
inline VelocityPredictor copy_velocity()
{
  return [](const FrameLatent & x, double tau, const ContextWindow<FrameLatent> & ctx) {
    return oracle_velocity(ctx.newest())(x, tau, ctx);
  };
}

/// Oracle toward a constant grid whose value is the newest frame's first
/// entry plus one, so frames carry an increasing stamp.
inline VelocityPredictor stamp_velocity()
{
  return [](const FrameLatent & x, double tau, const ContextWindow<FrameLatent> & ctx) {
    const double next = ctx.newest().values.at(0) + 1.0;
    return oracle_velocity(FrameLatent(x.height, x.width, x.channels, next))(x, tau, ctx);
  };
}

// ---------------------------------------------------------------------------
// Masked generative modeling

/// Cosine masking schedule: fraction still masked at progress u.
inline double mask_ratio(double u)
{
  if (!(u >= 0.0 && u <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "schedule progress must lie in [0, 1]");
  }
  if (u == 1.0) {
    return 0.0;
  }
  return std::cos(std::numbers::pi * u / 2.0);
}

/// Binary reveal mask; 1 keeps the token, 0 replaces it with MASK.
struct Mask
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;
};

inline TokenGrid apply_mask(const TokenGrid & tokens, const Mask & mask)
{
  if (tokens.height != mask.height || tokens.width != mask.width || mask.bits.size() != tokens.positions()) {
    fail(ErrorCode::ShapeMismatch, "mask shape differs from token grid");
  }
  TokenGrid out = tokens;
  for (std::size_t i = 0; i < out.positions(); ++i) {
    if (mask.bits[i] == 0) {
      out.indices[i] = out.mask_token();
    }
  }
  return out;
}

/// Per-position scores over the vocabulary, row-major with vocab innermost.
struct Logits
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t vocab = 0;
  std::vector<double> values;

  Logits() = default;
  Logits(std::size_t h, std::size_t w, std::size_t k, double fill = 0.0)
  : height(h), width(w), vocab(k), values(h * w * k, fill)
  {
  }

  std::size_t positions() const noexcept { return height * width; }
  std::span<double> at(std::size_t pos) { return {values.data() + pos * vocab, vocab}; }
  std::span<const double> at(std::size_t pos) const { return {values.data() + pos * vocab, vocab}; }
};

/// Partially revealed frame during iterative decoding.
struct MaskState
{
  TokenGrid tokens;                    // MASK wherever not yet revealed
  std::vector<std::uint8_t> revealed;  // 1 once a position is frozen
  std::size_t step = 0;
  std::size_t total_steps = 0;

  static MaskState fully_masked(std::size_t h, std::size_t w, std::uint32_t vocab, std::size_t total_steps)
  {
    if (total_steps < 1) {
      fail(ErrorCode::InvalidArgument, "decoding needs at least one step");
    }
    return {TokenGrid::all_masked(h, w, vocab), std::vector<std::uint8_t>(h * w, 0), 0, total_steps};
  }

  std::size_t revealed_count() const
  {
    return static_cast<std::size_t>(std::count(revealed.begin(), revealed.end(), std::uint8_t{1}));
  }
  bool done() const noexcept { return step >= total_steps; }
};

/// Positions that should remain masked after `step` (1-based) of `total`.
inline std::size_t masked_after_step(std::size_t positions, std::size_t step, std::size_t total)
{
  if (step >= total) {
    return 0;
  }
  const double ratio = mask_ratio(static_cast<double>(step) / static_cast<double>(total));
  return static_cast<std::size_t>(std::floor(static_cast<double>(positions) * ratio));
}

namespace detail
{

inline std::vector<double> tempered_softmax(std::span<const double> logits, double temperature)
{
  std::vector<double> p(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) {
    mx = std::max(mx, l / temperature);
  }
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(logits[k] / temperature - mx);
    z += p[k];
  }
  for (double & v : p) {
    v /= z;
  }
  return p;
}

}  // namespace detail

/**
 * One confidence-based unmasking step.
 *
 * Every masked position draws a candidate from softmax(logits / temperature)
 * and records the probability of that draw as its confidence. The most
 * confident candidates are revealed (ties go to the lower position index)
 * until the cosine schedule's masked count for this step is reached; the
 * final step reveals everything left. Revealed tokens never change again.
 */
inline MaskState mgm_unmask_step(const Logits & logits, MaskState state, Rng & rng, double temperature = 1.0)
{
  if (state.done()) {
    fail(ErrorCode::StateExhausted, "all decoding steps already used");
  }
  if (!(temperature > 0.0)) {
    fail(ErrorCode::InvalidArgument, "temperature must be positive");
  }
  const TokenGrid & grid = state.tokens;
  if (logits.height != grid.height || logits.width != grid.width || logits.vocab != grid.vocab ||
      logits.values.size() != grid.positions() * grid.vocab) {
    fail(ErrorCode::PredictorShapeMismatch, "logits shape differs from H x W x K");
  }

  struct Candidate
  {
    std::size_t pos;
    std::uint32_t token;
    double confidence;
  };
  std::vector<Candidate> candidates;
  for (std::size_t pos = 0; pos < grid.positions(); ++pos) {
    if (state.revealed[pos] != 0) {
      continue;
    }
    const auto p = detail::tempered_softmax(logits.at(pos), temperature);
    const double u = uniform01(rng);
    std::size_t pick = p.size() - 1;
    double cdf = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      cdf += p[k];
      if (u < cdf) {
        pick = k;
        break;
      }
    }
    candidates.push_back({pos, static_cast<std::uint32_t>(pick), p[pick]});
  }

  const std::size_t target = masked_after_step(grid.positions(), state.step + 1, state.total_steps);
  const std::size_t masked_now = candidates.size();
  const std::size_t reveal = masked_now - std::min(target, masked_now);

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate & a, const Candidate & b) {
    return a.confidence > b.confidence;
  });
  for (std::size_t i = 0; i < reveal; ++i) {
    state.tokens.indices[candidates[i].pos] = candidates[i].token;
    state.revealed[candidates[i].pos] = 1;
  }
  ++state.step;
  return state;
}

/// (partially masked target, context) -> logits for every position.
using TokenPredictor = std::function<Logits(const TokenGrid &, const ContextWindow<TokenGrid> &)>;

struct TokenShape
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint32_t vocab = 0;
};

inline TokenGrid mgm_sample_frame(
  const TokenPredictor & predict, const ContextWindow<TokenGrid> & ctx, TokenShape shape,
  std::size_t steps, Rng & rng, double temperature = 1.0)
{
  MaskState state = MaskState::fully_masked(shape.height, shape.width, shape.vocab, steps);
  while (!state.done()) {
    const Logits logits = predict(state.tokens, ctx);
    state = mgm_unmask_step(logits, std::move(state), rng, temperature);
  }
  return std::move(state.tokens);
}

inline TokenGrid mgm_sample_frame(
  const TokenPredictor & predict, const ContextWindow<TokenGrid> & ctx, std::size_t steps,
  Rng & rng, double temperature = 1.0)
{
  const auto & ref = ctx.newest();
  return mgm_sample_frame(predict, ctx, {ref.height, ref.width, ref.vocab}, steps, rng, temperature);
}

inline constexpr double kOneHotMargin = 100.0;

/// Logits with `margin` on the listed token at each position, zero elsewhere.
inline Logits one_hot_logits(const TokenGrid & target, double margin = kOneHotMargin)
{
  Logits out(target.height, target.width, target.vocab);
  for (std::size_t pos = 0; pos < target.positions(); ++pos) {
    const auto idx = target.indices[pos];
    if (idx >= target.vocab) {
      fail(ErrorCode::MaskedTokenPresent, "one-hot target contains MASK");
    }
    out.at(pos)[idx] = margin;
  }
  return out;
}

inline TokenPredictor constant_token_predictor(std::uint32_t token)
{
  return [token](const TokenGrid & masked, const ContextWindow<TokenGrid> &) {
    return one_hot_logits(TokenGrid(masked.height, masked.width, masked.vocab, token));
  };
}

/// One-hot at the newest context frame: the copying limit.
inline TokenPredictor copy_token_predictor()
{
  return [](const TokenGrid &, const ContextWindow<TokenGrid> & ctx) {
    return one_hot_logits(ctx.newest());
  };
}

inline TokenPredictor fixed_token_predictor(TokenGrid target)
{
  return [target = std::move(target)](const TokenGrid &, const ContextWindow<TokenGrid> &) {
    return one_hot_logits(target);
  };
}

/// Constant grid of (newest first token + 1) mod K.
inline TokenPredictor stamp_token_predictor()
{
  return [](const TokenGrid & masked, const ContextWindow<TokenGrid> & ctx) {
    const auto next = (ctx.newest().indices.at(0) + 1) % masked.vocab;
    return one_hot_logits(TokenGrid(masked.height, masked.width, masked.vocab, next));
  };
}

// ---------------------------------------------------------------------------
// Sliding-window rollout

template <typename Frame>
struct RolloutResult
{
  std::vector<Frame> frames;
  ContextWindow<Frame> context;
};

/**
 * Autoregressive rollout: each generated frame is appended to the context
 * and the oldest frame is dropped. `sample_next` is called with the current
 * context and must return the next frame.
 */
template <typename Frame, typename Sampler>
RolloutResult<Frame> rollout(Sampler && sample_next, ContextWindow<Frame> ctx, std::size_t num_frames)
{
  if (!ctx.full()) {
    fail(
      ErrorCode::ContextUnderfilled, "rollout needs " + std::to_string(ctx.capacity()) +
                                       " context frames, got " + std::to_string(ctx.size()));
  }
  if (num_frames < 1) {
    fail(ErrorCode::InvalidArgument, "rollout needs at least one frame");
  }
  std::vector<Frame> out;
  out.reserve(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    Frame next = sample_next(std::as_const(ctx));
    ctx.push(next);
    out.push_back(std::move(next));
  }
  return {std::move(out), std::move(ctx)};
}

// ---------------------------------------------------------------------------
// Context corruption used during training

/**
 * With probability `p_apply`, every frame becomes
 * fm_interpolate(frame, fresh noise, tau) with its own tau ~ U(0, tau_max).
 *
 * Draw order: one uniform for the apply decision; then per frame, oldest
 * first, one uniform for tau followed by the frame's noise entries.
 */
inline ContextWindow<FrameLatent> context_noise_fm(
  ContextWindow<FrameLatent> ctx, Rng & rng, double tau_max = kDefaultContextNoiseTauMax,
  double p_apply = kDefaultContextNoiseProb)
{
  if (!(tau_max >= 0.0 && tau_max <= 1.0) || !(p_apply >= 0.0 && p_apply <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "tau_max and p_apply must lie in [0, 1]");
  }
  if (!(uniform01(rng) < p_apply)) {
    return ctx;
  }
  for (auto & frame : ctx.frames()) {
    const double tau = tau_max * uniform01(rng);
    FrameLatent eps(frame.height, frame.width, frame.channels);
    fill_standard_normal(rng, eps.values);
    frame = fm_interpolate(frame, eps, tau);
  }
  return ctx;
}

/**
 * Replaces round(frame_frac * N) whole frames with all-MASK grids, then
 * round(token_frac * remaining tokens) positions spread uniformly over the
 * surviving frames. Rounding is half up.
 */
inline ContextWindow<TokenGrid> context_augment_mgm(
  ContextWindow<TokenGrid> ctx, Rng & rng, double frame_frac = kDefaultMaskFrameFrac,
  double token_frac = kDefaultMaskTokenFrac)
{
  if (!(frame_frac >= 0.0 && frame_frac <= 1.0) || !(token_frac >= 0.0 && token_frac <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "augmentation fractions must lie in [0, 1]");
  }
  auto & frames = ctx.frames();
  const std::size_t n = frames.size();
  const std::size_t n_frames = std::min(n, round_half_up(frame_frac * static_cast<double>(n)));
  std::vector<std::uint8_t> dropped(n, 0);
  for (std::size_t f : sample_without_replacement(n, n_frames, rng)) {
    dropped[f] = 1;
    auto & g = frames[f];
    std::fill(g.indices.begin(), g.indices.end(), g.mask_token());
  }

  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t f = 0; f < n; ++f) {
    if (dropped[f] == 0) {
      for (std::size_t pos = 0; pos < frames[f].positions(); ++pos) {
        slots.emplace_back(f, pos);
      }
    }
  }
  const std::size_t n_tokens = round_half_up(token_frac * static_cast<double>(slots.size()));
  for (std::size_t s : sample_without_replacement(slots.size(), n_tokens, rng)) {
    auto & g = frames[slots[s].first];
    g.indices[slots[s].second] = g.mask_token();
  }
  return ctx;
}

/// nullopt is the "no context" signal for unconditional generation.
template <typename Frame>
std::optional<ContextWindow<Frame>> context_dropout(
  ContextWindow<Frame> ctx, Rng & rng, double p = kDefaultContextDropProb)
{
  if (!(p >= 0.0 && p <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "dropout probability must lie in [0, 1]");
  }
  if (uniform01(rng) < p) {
    return std::nullopt;
  }
  return ctx;
}

}  // namespace wmkit
