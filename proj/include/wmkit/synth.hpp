#pragma once

#include "wmkit/error.hpp"
#include "wmkit/metrics.hpp"
#include "wmkit/random.hpp"
#include "wmkit/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace wmkit
{

enum class BehaviorKind
{
  Straight,
  ConstantTurn,
  PrematureStop,
  LateralSlide,
  Jitter,
};

/// Unicycle parameters. `yaw_rate` applies to every kind except Straight,
/// so failure modes can be layered on top of a turn.
struct BehaviorPreset
{
  BehaviorKind kind = BehaviorKind::Straight;
  double speed = 10.0;       // m/s
  double yaw_rate = 0.0;     // rad/s
  double stop_time = 0.0;    // s, PrematureStop
  double slide_rate = 0.0;   // m/s along the heading normal, LateralSlide
  double jitter_std = 0.0;   // m, Jitter

  void validate() const
  {
    if (!(speed >= 0.0) || !(jitter_std >= 0.0) || !std::isfinite(speed) || !std::isfinite(yaw_rate) ||
        !std::isfinite(stop_time) || !std::isfinite(slide_rate) || !std::isfinite(jitter_std)) {
      fail(ErrorCode::InvalidPreset, "preset needs finite values, speed >= 0 and jitter_std >= 0");
    }
  }
};

constexpr std::string_view to_string(BehaviorKind k)
{
  switch (k) {
    case BehaviorKind::Straight: return "straight";
    case BehaviorKind::ConstantTurn: return "turn";
    case BehaviorKind::PrematureStop: return "stop";
    case BehaviorKind::LateralSlide: return "slide";
    case BehaviorKind::Jitter: return "jitter";
  }
  return "unknown";
}

/// Named demo presets used by the CLI.
inline std::optional<BehaviorPreset> preset_by_name(std::string_view name)
{
  if (name == "straight") {
    return BehaviorPreset{BehaviorKind::Straight, 10.0, 0.0, 0.0, 0.0, 0.0};
  }
  if (name == "turn") {
    return BehaviorPreset{BehaviorKind::ConstantTurn, 8.0, 0.2, 0.0, 0.0, 0.0};
  }
  if (name == "stop") {
    return BehaviorPreset{BehaviorKind::PrematureStop, 8.0, 0.2, 3.0, 0.0, 0.0};
  }
  if (name == "slide") {
    return BehaviorPreset{BehaviorKind::LateralSlide, 8.0, 0.2, 0.0, 1.5, 0.0};
  }
  if (name == "jitter") {
    return BehaviorPreset{BehaviorKind::Jitter, 8.0, 0.2, 0.0, 0.0, 0.5};
  }
  return std::nullopt;
}

/**
 * Integrates a planar unicycle with explicit Euler at 1 / rate.
 *
 * Frame i sits at t = i / rate; there are floor(duration * rate) + 1 frames.
 * Per step: heading += yaw_rate * dt, then position += speed * dt along the
 * new heading. A stopped vehicle (PrematureStop, t >= stop_time) neither
 * moves nor turns. LateralSlide translates along the heading normal without
 * turning. Jitter perturbs the recorded position only, so the underlying
 * motion stays smooth. Poses have z = 0 and yaw equal to the heading.
 */
inline PoseSequence gen_trajectory(const BehaviorPreset & preset, double duration, double rate, Rng & rng)
{
  preset.validate();
  if (!(rate > 0.0) || !(duration * rate >= 2.0 - 1e-9)) {
    fail(ErrorCode::InvalidArgument, "duration * rate must be at least 2");
  }
  const auto frames = static_cast<std::size_t>(std::floor(duration * rate + 1e-9)) + 1;
  const double dt = 1.0 / rate;
  const double turn = preset.kind == BehaviorKind::Straight ? 0.0 : preset.yaw_rate;
  const double slide = preset.kind == BehaviorKind::LateralSlide ? preset.slide_rate : 0.0;
  const double jitter = preset.kind == BehaviorKind::Jitter ? preset.jitter_std : 0.0;

  std::normal_distribution<double> noise(0.0, 1.0);
  Point2 pos = Point2::Zero();
  double heading = 0.0;
  std::vector<Pose> poses;
  poses.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    Point2 recorded = pos;
    if (jitter > 0.0) {
      recorded.x() += jitter * noise(rng);
      recorded.y() += jitter * noise(rng);
    }
    poses.push_back(Pose::from_yaw(heading, {recorded.x(), recorded.y(), 0.0}));

    const double t = static_cast<double>(i) * dt;
    const bool stopped = preset.kind == BehaviorKind::PrematureStop && t >= preset.stop_time - 1e-12;
    if (!stopped) {
      heading += turn * dt;
      pos += preset.speed * dt * Point2(std::cos(heading), std::sin(heading));
      pos += slide * dt * Point2(-std::sin(heading), std::cos(heading));
    }
  }
  return PoseSequence::uniform(std::move(poses), rate);
}

/// Half-widths of the uniform parameter perturbation per trajectory.
struct PresetSpread
{
  double speed = 0.0;
  double yaw_rate = 0.0;
  double stop_time = 0.0;
  double slide_rate = 0.0;
  double jitter_std = 0.0;
};

/**
 * n trajectories with parameters drawn uniformly within +-spread of the
 * preset. Each trajectory gets its own engine seeded from one 64-bit draw of
 * `rng`, in order, and its parameters are drawn from that child engine, so
 * member i only depends on the parent seed and i.
 */
inline std::vector<PoseSequence> gen_set(
  const BehaviorPreset & preset, std::size_t n, double duration, double rate, Rng & rng,
  const PresetSpread & spread = {})
{
  if (n < 1) {
    fail(ErrorCode::InvalidArgument, "gen_set needs n >= 1");
  }
  preset.validate();
  std::vector<Rng::result_type> seeds(n);
  for (auto & s : seeds) {
    s = rng();
  }
  auto jittered = [](Rng & child, double base, double half_width) {
    return half_width > 0.0 ? base + half_width * (2.0 * uniform01(child) - 1.0) : base;
  };
  std::vector<PoseSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng child(seeds[i]);
    BehaviorPreset p = preset;
    p.speed = std::max(0.0, jittered(child, preset.speed, spread.speed));
    p.yaw_rate = jittered(child, preset.yaw_rate, spread.yaw_rate);
    p.stop_time = jittered(child, preset.stop_time, spread.stop_time);
    p.slide_rate = jittered(child, preset.slide_rate, spread.slide_rate);
    p.jitter_std = std::max(0.0, jittered(child, preset.jitter_std, spread.jitter_std));
    out.push_back(gen_trajectory(p, duration, rate, child));
  }
  return out;
}

inline TrajectorySet to_trajectory_set(std::string label, const std::vector<PoseSequence> & seqs)
{
  TrajectorySet set{std::move(label), {}};
  set.paths.reserve(seqs.size());
  for (const auto & s : seqs) {
    set.paths.push_back(planar_project(s));
  }
  return set;
}

}  // namespace wmkit
