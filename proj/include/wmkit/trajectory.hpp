#pragma once

#include "wmkit/error.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace wmkit
{

using Point2 = Eigen::Vector2d;

/// Published turn-selection threshold: initial yaw rate of at least 0.12 rad/s.
inline constexpr double kDefaultTurnThreshold = 0.12;

/// Absolute slack on the inclusive turn boundary. Yaw extracted from a
/// rotation matrix and divided by a timestamp difference is off by a few ulps,
/// which would otherwise flip an exact-boundary arc to "not a turn".
inline constexpr double kTurnBoundaryTolerance = 1e-9;

inline constexpr double kRotationTolerance = 1e-6;
inline constexpr double kTimestampTolerance = 1e-6;
inline constexpr double kCoincidentTolerance = 1e-9;

struct Pose
{
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();

  static Pose from_yaw(double yaw, const Eigen::Vector3d & position)
  {
    return {Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), position};
  }
};

inline bool is_rotation(const Eigen::Matrix3d & r, double tol = kRotationTolerance)
{
  if (!r.allFinite()) {
    return false;
  }
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// Heading about the world Z axis of a body whose forward axis is +x.
inline double yaw_of(const Eigen::Matrix3d & r) { return std::atan2(r(1, 0), r(0, 0)); }

/// Wraps an angle difference into (-pi, pi].
inline double wrap_angle(double a)
{
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, 2.0 * pi);
  if (a <= -pi) {
    a += 2.0 * pi;
  }
  return a;
}

/**
 * Timestamped SE(3) extrinsics, one per frame.
 *
 * Construction validates: at least two poses, one timestamp per pose,
 * strictly increasing timestamps, proper rotations. When `uniform` is set the
 * timestamps must also sit on the declared sample-rate grid (1e-6 s).
 */
class PoseSequence
{
public:
  PoseSequence(
    std::vector<Pose> poses, std::vector<double> timestamps, double sample_rate,
    bool uniform = true)
  : sample_rate_(sample_rate), poses_(std::move(poses)), timestamps_(std::move(timestamps))
  {
    validate(uniform);
  }

  /// Evenly spaced timestamps t0 + i / rate.
  static PoseSequence uniform(std::vector<Pose> poses, double sample_rate, double t0 = 0.0)
  {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
      fail(ErrorCode::InvalidRate, "sample rate must be positive and finite");
    }
    std::vector<double> ts(poses.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      ts[i] = t0 + static_cast<double>(i) / sample_rate;
    }
    return PoseSequence(std::move(poses), std::move(ts), sample_rate, true);
  }

  double sample_rate() const noexcept { return sample_rate_; }
  const std::vector<Pose> & poses() const noexcept { return poses_; }
  const std::vector<double> & timestamps() const noexcept { return timestamps_; }
  std::size_t size() const noexcept { return poses_.size(); }
  const Pose & operator[](std::size_t i) const { return poses_[i]; }

private:
  void validate(bool uniform) const
  {
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) {
      fail(ErrorCode::InvalidRate, "sample rate must be positive and finite");
    }
    if (poses_.size() < 2) {
      fail(ErrorCode::InvalidArgument, "pose sequence needs at least 2 poses");
    }
    if (timestamps_.size() != poses_.size()) {
      fail(ErrorCode::LengthMismatch, "one timestamp per pose required");
    }
    for (std::size_t i = 0; i < poses_.size(); ++i) {
      if (!is_rotation(poses_[i].rotation)) {
        fail(ErrorCode::InvalidArgument, "pose " + std::to_string(i) + " rotation is not in SO(3)");
      }
      if (!poses_[i].position.allFinite() || !std::isfinite(timestamps_[i])) {
        fail(ErrorCode::InvalidArgument, "pose " + std::to_string(i) + " is not finite");
      }
      if (i > 0 && !(timestamps_[i] > timestamps_[i - 1])) {
        fail(ErrorCode::InvalidArgument, "timestamps must be strictly increasing");
      }
      if (uniform) {
        const double expected = timestamps_[0] + static_cast<double>(i) / sample_rate_;
        if (std::abs(timestamps_[i] - expected) > kTimestampTolerance) {
          fail(
            ErrorCode::InconsistentRate,
            "timestamp " + std::to_string(i) + " is off the declared rate grid");
        }
      }
    }
  }

  double sample_rate_;
  std::vector<Pose> poses_;
  std::vector<double> timestamps_;
};

/// Ordered planar positions in meters.
struct PlanarPath
{
  std::vector<Point2> points;
  double sample_rate = 0.0;

  std::size_t size() const noexcept { return points.size(); }

  void validate() const
  {
    if (points.size() < 2) {
      fail(ErrorCode::InvalidArgument, "planar path needs at least 2 points");
    }
    for (const auto & p : points) {
      if (!p.allFinite()) {
        fail(ErrorCode::InvalidArgument, "planar path has non-finite coordinates");
      }
    }
  }
};

inline PlanarPath planar_project(const PoseSequence & seq)
{
  PlanarPath path;
  path.sample_rate = seq.sample_rate();
  path.points.reserve(seq.size());
  for (const auto & pose : seq.poses()) {
    path.points.emplace_back(pose.position.x(), pose.position.y());
  }
  return path;
}

namespace detail
{

/// Direction of the first displacement larger than the coincidence tolerance.
template <typename PositionAt>
double initial_heading(std::size_t n, PositionAt && position_at)
{
  const Point2 origin = position_at(0);
  for (std::size_t i = 1; i < n; ++i) {
    const Point2 d = position_at(i) - origin;
    if (d.norm() > kCoincidentTolerance) {
      return std::atan2(d.y(), d.x());
    }
  }
  fail(ErrorCode::DegenerateTrajectory, "all points coincide");
}

}  // namespace detail

/// Rigidly moves the path so it starts at the origin heading along +x.
inline PlanarPath canonicalize(const PlanarPath & path)
{
  if (path.size() < 2) {
    fail(ErrorCode::InvalidArgument, "canonicalize needs at least 2 points");
  }
  const double heading =
    detail::initial_heading(path.size(), [&](std::size_t i) { return path.points[i]; });
  const Eigen::Rotation2Dd undo(-heading);
  const Point2 origin = path.points.front();

  PlanarPath out;
  out.sample_rate = path.sample_rate;
  out.points.reserve(path.size());
  for (const auto & p : path.points) {
    out.points.push_back(undo * (p - origin));
  }
  return out;
}

/// Same rigid transform for full poses: translation to the first position,
/// rotation about world Z. Rotations are left-multiplied so relative
/// headings, and hence yaw rates, are unchanged.
inline PoseSequence canonicalize(const PoseSequence & seq)
{
  const double heading = detail::initial_heading(seq.size(), [&](std::size_t i) -> Point2 {
    return seq[i].position.head<2>();
  });
  const Eigen::Matrix3d undo =
    Eigen::AngleAxisd(-heading, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d origin = seq[0].position;

  std::vector<Pose> poses;
  poses.reserve(seq.size());
  for (const auto & pose : seq.poses()) {
    poses.push_back({undo * pose.rotation, undo * (pose.position - origin)});
  }
  return PoseSequence(poses, seq.timestamps(), seq.sample_rate(), false);
}

/// Wrapped heading change between frame_index and frame_index + 1 divided
/// by their time difference.
inline double yaw_rate(const PoseSequence & seq, std::size_t frame_index)
{
  if (frame_index + 1 >= seq.size()) {
    fail(
      ErrorCode::IndexOutOfRange, "yaw_rate index " + std::to_string(frame_index) +
                                    " needs a following frame (size " +
                                    std::to_string(seq.size()) + ")");
  }
  const double dyaw =
    wrap_angle(yaw_of(seq[frame_index + 1].rotation) - yaw_of(seq[frame_index].rotation));
  const double dt = seq.timestamps()[frame_index + 1] - seq.timestamps()[frame_index];
  return dyaw / dt;
}

inline bool is_turn_event(const PoseSequence & seq, double threshold = kDefaultTurnThreshold)
{
  if (!(threshold > 0.0)) {
    fail(ErrorCode::InvalidArgument, "turn threshold must be positive");
  }
  return std::abs(yaw_rate(seq, 0)) >= threshold - kTurnBoundaryTolerance;
}

/**
 * Changes the sampling rate of a pose sequence.
 *
 * If the source rate is an integer multiple of `target_hz` every m-th pose is
 * kept. Any other ratio below the source rate uses linear interpolation of
 * positions and slerp of rotations on the target time grid. Upsampling is
 * rejected.
 */
inline PoseSequence resample(const PoseSequence & seq, double target_hz)
{
  const double source_hz = seq.sample_rate();
  if (!(target_hz > 0.0) || !std::isfinite(target_hz)) {
    fail(ErrorCode::InvalidRate, "target rate must be positive");
  }
  if (target_hz > source_hz * (1.0 + 1e-12)) {
    fail(ErrorCode::InvalidRate, "target rate exceeds source rate");
  }

  const double ratio = source_hz / target_hz;
  const double stride = std::round(ratio);
  if (std::abs(ratio - stride) <= 1e-9) {
    const auto step = static_cast<std::size_t>(stride);
    std::vector<Pose> poses;
    std::vector<double> ts;
    for (std::size_t i = 0; i < seq.size(); i += step) {
      poses.push_back(seq[i]);
      ts.push_back(seq.timestamps()[i]);
    }
    if (poses.size() < 2) {
      fail(ErrorCode::InvalidRate, "decimated sequence would have fewer than 2 poses");
    }
    return PoseSequence(std::move(poses), std::move(ts), target_hz, false);
  }

  const auto & src_ts = seq.timestamps();
  const double t0 = src_ts.front();
  const double t_end = src_ts.back();
  std::vector<Pose> poses;
  std::vector<double> ts;
  std::size_t seg = 0;
  for (std::size_t i = 0;; ++i) {
    const double t = t0 + static_cast<double>(i) / target_hz;
    if (t > t_end + 1e-9) {
      break;
    }
    while (seg + 2 < src_ts.size() && src_ts[seg + 1] < t) {
      ++seg;
    }
    const double span = src_ts[seg + 1] - src_ts[seg];
    const double w = std::clamp((t - src_ts[seg]) / span, 0.0, 1.0);
    const Eigen::Quaterniond qa(seq[seg].rotation);
    const Eigen::Quaterniond qb(seq[seg + 1].rotation);
    poses.push_back(
      {qa.slerp(w, qb).normalized().toRotationMatrix(),
       (1.0 - w) * seq[seg].position + w * seq[seg + 1].position});
    ts.push_back(t);
  }
  if (poses.size() < 2) {
    fail(ErrorCode::InvalidRate, "resampled sequence would have fewer than 2 poses");
  }
  return PoseSequence(std::move(poses), std::move(ts), target_hz, false);
}

}  // namespace wmkit
