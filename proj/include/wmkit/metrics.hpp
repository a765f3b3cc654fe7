#pragma once

#include "wmkit/error.hpp"
#include "wmkit/trajectory.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wmkit
{

enum class Metric
{
  Ade,
  Frechet,
};

constexpr std::string_view to_string(Metric m)
{
  return m == Metric::Ade ? "ade" : "frechet";
}

/// Mean Euclidean distance between time-aligned points.
inline double ade(std::span<const Point2> a, std::span<const Point2> b)
{
  if (a.empty() || b.empty()) {
    fail(ErrorCode::EmptyPath, "ADE of an empty path");
  }
  if (a.size() != b.size()) {
    fail(
      ErrorCode::LengthMismatch,
      "ADE needs equal lengths, got " + std::to_string(a.size()) + " and " +
        std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    sum += (a[t] - b[t]).norm();
  }
  return sum / static_cast<double>(a.size());
}

/**
 * Discrete Frechet distance, O(m*n) time and O(n) memory.
 *
 * dp[i][j] = max(|a_i - b_j|, min(dp[i-1][j], dp[i][j-1], dp[i-1][j-1]))
 */
inline double discrete_frechet(std::span<const Point2> a, std::span<const Point2> b)
{
  if (a.empty() || b.empty()) {
    fail(ErrorCode::EmptyPath, "Frechet distance of an empty path");
  }
  const std::size_t n = b.size();
  std::vector<double> prev(n), curr(n);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = (a[i] - b[j]).norm();
      double reach;
      if (i == 0 && j == 0) {
        reach = d;
      } else if (i == 0) {
        reach = curr[j - 1];
      } else if (j == 0) {
        reach = prev[j];
      } else {
        reach = std::min({prev[j], curr[j - 1], prev[j - 1]});
      }
      curr[j] = std::max(d, reach);
    }
    std::swap(prev, curr);
  }
  return prev[n - 1];
}

inline double ade(const PlanarPath & a, const PlanarPath & b) { return ade(a.points, b.points); }

inline double discrete_frechet(const PlanarPath & a, const PlanarPath & b)
{
  return discrete_frechet(a.points, b.points);
}

inline double distance(Metric metric, const PlanarPath & a, const PlanarPath & b)
{
  return metric == Metric::Ade ? ade(a, b) : discrete_frechet(a, b);
}

struct TrajectorySet
{
  std::string label;
  std::vector<PlanarPath> paths;

  std::size_t size() const noexcept { return paths.size(); }
};

struct DistanceMatrix
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double & operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

namespace detail
{

inline void require_uniform_lengths(const TrajectorySet & a, const TrajectorySet & b)
{
  std::size_t len = 0;
  for (const auto * set : {&a, &b}) {
    for (const auto & p : set->paths) {
      if (len == 0) {
        len = p.size();
      } else if (p.size() != len) {
        fail(
          ErrorCode::LengthMismatch, "ADE mode needs equal path lengths, found " +
                                       std::to_string(len) + " and " + std::to_string(p.size()));
      }
    }
  }
}

}  // namespace detail

inline DistanceMatrix pairwise_distances(
  const TrajectorySet & src, const TrajectorySet & dst, Metric metric)
{
  if (metric == Metric::Ade) {
    detail::require_uniform_lengths(src, dst);
  }
  DistanceMatrix m{src.size(), dst.size(), std::vector<double>(src.size() * dst.size())};
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < dst.size(); ++j) {
      m(i, j) = distance(metric, src.paths[i], dst.paths[j]);
    }
  }
  return m;
}

/// Self-distance matrix; only the upper triangle is evaluated and mirrored,
/// so the result is exactly symmetric with a zero diagonal.
inline DistanceMatrix self_distances(const TrajectorySet & set, Metric metric)
{
  if (metric == Metric::Ade) {
    detail::require_uniform_lengths(set, set);
  }
  const std::size_t n = set.size();
  DistanceMatrix m{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m(i, j) = m(j, i) = distance(metric, set.paths[i], set.paths[j]);
    }
  }
  return m;
}

struct KnnThresholds
{
  std::size_t k = 0;
  std::vector<double> radius;  // per element, meters
};

/// k-th smallest distance from each element to the others (self excluded,
/// duplicates counted).
inline KnnThresholds knn_thresholds(const DistanceMatrix & self, std::size_t k)
{
  if (k < 1) {
    fail(ErrorCode::InvalidArgument, "k must be at least 1");
  }
  if (self.rows < k + 1) {
    fail(
      ErrorCode::SetTooSmall, "set of size " + std::to_string(self.rows) + " cannot supply k=" +
                                std::to_string(k) + " neighbors (needs k+1 elements)");
  }
  KnnThresholds out{k, std::vector<double>(self.rows)};
  std::vector<double> others;
  others.reserve(self.rows - 1);
  for (std::size_t i = 0; i < self.rows; ++i) {
    others.clear();
    for (std::size_t j = 0; j < self.cols; ++j) {
      if (j != i) {
        others.push_back(self(i, j));
      }
    }
    std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end());
    out.radius[i] = others[k - 1];
  }
  return out;
}

inline KnnThresholds knn_thresholds(const TrajectorySet & set, std::size_t k, Metric metric)
{
  if (k >= 1 && set.size() < k + 1) {
    fail(
      ErrorCode::SetTooSmall, "set '" + set.label + "' of size " + std::to_string(set.size()) +
                                " cannot supply k=" + std::to_string(k) + " neighbors");
  }
  return knn_thresholds(self_distances(set, metric), k);
}

struct PrecisionRecall
{
  double precision = 0.0;
  double recall = 0.0;
  std::size_t k = 0;
  Metric metric = Metric::Frechet;
};

/**
 * k-NN precision/recall between a real and a generated set.
 *
 * A generated element is precise when it falls strictly inside the k-NN ball
 * of some real element; a real element is recalled when it falls strictly
 * inside the k-NN ball of some generated element.
 */
inline PrecisionRecall precision_recall(
  const TrajectorySet & real, const TrajectorySet & gen, std::size_t k, Metric metric)
{
  if (metric == Metric::Ade) {
    detail::require_uniform_lengths(real, gen);
  }
  const KnnThresholds real_radius = knn_thresholds(real, k, metric);
  const KnnThresholds gen_radius = knn_thresholds(gen, k, metric);
  const DistanceMatrix cross = pairwise_distances(real, gen, metric);

  std::size_t precise = 0;
  for (std::size_t j = 0; j < gen.size(); ++j) {
    for (std::size_t i = 0; i < real.size(); ++i) {
      if (cross(i, j) < real_radius.radius[i]) {
        ++precise;
        break;
      }
    }
  }
  std::size_t recalled = 0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    for (std::size_t j = 0; j < gen.size(); ++j) {
      if (cross(i, j) < gen_radius.radius[j]) {
        ++recalled;
        break;
      }
    }
  }
  return {
    static_cast<double>(precise) / static_cast<double>(gen.size()),
    static_cast<double>(recalled) / static_cast<double>(real.size()), k, metric};
}

/// Linear resampling by fractional index to `count` points.
inline PlanarPath resample_points(const PlanarPath & path, std::size_t count)
{
  if (path.size() < 2 || count < 2) {
    fail(ErrorCode::InvalidArgument, "resample_points needs at least 2 input and output points");
  }
  if (count == path.size()) {
    return path;
  }
  PlanarPath out;
  out.points.reserve(count);
  const double scale = static_cast<double>(path.size() - 1) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = static_cast<double>(i) * scale;
    const auto lo = std::min(static_cast<std::size_t>(s), path.size() - 2);
    const double w = s - static_cast<double>(lo);
    out.points.push_back((1.0 - w) * path.points[lo] + w * path.points[lo + 1]);
  }
  out.sample_rate = path.sample_rate / scale;
  return out;
}

}  // namespace wmkit
