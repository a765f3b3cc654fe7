#pragma once

#include "wmkit/error.hpp"
#include "wmkit/metrics.hpp"
#include "wmkit/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace wmkit
{

inline constexpr int kReportVersion = 1;
inline constexpr double kDefaultWindowSeconds = 4.0;  // published
inline constexpr double kDefaultEvalRate = 5.0;       // published
inline constexpr std::size_t kDefaultK = 3;

enum class WindowMode
{
  Chunked,
  Cumulative,
};

constexpr std::string_view to_string(WindowMode m)
{
  return m == WindowMode::Chunked ? "chunked" : "cumulative";
}

struct WindowSpec
{
  WindowMode mode = WindowMode::Chunked;
  double window_seconds = kDefaultWindowSeconds;
  double rate = kDefaultEvalRate;
  double horizon_seconds = 20.0;

  /// Frames per window; throws InvalidSpec unless window * rate is a
  /// positive integer and the horizon holds at least one window.
  std::size_t frames_per_window() const
  {
    if (!(window_seconds > 0.0) || !(rate > 0.0) || !std::isfinite(window_seconds * rate)) {
      fail(ErrorCode::InvalidSpec, "window length and rate must be positive");
    }
    const double f = window_seconds * rate;
    const double r = std::round(f);
    if (r < 1.0 || std::abs(f - r) > 1e-9) {
      fail(ErrorCode::InvalidSpec, "window_seconds * rate must be a positive integer");
    }
    if (!(horizon_seconds >= window_seconds - 1e-9)) {
      fail(ErrorCode::InvalidSpec, "horizon shorter than one window");
    }
    return static_cast<std::size_t>(r);
  }

  /// Whole windows inside the horizon; a partial trailing window is dropped.
  std::size_t window_count() const
  {
    frames_per_window();
    return static_cast<std::size_t>(std::floor(horizon_seconds / window_seconds + 1e-9));
  }
};

/// Half-open frame range [start, end).
struct Window
{
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t frames() const noexcept { return end - start; }
  bool operator==(const Window &) const = default;
};

inline std::vector<Window> chunked_windows(const WindowSpec & spec)
{
  const std::size_t len = spec.frames_per_window();
  std::vector<Window> out;
  for (std::size_t i = 0; i < spec.window_count(); ++i) {
    out.push_back({i * len, (i + 1) * len});
  }
  return out;
}

inline std::vector<Window> cumulative_windows(const WindowSpec & spec)
{
  const std::size_t len = spec.frames_per_window();
  std::vector<Window> out;
  for (std::size_t i = 1; i <= spec.window_count(); ++i) {
    out.push_back({0, i * len});
  }
  return out;
}

inline std::vector<Window> windows(const WindowSpec & spec)
{
  return spec.mode == WindowMode::Chunked ? chunked_windows(spec) : cumulative_windows(spec);
}

struct WindowScore
{
  Window window;
  double start_seconds = 0.0;
  double score = 0.0;
};

struct WindowScores
{
  WindowSpec spec;
  std::vector<WindowScore> scores;
};

/// Shortest member of a set, in frames. Overload for other set types.
inline std::size_t frame_count(const TrajectorySet & set)
{
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto & p : set.paths) {
    n = std::min(n, p.size());
  }
  return set.paths.empty() ? 0 : n;
}

template <typename Range>
  requires requires(const Range & r) { std::begin(r)->size(); }
std::size_t frame_count(const Range & sequences)
{
  std::size_t n = std::numeric_limits<std::size_t>::max();
  bool any = false;
  for (const auto & s : sequences) {
    n = std::min<std::size_t>(n, s.size());
    any = true;
  }
  return any ? n : 0;
}

/**
 * Scores every window of `spec`. `score(real, gen, window)` must be
 * deterministic; windows are labelled by their start time in seconds.
 */
template <typename Set, typename ScoreFn>
WindowScores evaluate_windows(ScoreFn && score, const Set & real, const Set & gen, const WindowSpec & spec)
{
  const auto ws = windows(spec);
  const std::size_t needed = ws.empty() ? 0 : ws.back().end;
  const std::size_t available = std::min(frame_count(real), frame_count(gen));
  if (available < needed) {
    fail(
      ErrorCode::HorizonExceeded, "sequences hold " + std::to_string(available) +
                                    " frames but the last window ends at " + std::to_string(needed));
  }
  WindowScores out{spec, {}};
  for (const auto & w : ws) {
    out.scores.push_back(
      {w, static_cast<double>(w.start) / spec.rate, static_cast<double>(score(real, gen, w))});
  }
  return out;
}

inline TrajectorySet slice(const TrajectorySet & set, Window w)
{
  TrajectorySet out{set.label, {}};
  for (const auto & p : set.paths) {
    PlanarPath s;
    s.sample_rate = p.sample_rate;
    s.points.assign(
      p.points.begin() + static_cast<std::ptrdiff_t>(w.start),
      p.points.begin() + static_cast<std::ptrdiff_t>(w.end));
    out.paths.push_back(std::move(s));
  }
  return out;
}

/// A parked vehicle has no heading to undo; only its offset is removed.
inline PlanarPath canonicalize_or_translate(const PlanarPath & path)
{
  try {
    return canonicalize(path);
  } catch (const Error & e) {
    if (e.code() != ErrorCode::DegenerateTrajectory) {
      throw;
    }
  }
  PlanarPath out{path.points, path.sample_rate};
  for (auto & p : out.points) {
    p -= path.points.front();
  }
  return out;
}

inline TrajectorySet canonicalized(const TrajectorySet & set)
{
  TrajectorySet out{set.label, {}};
  out.paths.reserve(set.size());
  for (const auto & p : set.paths) {
    out.paths.push_back(canonicalize_or_translate(p));
  }
  return out;
}

enum class PrField
{
  Precision,
  Recall,
};

/// Window score: trajectory precision or recall on each window's slice.
inline auto trajectory_window_score(std::size_t k, Metric metric, PrField field, bool canonicalize_slices = true)
{
  return [=](const TrajectorySet & real, const TrajectorySet & gen, Window w) {
    auto r = slice(real, w);
    auto g = slice(gen, w);
    if (canonicalize_slices) {
      r = canonicalized(r);
      g = canonicalized(g);
    }
    const auto pr = precision_recall(r, g, k, metric);
    return field == PrField::Precision ? pr.precision : pr.recall;
  };
}

struct TrajectoryReportOptions
{
  std::size_t k = kDefaultK;
  std::vector<Metric> metrics{Metric::Frechet, Metric::Ade};
  bool canonicalize = true;
  bool paired_ade = false;
};

struct TrajectoryReport
{
  TrajectoryReportOptions options;
  std::size_t real_count = 0;
  std::size_t gen_count = 0;
  std::optional<std::size_t> ade_point_count;  // common length used for ADE
  std::vector<PrecisionRecall> rows;           // Frechet first, then ADE
  std::optional<double> mean_paired_ade;
};

/// Resamples every path to the shortest length present in either set.
inline std::pair<TrajectorySet, TrajectorySet> common_length(const TrajectorySet & a, const TrajectorySet & b)
{
  const std::size_t n = std::min(frame_count(a), frame_count(b));
  auto fix = [n](const TrajectorySet & s) {
    TrajectorySet out{s.label, {}};
    for (const auto & p : s.paths) {
      out.paths.push_back(resample_points(p, n));
    }
    return out;
  };
  return {fix(a), fix(b)};
}

inline TrajectoryReport trajectory_report(
  const TrajectorySet & real, const TrajectorySet & gen, const TrajectoryReportOptions & options)
{
  TrajectoryReport report{options, real.size(), gen.size(), std::nullopt, {}, std::nullopt};
  const TrajectorySet r = options.canonicalize ? canonicalized(real) : real;
  const TrajectorySet g = options.canonicalize ? canonicalized(gen) : gen;

  const bool want_ade =
    options.paired_ade ||
    std::find(options.metrics.begin(), options.metrics.end(), Metric::Ade) != options.metrics.end();
  std::optional<std::pair<TrajectorySet, TrajectorySet>> equal_len;
  if (want_ade) {
    equal_len = common_length(r, g);
    report.ade_point_count = frame_count(equal_len->first);
  }

  for (Metric m : {Metric::Frechet, Metric::Ade}) {
    if (std::find(options.metrics.begin(), options.metrics.end(), m) == options.metrics.end()) {
      continue;
    }
    report.rows.push_back(
      m == Metric::Ade ? precision_recall(equal_len->first, equal_len->second, options.k, m)
                       : precision_recall(r, g, options.k, m));
  }

  if (options.paired_ade) {
    if (real.size() != gen.size() || real.size() == 0) {
      fail(ErrorCode::LengthMismatch, "paired ADE needs equally sized, non-empty sets");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) {
      sum += ade(equal_len->first.paths[i], equal_len->second.paths[i]);
    }
    report.mean_paired_ade = sum / static_cast<double>(real.size());
  }
  return report;
}

/// Stable field order: config, counts, results.
inline nlohmann::ordered_json to_json(const TrajectoryReport & report)
{
  nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
  for (Metric m : report.options.metrics) {
    metrics.push_back(std::string(to_string(m)));
  }
  nlohmann::ordered_json j;
  j["config"] = {
    {"k", report.options.k},
    {"metrics", metrics},
    {"canonicalize", report.options.canonicalize},
    {"threshold_inequality", "strict"},
    {"ade_length_alignment", "resample_to_min_count"},
    {"paired_ade", report.options.paired_ade},
  };
  j["counts"] = {{"real", report.real_count}, {"generated", report.gen_count}};
  if (report.ade_point_count) {
    j["counts"]["ade_points_per_path"] = *report.ade_point_count;
  }
  nlohmann::ordered_json table = nlohmann::ordered_json::object();
  for (const auto & row : report.rows) {
    const std::string name(to_string(row.metric));
    table[name + "_precision"] = row.precision;
    table[name + "_recall"] = row.recall;
  }
  j["results"] = table;
  if (report.mean_paired_ade) {
    j["mean_paired_ade"] = *report.mean_paired_ade;
  }
  return j;
}

inline nlohmann::ordered_json to_json(const WindowScores & ws)
{
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto & s : ws.scores) {
    rows.push_back(
      {{"start_frame", s.window.start},
       {"end_frame", s.window.end},
       {"start_seconds", s.start_seconds},
       {"score", s.score}});
  }
  return {
    {"mode", std::string(to_string(ws.spec.mode))},
    {"window_seconds", ws.spec.window_seconds},
    {"rate", ws.spec.rate},
    {"horizon_seconds", ws.spec.horizon_seconds},
    {"overlap", false},
    {"windows", rows}};
}

inline std::string to_csv(const WindowScores & ws)
{
  std::ostringstream out;
  out.precision(17);
  out << "window,start_frame,end_frame,start_seconds,score\n";
  for (std::size_t i = 0; i < ws.scores.size(); ++i) {
    const auto & s = ws.scores[i];
    out << i << ',' << s.window.start << ',' << s.window.end << ',' << s.start_seconds << ','
        << s.score << '\n';
  }
  return out.str();
}

}  // namespace wmkit
