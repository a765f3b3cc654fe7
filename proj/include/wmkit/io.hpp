#pragma once

#include "wmkit/error.hpp"
#include "wmkit/quantizer.hpp"
#include "wmkit/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace wmkit
{

// ---------------------------------------------------------------------------
// Trajectory files
//
//   # wmkit-trajectory v1 flavor=<matrix|quat> rate=<Hz> frames=<N>
//   <t> <16 row-major extrinsic entries>        (matrix)
//   <t> <x> <y> <z> <qw> <qx> <qy> <qz>          (quat)
//
// Blank lines and further '#' lines are ignored.

enum class PoseFlavor
{
  Matrix,
  Quat,
};

constexpr std::string_view to_string(PoseFlavor f) { return f == PoseFlavor::Matrix ? "matrix" : "quat"; }

inline std::optional<PoseFlavor> parse_flavor(std::string_view s)
{
  if (s == "matrix") {
    return PoseFlavor::Matrix;
  }
  if (s == "quat") {
    return PoseFlavor::Quat;
  }
  return std::nullopt;
}

inline constexpr std::string_view kTrajectoryMagic = "wmkit-trajectory";
inline constexpr std::string_view kTrajectoryExtension = ".traj";

namespace detail
{

[[noreturn]] inline void parse_fail(const std::string & where, std::size_t line, const std::string & reason)
{
  fail(ErrorCode::ParseError, where + ":" + std::to_string(line) + ": " + reason);
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') {
      ++i;
    }
    if (i > start) {
      out.push_back(s.substr(start, i - start));
    }
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s)
{
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline std::ostream & write_double(std::ostream & os, double v)
{
  return os << std::setprecision(17) << v;
}

}  // namespace detail

inline void write_trajectory(std::ostream & os, const PoseSequence & seq, PoseFlavor flavor)
{
  os << "# " << kTrajectoryMagic << " v1 flavor=" << to_string(flavor) << " rate=";
  detail::write_double(os, seq.sample_rate()) << " frames=" << seq.size() << '\n';
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Pose & p = seq[i];
    detail::write_double(os, seq.timestamps()[i]);
    if (flavor == PoseFlavor::Matrix) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          detail::write_double(os << ' ', p.rotation(r, c));
        }
        detail::write_double(os << ' ', p.position(r));
      }
      os << " 0 0 0 1";
    } else {
      Eigen::Quaterniond q(p.rotation);
      q.normalize();
      if (q.w() < 0.0) {
        q.coeffs() *= -1.0;
      }
      for (double v : {p.position.x(), p.position.y(), p.position.z(), q.w(), q.x(), q.y(), q.z()}) {
        detail::write_double(os << ' ', v);
      }
    }
    os << '\n';
  }
}

inline void save_trajectory(const std::filesystem::path & path, const PoseSequence & seq, PoseFlavor flavor)
{
  std::ofstream out(path);
  if (!out) {
    fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  }
  write_trajectory(out, seq, flavor);
  if (!out) {
    fail(ErrorCode::IoError, "write failed for " + path.string());
  }
}

/**
 * Parses one trajectory document. `where` names the source in error
 * messages (file:line). If `expected` is set the header flavor must match.
 */
inline PoseSequence read_trajectory(
  std::istream & in, const std::string & where, std::optional<PoseFlavor> expected = std::nullopt)
{
  std::string line;
  std::size_t lineno = 0;
  std::optional<PoseFlavor> flavor;
  std::optional<double> rate;
  std::optional<std::size_t> declared_frames;

  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) {
      continue;
    }
    if (tok.size() < 2 || tok[0] != "#" || tok[1] != kTrajectoryMagic) {
      detail::parse_fail(where, lineno, "missing '# wmkit-trajectory' header");
    }
    if (tok.size() < 3 || tok[2] != "v1") {
      detail::parse_fail(where, lineno, "unsupported trajectory format version");
    }
    for (std::size_t i = 3; i < tok.size(); ++i) {
      const auto eq = tok[i].find('=');
      if (eq == std::string_view::npos) {
        detail::parse_fail(where, lineno, "malformed header field '" + std::string(tok[i]) + "'");
      }
      const auto key = tok[i].substr(0, eq);
      const auto val = tok[i].substr(eq + 1);
      if (key == "flavor") {
        flavor = parse_flavor(val);
        if (!flavor) {
          detail::parse_fail(where, lineno, "unknown flavor '" + std::string(val) + "'");
        }
      } else if (key == "rate") {
        rate = detail::to_double(val);
        if (!rate || !(*rate > 0.0)) {
          detail::parse_fail(where, lineno, "rate must be a positive number");
        }
      } else if (key == "frames") {
        const auto f = detail::to_double(val);
        if (!f || *f < 0.0 || std::floor(*f) != *f) {
          detail::parse_fail(where, lineno, "frames must be a non-negative integer");
        }
        declared_frames = static_cast<std::size_t>(*f);
      }
    }
    if (!flavor || !rate || !declared_frames) {
      detail::parse_fail(where, lineno, "header needs flavor, rate and frames");
    }
    break;
  }
  if (!flavor) {
    detail::parse_fail(where, lineno, "empty trajectory file");
  }
  if (expected && *expected != *flavor) {
    detail::parse_fail(where, 1, "expected flavor " + std::string(to_string(*expected)));
  }

  const std::size_t fields = *flavor == PoseFlavor::Matrix ? 17 : 8;
  std::vector<Pose> poses;
  std::vector<double> ts;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') {
      continue;
    }
    if (tok.size() != fields) {
      detail::parse_fail(
        where, lineno, "expected " + std::to_string(fields) + " fields, got " + std::to_string(tok.size()));
    }
    std::vector<double> v(fields);
    for (std::size_t i = 0; i < fields; ++i) {
      const auto d = detail::to_double(tok[i]);
      if (!d) {
        detail::parse_fail(where, lineno, "not a finite number: '" + std::string(tok[i]) + "'");
      }
      v[i] = *d;
    }
    Pose pose;
    if (*flavor == PoseFlavor::Matrix) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          pose.rotation(r, c) = v[1 + 4 * r + c];
        }
        pose.position(r) = v[1 + 4 * r + 3];
      }
      const double bottom = std::abs(v[13]) + std::abs(v[14]) + std::abs(v[15]) + std::abs(v[16] - 1.0);
      if (bottom > kRotationTolerance) {
        detail::parse_fail(where, lineno, "extrinsic bottom row must be 0 0 0 1");
      }
      if (!is_rotation(pose.rotation)) {
        detail::parse_fail(where, lineno, "rotation block is not orthonormal with det +1");
      }
    } else {
      Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
      if (std::abs(q.norm() - 1.0) > kRotationTolerance) {
        std::ostringstream msg;
        msg << "quaternion norm " << q.norm() << " is not 1";
        detail::parse_fail(where, lineno, msg.str());
      }
      pose.rotation = q.normalized().toRotationMatrix();
      pose.position = {v[1], v[2], v[3]};
    }
    if (!ts.empty() && !(v[0] > ts.back())) {
      detail::parse_fail(where, lineno, "timestamps must be strictly increasing");
    }
    ts.push_back(v[0]);
    poses.push_back(pose);
  }
  if (poses.size() != *declared_frames) {
    detail::parse_fail(
      where, lineno, "header declares " + std::to_string(*declared_frames) + " frames, found " +
                       std::to_string(poses.size()));
  }
  if (poses.size() < 2) {
    detail::parse_fail(where, lineno, "a trajectory needs at least 2 frames");
  }
  try {
    return PoseSequence(std::move(poses), std::move(ts), *rate, true);
  } catch (const Error & e) {
    fail(e.code() == ErrorCode::InconsistentRate ? ErrorCode::InconsistentRate : ErrorCode::ParseError,
         where + ": " + e.what());
  }
}

struct TrajectoryFileEntry
{
  std::filesystem::path path;
  PoseSequence sequence;
};

/// Lexicographically ordered `.traj` files of a directory, or a single file.
/// Every file in one call must declare the same rate.
inline std::vector<TrajectoryFileEntry> load_trajectories(
  const std::filesystem::path & path, std::optional<PoseFlavor> flavor = std::nullopt)
{
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto & entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == kTrajectoryExtension) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end(), [](const fs::path & a, const fs::path & b) {
      return a.filename().string() < b.filename().string();
    });
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    fail(ErrorCode::IoError, "no such file or directory: " + path.string());
  }

  std::vector<TrajectoryFileEntry> out;
  for (const auto & f : files) {
    std::ifstream in(f);
    if (!in) {
      fail(ErrorCode::IoError, "cannot open " + f.string());
    }
    out.push_back({f, read_trajectory(in, f.string(), flavor)});
    if (std::abs(out.back().sequence.sample_rate() - out.front().sequence.sample_rate()) > 1e-9) {
      fail(
        ErrorCode::InconsistentRate, f.string() + " declares a different rate than " +
                                       out.front().path.string());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rollout dumps: JSON Lines, one frame per line.
//
//   {"frame":i,"kind":"latent","shape":[H,W,C],"data":[...]}
//   {"frame":i,"kind":"tokens","shape":[H,W],"vocab":K,"data":[...]}

inline nlohmann::ordered_json frame_record(std::size_t index, const LatentGrid & g)
{
  return {
    {"frame", index}, {"kind", "latent"}, {"shape", {g.height, g.width, g.channels}}, {"data", g.values}};
}

inline nlohmann::ordered_json frame_record(std::size_t index, const TokenGrid & g)
{
  return {
    {"frame", index}, {"kind", "tokens"}, {"shape", {g.height, g.width}}, {"vocab", g.vocab},
    {"data", g.indices}};
}

template <typename Frame>
void write_frames_jsonl(std::ostream & os, const std::vector<Frame> & frames, std::size_t first_index = 0)
{
  for (std::size_t i = 0; i < frames.size(); ++i) {
    os << frame_record(first_index + i, frames[i]).dump() << '\n';
  }
}

namespace detail
{

template <typename Fn>
void for_each_record(const std::filesystem::path & path, Fn && fn)
{
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception & e) {
      parse_fail(path.string(), lineno, e.what());
    } catch (const Error & e) {
      parse_fail(path.string(), lineno, e.what());
    }
  }
}

}  // namespace detail

inline std::vector<TokenGrid> read_token_frames(const std::filesystem::path & path)
{
  std::vector<TokenGrid> out;
  detail::for_each_record(path, [&](const nlohmann::json & j) {
    if (j.at("kind").get<std::string>() != "tokens") {
      fail(ErrorCode::ParseError, "record is not a token frame");
    }
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) {
      fail(ErrorCode::ParseError, "token frame shape must be [H, W]");
    }
    TokenGrid g(shape[0], shape[1], j.at("vocab").get<std::uint32_t>(), j.at("data").get<std::vector<std::uint32_t>>());
    for (auto idx : g.indices) {
      if (idx > g.vocab) {
        fail(ErrorCode::ParseError, "token index beyond vocabulary");
      }
    }
    out.push_back(std::move(g));
  });
  return out;
}

inline std::vector<LatentGrid> read_latent_frames(const std::filesystem::path & path)
{
  std::vector<LatentGrid> out;
  detail::for_each_record(path, [&](const nlohmann::json & j) {
    if (j.at("kind").get<std::string>() != "latent") {
      fail(ErrorCode::ParseError, "record is not a latent frame");
    }
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) {
      fail(ErrorCode::ParseError, "latent frame shape must be [H, W, C]");
    }
    out.emplace_back(shape[0], shape[1], shape[2], j.at("data").get<std::vector<double>>());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Codebooks
//
// Binary: "WMCB", u32 version (1), u32 K, u32 d, K*d f32 row-major; all
// little-endian. JSON: {"format":"wmkit-codebook","version":1,"K":..,"d":..,
// "entries":[...]}.

inline constexpr char kCodebookMagic[4] = {'W', 'M', 'C', 'B'};
inline constexpr std::uint32_t kCodebookVersion = 1;

namespace detail
{

template <typename T>
T to_little(T v)
{
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream & os, T v)
{
  v = to_little(v);
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream & is)
{
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T))) {
    fail(ErrorCode::ParseError, "truncated codebook file");
  }
  return to_little(v);
}

}  // namespace detail

inline void write_codebook_binary(std::ostream & os, const Codebook & cb)
{
  os.write(kCodebookMagic, 4);
  detail::put<std::uint32_t>(os, kCodebookVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(cb.size()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(cb.dim()));
  for (double v : cb.entries()) {
    detail::put<float>(os, static_cast<float>(v));
  }
}

inline Codebook read_codebook_binary(std::istream & is)
{
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kCodebookMagic, 4) != 0) {
    fail(ErrorCode::ParseError, "not a codebook file (bad magic)");
  }
  if (detail::get<std::uint32_t>(is) != kCodebookVersion) {
    fail(ErrorCode::ParseError, "unsupported codebook version");
  }
  const auto k = detail::get<std::uint32_t>(is);
  const auto d = detail::get<std::uint32_t>(is);
  std::vector<double> entries(static_cast<std::size_t>(k) * d);
  for (double & v : entries) {
    v = detail::get<float>(is);
  }
  return Codebook(k, d, std::move(entries));
}

inline nlohmann::ordered_json codebook_to_json(const Codebook & cb)
{
  return {
    {"format", "wmkit-codebook"}, {"version", kCodebookVersion}, {"K", cb.size()}, {"d", cb.dim()},
    {"entries", cb.entries()}};
}

inline Codebook codebook_from_json(const nlohmann::json & j)
{
  try {
    if (j.at("format").get<std::string>() != "wmkit-codebook" ||
        j.at("version").get<std::uint32_t>() != kCodebookVersion) {
      fail(ErrorCode::ParseError, "unsupported codebook document");
    }
    return Codebook(
      j.at("K").get<std::size_t>(), j.at("d").get<std::size_t>(), j.at("entries").get<std::vector<double>>());
  } catch (const nlohmann::json::exception & e) {
    fail(ErrorCode::ParseError, std::string("codebook JSON: ") + e.what());
  }
}

}  // namespace wmkit
