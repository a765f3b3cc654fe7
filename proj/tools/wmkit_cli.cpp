// wmkit command-line front end: trajectory metrics, turn filtering, window
// tables, synthetic data, rollout simulation and copy-rate diagnostics.

#include "digest.hpp"

#include "wmkit/wmkit.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitPrecondition = 3;

constexpr const char * kDefaultsFooter =
  "Defaults (published values marked *):\n"
  "  k-NN neighbours k ............ 3\n"
  "  turn threshold ............... 0.12 rad/s *\n"
  "  evaluation window ............ 4 s *\n"
  "  evaluation rate .............. 5 Hz *\n"
  "  context ...................... 5 frames at 5 Hz *\n"
  "  flow-matching ODE steps ...... 30 *\n"
  "  KD temperatures .............. T=2, T'=0.2 *\n"
  "  KD weight .................... lambda=0.5 *\n"
  "  context noise ................ p=0.5 *, tau_max=0.3\n"
  "  context token masking ........ 10% frames, 10% tokens *\n"
  "  commitment beta .............. 0.25\n"
  "Exit codes: 0 ok, 1 usage, 2 parse/IO, 3 metric precondition.";

int exit_code_for(wmkit::ErrorCode code)
{
  using wmkit::ErrorCode;
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::InconsistentRate:
      return kExitIo;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidPreset:
    case ErrorCode::InvalidRate:
    case ErrorCode::InvalidSpec:
      return kExitUsage;
    default:
      return kExitPrecondition;
  }
}

void report_error(std::string_view code, int exit_code, const std::string & message)
{
  ordered_json j{{"error", code}, {"exit", exit_code}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

/// Writes `text` to `path`, or stdout for "-".
void emit(const std::string & path, const std::string & text)
{
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    wmkit::fail(wmkit::ErrorCode::IoError, "cannot write " + path);
  }
}

std::string utc_timestamp()
{
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<wmkit::TrajectoryFileEntry> load_or_warn(const std::string & path)
{
  auto entries = wmkit::load_trajectories(path);
  if (entries.empty()) {
    std::cerr << "warning: no trajectory files in " << path << '\n';
  }
  return entries;
}

ordered_json input_record(const std::string & path, const std::vector<wmkit::TrajectoryFileEntry> & entries)
{
  std::vector<fs::path> files;
  for (const auto & e : entries) {
    files.push_back(e.path);
  }
  return {{"path", path}, {"files", entries.size()}, {"digest", wmkit::cli::digest_files(files)}};
}

wmkit::TrajectorySet to_set(std::string label, const std::vector<wmkit::TrajectoryFileEntry> & entries)
{
  wmkit::TrajectorySet set{std::move(label), {}};
  for (const auto & e : entries) {
    set.paths.push_back(wmkit::planar_project(e.sequence));
  }
  return set;
}

// ---------------------------------------------------------------------------

struct TrajMetricsArgs
{
  std::string real;
  std::string gen;
  std::string metric = "both";
  std::size_t k = wmkit::kDefaultK;
  bool no_canonicalize = false;
  bool paired_ade = false;
  bool deterministic = false;
  std::string out = "-";
};

int run_traj_metrics(const TrajMetricsArgs & a)
{
  const auto real_files = load_or_warn(a.real);
  const auto gen_files = load_or_warn(a.gen);

  wmkit::TrajectoryReportOptions opts;
  opts.k = a.k;
  opts.canonicalize = !a.no_canonicalize;
  opts.paired_ade = a.paired_ade;
  if (a.metric == "ade") {
    opts.metrics = {wmkit::Metric::Ade};
  } else if (a.metric == "frechet") {
    opts.metrics = {wmkit::Metric::Frechet};
  } else {
    opts.metrics = {wmkit::Metric::Frechet, wmkit::Metric::Ade};
  }

  const auto report =
    wmkit::trajectory_report(to_set("real", real_files), to_set("generated", gen_files), opts);

  ordered_json doc;
  doc["report_version"] = wmkit::kReportVersion;
  doc["tool"] = "wmkit";
  doc["command"] = "traj-metrics";
  doc["run_config"] = {
    {"real", a.real},     {"gen", a.gen},
    {"metric", a.metric}, {"k", a.k},
    {"canonicalize", opts.canonicalize}, {"paired_ade", a.paired_ade},
    {"deterministic", a.deterministic}};
  doc["inputs"] = {{"real", input_record(a.real, real_files)}, {"gen", input_record(a.gen, gen_files)}};
  doc["report"] = wmkit::to_json(report);
  if (!a.deterministic) {
    doc["provenance"] = {{"timestamp", utc_timestamp()}};
  }
  emit(a.out, doc.dump(2) + "\n");
  return kExitOk;
}

struct TurnFilterArgs
{
  std::string in;
  double threshold = wmkit::kDefaultTurnThreshold;
  std::string out = "-";
};

int run_turn_filter(const TurnFilterArgs & a)
{
  const auto entries = load_or_warn(a.in);
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (wmkit::is_turn_event(entries[i].sequence, a.threshold)) {
      os << i << ' ' << entries[i].path.filename().string() << ' '
         << wmkit::yaw_rate(entries[i].sequence, 0) << '\n';
    }
  }
  emit(a.out, os.str());
  return kExitOk;
}

struct WindowsArgs
{
  std::string mode = "chunked";
  double window = wmkit::kDefaultWindowSeconds;
  double rate = wmkit::kDefaultEvalRate;
  double horizon = 20.0;
  bool json = false;
};

int run_windows(const WindowsArgs & a)
{
  wmkit::WindowSpec spec;
  spec.mode = a.mode == "cumulative" ? wmkit::WindowMode::Cumulative : wmkit::WindowMode::Chunked;
  spec.window_seconds = a.window;
  spec.rate = a.rate;
  spec.horizon_seconds = a.horizon;
  const auto ws = wmkit::windows(spec);

  if (a.json) {
    ordered_json rows = ordered_json::array();
    for (const auto & w : ws) {
      rows.push_back({{"start_frame", w.start}, {"end_frame", w.end}, {"frames", w.frames()}});
    }
    std::cout << ordered_json{{"mode", a.mode}, {"windows", rows}}.dump(2) << '\n';
    return kExitOk;
  }
  std::cout << "window\tstart_frame\tend_frame\tframes\tstart_seconds\n";
  for (std::size_t i = 0; i < ws.size(); ++i) {
    std::cout << i << '\t' << ws[i].start << '\t' << ws[i].end << '\t' << ws[i].frames() << '\t'
              << static_cast<double>(ws[i].start) / spec.rate << '\n';
  }
  return kExitOk;
}

struct SynthArgs
{
  std::string preset;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::string out;
  double duration = 10.0;
  double rate = wmkit::kDefaultEvalRate;
  std::string flavor = "matrix";
  std::optional<double> speed, yaw_rate, stop_time, slide_rate, jitter_std;
  wmkit::PresetSpread spread;
};

int run_synth(const SynthArgs & a)
{
  auto preset = wmkit::preset_by_name(a.preset);
  if (!preset) {
    wmkit::fail(wmkit::ErrorCode::InvalidPreset, "unknown preset '" + a.preset + "'");
  }
  if (a.speed) preset->speed = *a.speed;
  if (a.yaw_rate) preset->yaw_rate = *a.yaw_rate;
  if (a.stop_time) preset->stop_time = *a.stop_time;
  if (a.slide_rate) preset->slide_rate = *a.slide_rate;
  if (a.jitter_std) preset->jitter_std = *a.jitter_std;

  wmkit::Rng rng(a.seed);
  const auto seqs = wmkit::gen_set(*preset, a.n, a.duration, a.rate, rng, a.spread);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) {
    wmkit::fail(wmkit::ErrorCode::IoError, "cannot create " + a.out + ": " + ec.message());
  }
  const auto flavor = *wmkit::parse_flavor(a.flavor);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    std::ostringstream name;
    name << a.preset << '_' << std::setw(4) << std::setfill('0') << i << wmkit::kTrajectoryExtension;
    wmkit::save_trajectory(fs::path(a.out) / name.str(), seqs[i], flavor);
  }
  std::cout << seqs.size() << " trajectories written to " << a.out << '\n';
  return kExitOk;
}

struct RolloutArgs
{
  std::string paradigm = "fm";
  std::string predictor = "oracle";
  std::size_t frames = 10;
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string context_out;
  std::optional<std::size_t> steps;
  std::size_t context = wmkit::kDefaultContextFrames;
  std::size_t height = 4;
  std::size_t width = 4;
  std::size_t channels = 8;
  std::uint32_t vocab = 16;
  double temperature = 1.0;
};

/// Diagnostics go to stdout unless stdout already carries the dump.
void emit_diagnostics(const RolloutArgs & a, const ordered_json & diag)
{
  (a.out == "-" ? std::cerr : std::cout) << diag.dump() << '\n';
}

template <typename Frame>
void write_dump(const std::string & path, const std::vector<Frame> & frames, std::size_t first)
{
  std::ostringstream os;
  wmkit::write_frames_jsonl(os, frames, first);
  emit(path, os.str());
}

int run_rollout_fm(const RolloutArgs & a)
{
  wmkit::Rng rng(a.seed);
  wmkit::ContextWindow<wmkit::FrameLatent> ctx(a.context);
  std::vector<wmkit::FrameLatent> initial;
  for (std::size_t i = 0; i < a.context; ++i) {
    wmkit::FrameLatent f(a.height, a.width, a.channels, static_cast<double>(i));
    if (a.predictor != "stamp") {
      wmkit::fill_standard_normal(rng, f.values);
    }
    initial.push_back(f);
    ctx.push(std::move(f));
  }

  wmkit::VelocityPredictor pred;
  if (a.predictor == "oracle") {
    wmkit::FrameLatent target(a.height, a.width, a.channels);
    wmkit::fill_standard_normal(rng, target.values);
    pred = wmkit::oracle_velocity(std::move(target));
  } else if (a.predictor == "constant") {
    pred = wmkit::zero_velocity();
  } else if (a.predictor == "copy") {
    pred = wmkit::copy_velocity();
  } else {
    pred = wmkit::stamp_velocity();
  }

  const std::size_t steps = a.steps.value_or(wmkit::kDefaultFmSteps);
  const auto result = wmkit::rollout(
    [&](const wmkit::ContextWindow<wmkit::FrameLatent> & c) {
      return wmkit::fm_sample_frame(pred, c, steps, rng);
    },
    std::move(ctx), a.frames);

  if (!a.context_out.empty()) {
    write_dump(a.context_out, initial, 0);
  }
  write_dump(a.out, result.frames, a.context);

  ordered_json per_frame = ordered_json::array();
  const wmkit::FrameLatent * prev = &initial.back();
  for (const auto & f : result.frames) {
    double sq = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      const double d = f.values[i] - prev->values[i];
      sq += d * d;
    }
    per_frame.push_back(std::sqrt(sq / static_cast<double>(f.values.size())));
    prev = &f;
  }
  emit_diagnostics(a, ordered_json{
                 {"paradigm", "fm"},
                 {"predictor", a.predictor},
                 {"frames", a.frames},
                 {"steps", steps},
                 {"seed", a.seed},
                 {"rms_change_per_frame", per_frame}});
  return kExitOk;
}

ordered_json copy_rate_summary(const wmkit::TokenGrid & last_context, const std::vector<wmkit::TokenGrid> & generated)
{
  ordered_json per_frame = ordered_json::array();
  double sum = 0.0;
  const wmkit::TokenGrid * prev = &last_context;
  for (const auto & g : generated) {
    const double r = wmkit::token_copy_rate(*prev, g);
    per_frame.push_back(r);
    sum += r;
    prev = &g;
  }
  const double mean = generated.empty() ? 0.0 : sum / static_cast<double>(generated.size());
  return {{"copy_rate", mean}, {"frames", generated.size()}, {"per_frame", per_frame}};
}

int run_rollout_mgm(const RolloutArgs & a)
{
  wmkit::Rng rng(a.seed);
  wmkit::ContextWindow<wmkit::TokenGrid> ctx(a.context);
  std::vector<wmkit::TokenGrid> initial;
  std::uniform_int_distribution<std::uint32_t> token(0, a.vocab - 1);
  for (std::size_t i = 0; i < a.context; ++i) {
    wmkit::TokenGrid g(a.height, a.width, a.vocab, static_cast<std::uint32_t>(i % a.vocab));
    if (a.predictor != "stamp") {
      for (auto & idx : g.indices) {
        idx = token(rng);
      }
    }
    initial.push_back(g);
    ctx.push(std::move(g));
  }

  wmkit::TokenPredictor pred;
  if (a.predictor == "oracle") {
    wmkit::TokenGrid target(a.height, a.width, a.vocab);
    for (auto & idx : target.indices) {
      idx = token(rng);
    }
    pred = wmkit::fixed_token_predictor(std::move(target));
  } else if (a.predictor == "constant") {
    pred = wmkit::constant_token_predictor(7 % a.vocab);
  } else if (a.predictor == "copy") {
    pred = wmkit::copy_token_predictor();
  } else {
    pred = wmkit::stamp_token_predictor();
  }

  const std::size_t steps = a.steps.value_or(8);
  const auto result = wmkit::rollout(
    [&](const wmkit::ContextWindow<wmkit::TokenGrid> & c) {
      return wmkit::mgm_sample_frame(pred, c, steps, rng, a.temperature);
    },
    std::move(ctx), a.frames);

  if (!a.context_out.empty()) {
    write_dump(a.context_out, initial, 0);
  }
  write_dump(a.out, result.frames, a.context);

  ordered_json diag{
    {"paradigm", "mgm"}, {"predictor", a.predictor}, {"steps", steps},
    {"temperature", a.temperature}, {"seed", a.seed}};
  diag.update(copy_rate_summary(initial.back(), result.frames));
  emit_diagnostics(a, diag);
  return kExitOk;
}

int run_diagnose_copy_rate(const std::string & context_path, const std::string & generated_path)
{
  const auto context = wmkit::read_token_frames(context_path);
  const auto generated = wmkit::read_token_frames(generated_path);
  if (context.empty() || generated.empty()) {
    wmkit::fail(wmkit::ErrorCode::ParseError, "both files need at least one token frame");
  }
  std::cout << copy_rate_summary(context.back(), generated).dump() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"wmkit: world-model rollout, quantization and trajectory evaluation toolkit", "wmkit"};
  app.footer(kDefaultsFooter);
  app.require_subcommand(1);

  TrajMetricsArgs tm;
  auto * traj = app.add_subcommand("traj-metrics", "k-NN precision/recall (ADE, Frechet) between trajectory sets");
  traj->add_option("--real", tm.real, "Directory or file of real trajectories")->required();
  traj->add_option("--gen", tm.gen, "Directory or file of generated trajectories")->required();
  traj->add_option("--metric", tm.metric, "ade | frechet | both")
    ->check(CLI::IsMember({"ade", "frechet", "both"}))
    ->capture_default_str();
  traj->add_option("--k", tm.k, "k-th nearest neighbour for thresholds")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  traj->add_flag("--no-canonicalize", tm.no_canonicalize, "Skip rigid canonicalization of each path");
  traj->add_flag("--paired-ade", tm.paired_ade, "Also report mean ADE between index-paired trajectories");
  traj->add_flag("--deterministic", tm.deterministic, "Omit the timestamp so reruns are byte-identical");
  traj->add_option("--out", tm.out, "Report path ('-' for stdout)")->capture_default_str();

  TurnFilterArgs tf;
  auto * turn = app.add_subcommand("turn-filter", "List trajectories whose initial yaw rate reaches the threshold");
  turn->add_option("--in", tf.in, "Directory or file of trajectories")->required();
  turn->add_option("--threshold", tf.threshold, "Yaw-rate threshold in rad/s (published value 0.12)")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  turn->add_option("--out", tf.out, "Output list ('-' for stdout)")->capture_default_str();

  WindowsArgs wa;
  auto * win = app.add_subcommand("windows", "Print the chunked or cumulative evaluation windows");
  win->add_option("--mode", wa.mode, "chunked | cumulative")
    ->check(CLI::IsMember({"chunked", "cumulative"}))
    ->capture_default_str();
  win->add_option("--window", wa.window, "Window length in seconds (published value 4)")->capture_default_str();
  win->add_option("--rate", wa.rate, "Frame rate in Hz (published value 5)")->capture_default_str();
  win->add_option("--horizon", wa.horizon, "Horizon in seconds")->capture_default_str();
  win->add_flag("--json", wa.json, "Emit JSON instead of a table");

  SynthArgs sa;
  auto * syn = app.add_subcommand("synth", "Generate synthetic trajectories from a behaviour preset");
  syn->add_option("--preset", sa.preset, "straight | turn | stop | slide | jitter")->required();
  syn->add_option("--n", sa.n, "Number of trajectories")->check(CLI::PositiveNumber)->capture_default_str();
  syn->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  syn->add_option("--out", sa.out, "Output directory")->required();
  syn->add_option("--duration", sa.duration, "Seconds per trajectory")->capture_default_str();
  syn->add_option("--rate", sa.rate, "Sample rate in Hz")->capture_default_str();
  syn->add_option("--flavor", sa.flavor, "matrix | quat")
    ->check(CLI::IsMember({"matrix", "quat"}))
    ->capture_default_str();
  syn->add_option("--speed", sa.speed, "Override preset speed (m/s)");
  syn->add_option("--yaw-rate", sa.yaw_rate, "Override preset yaw rate (rad/s)");
  syn->add_option("--stop-time", sa.stop_time, "Override preset stop time (s)");
  syn->add_option("--slide-rate", sa.slide_rate, "Override preset lateral slide rate (m/s)");
  syn->add_option("--jitter-std", sa.jitter_std, "Override preset jitter std (m)");
  syn->add_option("--speed-spread", sa.spread.speed, "Uniform +- spread on speed")->capture_default_str();
  syn->add_option("--yaw-rate-spread", sa.spread.yaw_rate, "Uniform +- spread on yaw rate")->capture_default_str();
  syn->add_option("--stop-time-spread", sa.spread.stop_time, "Uniform +- spread on stop time")->capture_default_str();
  syn->add_option("--slide-rate-spread", sa.spread.slide_rate, "Uniform +- spread on slide rate")->capture_default_str();
  syn->add_option("--jitter-spread", sa.spread.jitter_std, "Uniform +- spread on jitter std")->capture_default_str();

  RolloutArgs ra;
  auto * roll = app.add_subcommand("rollout-sim", "Sliding-window rollout with an analytic predictor");
  roll->add_option("--paradigm", ra.paradigm, "fm | mgm")->check(CLI::IsMember({"fm", "mgm"}))->capture_default_str();
  roll->add_option("--predictor", ra.predictor, "oracle | constant | copy | stamp")
    ->check(CLI::IsMember({"oracle", "constant", "copy", "stamp"}))
    ->capture_default_str();
  roll->add_option("--frames", ra.frames, "Frames to generate")->check(CLI::PositiveNumber)->capture_default_str();
  roll->add_option("--seed", ra.seed, "Random seed")->capture_default_str();
  roll->add_option("--out", ra.out, "Rollout dump (JSONL, '-' for stdout)")->capture_default_str();
  roll->add_option("--context-out", ra.context_out, "Also dump the initial context frames here");
  roll->add_option("--steps", ra.steps, "Sampler steps (fm: 30, published; mgm: 8)");
  roll->add_option("--context", ra.context, "Context frames (published value 5)")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  roll->add_option("--height", ra.height, "Latent grid height")->check(CLI::PositiveNumber)->capture_default_str();
  roll->add_option("--width", ra.width, "Latent grid width")->check(CLI::PositiveNumber)->capture_default_str();
  roll->add_option("--channels", ra.channels, "Latent channels (fm)")->check(CLI::PositiveNumber)->capture_default_str();
  roll->add_option("--vocab", ra.vocab, "Codebook size K (mgm)")->check(CLI::Range(2u, 1u << 20))->capture_default_str();
  roll->add_option("--temperature", ra.temperature, "Sampling temperature (mgm)")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();

  std::string copy_context, copy_generated;
  auto * copy = app.add_subcommand("diagnose-copy-rate", "Fraction of generated tokens equal to the last context frame");
  copy->add_option("--context", copy_context, "Token-frame JSONL whose last frame is the context")->required();
  copy->add_option("--generated", copy_generated, "Token-frame JSONL of generated frames")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    report_error("Usage", kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    if (*traj) return run_traj_metrics(tm);
    if (*turn) return run_turn_filter(tf);
    if (*win) return run_windows(wa);
    if (*syn) return run_synth(sa);
    if (*roll) return ra.paradigm == "fm" ? run_rollout_fm(ra) : run_rollout_mgm(ra);
    if (*copy) return run_diagnose_copy_rate(copy_context, copy_generated);
  } catch (const wmkit::Error & e) {
    const int code = exit_code_for(e.code());
    report_error(wmkit::to_string(e.code()), code, e.what());
    return code;
  } catch (const std::exception & e) {
    report_error("IoError", kExitIo, e.what());
    return kExitIo;
  }
  return kExitUsage;
}
