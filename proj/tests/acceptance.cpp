// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runs under ctest as the `acceptance` test.

#include "cli_runner.hpp"
#include "oracles.hpp"
#include "wmkit/wmkit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace
{

using Clock = std::chrono::steady_clock;

struct Outcome
{
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v)
{
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// 1 ---------------------------------------------------------------------------
Outcome frechet_oracle()
{
  const auto t0 = Clock::now();
  wmkit::Rng rng(1);
  std::uniform_int_distribution<std::size_t> len(1, 6);
  double worst = 0.0;
  const int pairs = 500;
  for (int i = 0; i < pairs; ++i) {
    const auto a = oracle::random_path(rng, len(rng));
    const auto b = oracle::random_path(rng, len(rng));
    worst = std::max(worst, std::abs(wmkit::discrete_frechet(a, b) - oracle::frechet_brute_force(a.points, b.points)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0,
          std::to_string(pairs) + " pairs, max |diff| " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2 ---------------------------------------------------------------------------
Outcome precision_recall_oracle()
{
  wmkit::Rng rng(2);
  std::uniform_int_distribution<std::size_t> size(4, 12);
  std::uniform_int_distribution<std::size_t> len(3, 6);
  int mismatches = 0;
  const int sets = 120;
  for (int t = 0; t < sets; ++t) {
    const wmkit::Metric m = t % 2 == 0 ? wmkit::Metric::Frechet : wmkit::Metric::Ade;
    const std::size_t k = 1 + static_cast<std::size_t>(t % 3);
    const std::size_t n = len(rng);
    wmkit::TrajectorySet real{"real", {}}, gen{"gen", {}};
    for (std::size_t i = size(rng); i > 0; --i) {
      real.paths.push_back(oracle::random_path(rng, m == wmkit::Metric::Ade ? n : len(rng), 3.0));
    }
    for (std::size_t i = size(rng); i > 0; --i) {
      gen.paths.push_back(oracle::random_path(rng, m == wmkit::Metric::Ade ? n : len(rng), 3.0));
    }
    const auto got = wmkit::precision_recall(real, gen, k, m);
    const auto want = oracle::precision_recall_direct(real, gen, k, m);
    mismatches += (got.precision != want.precision || got.recall != want.recall) ? 1 : 0;
  }
  return {mismatches == 0, std::to_string(sets) + " set pairs, " + std::to_string(mismatches) + " mismatches"};
}

// 3 ---------------------------------------------------------------------------
Outcome identical_and_disjoint()
{
  wmkit::Rng rng(3);
  wmkit::TrajectorySet near{"real", {}}, far{"gen", {}};
  for (int i = 0; i < 10; ++i) {
    auto p = oracle::random_path(rng, 8, 1.0);
    near.paths.push_back(p);
    for (auto & pt : p.points) {
      pt += wmkit::Point2(1000.0, 1000.0);
    }
    far.paths.push_back(p);
  }
  bool ok = true;
  std::string detail;
  for (wmkit::Metric m : {wmkit::Metric::Ade, wmkit::Metric::Frechet}) {
    const auto same = wmkit::precision_recall(near, near, 1, m);
    const auto apart = wmkit::precision_recall(near, far, 1, m);
    ok = ok && same.precision == 1.0 && same.recall == 1.0 && apart.precision == 0.0 && apart.recall == 0.0;
    detail += std::string(wmkit::to_string(m)) + ": same " + fmt(same.precision) + "/" + fmt(same.recall) +
              ", disjoint " + fmt(apart.precision) + "/" + fmt(apart.recall) + "; ";
  }
  return {ok, detail};
}

// 4 ---------------------------------------------------------------------------
Outcome flow_sampler_exactness()
{
  wmkit::Rng rng(4);
  double worst = 0.0;
  int trials = 0;
  for (std::size_t steps : {1u, 5u, 30u}) {
    for (int t = 0; t < 100; ++t, ++trials) {
      wmkit::ContextWindow<wmkit::FrameLatent> ctx;
      for (int f = 0; f < 5; ++f) {
        wmkit::FrameLatent frame(4, 4, 8);
        wmkit::fill_standard_normal(rng, frame.values);
        ctx.push(std::move(frame));
      }
      wmkit::FrameLatent target(4, 4, 8);
      wmkit::fill_standard_normal(rng, target.values);
      for (double & v : target.values) {
        v *= 3.0;
      }
      const auto out = wmkit::fm_sample_frame(wmkit::oracle_velocity(target), ctx, steps, rng);
      for (std::size_t i = 0; i < out.values.size(); ++i) {
        worst = std::max(worst, std::abs(out.values[i] - target.values[i]));
      }
    }
  }
  return {worst <= 1e-9, std::to_string(trials) + " trials over steps {1,5,30}, max |err| " + fmt(worst)};
}

// 5 ---------------------------------------------------------------------------
Outcome mgm_contract()
{
  wmkit::Rng rng(5);
  std::normal_distribution<double> noise(0.0, 1.5);
  bool reveal_ok = true;
  int runs = 0;
  for (std::size_t steps : {1u, 3u, 8u, 12u}) {
    for (int t = 0; t < 25; ++t, ++runs) {
      const std::size_t h = 1 + static_cast<std::size_t>(t % 4), w = 2 + static_cast<std::size_t>(t % 3);
      auto state = wmkit::MaskState::fully_masked(h, w, 10, steps);
      std::vector<int> reveal_count(h * w, 0);
      std::size_t used = 0;
      while (!state.done()) {
        const auto before = state.revealed;
        wmkit::Logits logits(h, w, 10);
        for (double & v : logits.values) {
          v = noise(rng);
        }
        state = wmkit::mgm_unmask_step(logits, state, rng);
        ++used;
        for (std::size_t p = 0; p < h * w; ++p) {
          if (before[p] == 0 && state.revealed[p] == 1) {
            ++reveal_count[p];
          }
          if (before[p] == 1 && state.revealed[p] == 0) {
            reveal_ok = false;
          }
        }
      }
      reveal_ok = reveal_ok && used == steps && state.revealed_count() == h * w;
      for (int c : reveal_count) {
        reveal_ok = reveal_ok && c == 1;
      }
      for (auto idx : state.tokens.indices) {
        reveal_ok = reveal_ok && idx < 10;
      }
    }
  }

  wmkit::ContextWindow<wmkit::TokenGrid> ctx;
  std::uniform_int_distribution<std::uint32_t> tok(0, 15);
  for (int f = 0; f < 5; ++f) {
    wmkit::TokenGrid g(4, 4, 16);
    for (auto & v : g.indices) {
      v = tok(rng);
    }
    ctx.push(std::move(g));
  }
  wmkit::TokenPredictor soft = [](const wmkit::TokenGrid & masked, const wmkit::ContextWindow<wmkit::TokenGrid> &) {
    wmkit::Logits l(masked.height, masked.width, masked.vocab);
    for (std::size_t i = 0; i < l.values.size(); ++i) {
      l.values[i] = std::cos(0.7 * static_cast<double>(i));
    }
    return l;
  };
  wmkit::Rng a(77), b(77);
  const bool deterministic = wmkit::mgm_sample_frame(soft, ctx, 8, a) == wmkit::mgm_sample_frame(soft, ctx, 8, b);

  const auto rolled = wmkit::rollout(
    [&](const wmkit::ContextWindow<wmkit::TokenGrid> & c) {
      return wmkit::mgm_sample_frame(wmkit::copy_token_predictor(), c, 8, rng);
    },
    ctx, 6);
  double copy_rate = wmkit::token_copy_rate(ctx.newest(), rolled.frames.front());
  for (std::size_t i = 1; i < rolled.frames.size(); ++i) {
    copy_rate = std::min(copy_rate, wmkit::token_copy_rate(rolled.frames[i - 1], rolled.frames[i]));
  }

  return {reveal_ok && deterministic && copy_rate == 1.0,
          std::to_string(runs) + " runs revealed every position once in M steps: " + (reveal_ok ? "yes" : "no") +
            "; seeded repeat identical: " + (deterministic ? "yes" : "no") + "; copy rate " + fmt(copy_rate)};
}

// 6 ---------------------------------------------------------------------------
Outcome gradient_checks()
{
  wmkit::Rng rng(6);
  std::uniform_int_distribution<std::size_t> side(1, 4);
  std::uniform_int_distribution<std::size_t> vocab(2, 16);
  double worst_fm = 0.0, worst_ce = 0.0, worst_kd = 0.0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    const std::size_t h = t == 0 ? 4 : side(rng), w = t == 0 ? 4 : side(rng), k = t == 0 ? 16 : vocab(rng);

    wmkit::FrameLatent v(h, w, k), x(h, w, k), eps(h, w, k);
    wmkit::fill_standard_normal(rng, v.values);
    wmkit::fill_standard_normal(rng, x.values);
    wmkit::fill_standard_normal(rng, eps.values);
    worst_fm = std::max(
      worst_fm, oracle::relative_error(
                  wmkit::fm_loss(v, x, eps, true).gradient,
                  oracle::numeric_gradient(
                    [&](const std::vector<double> & p) { return wmkit::fm_loss(wmkit::FrameLatent(h, w, k, p), x, eps).value; },
                    v.values)));

    wmkit::Logits logits(h, w, k);
    wmkit::fill_standard_normal(rng, logits.values);
    wmkit::TokenGrid targets(h, w, static_cast<std::uint32_t>(k));
    std::uniform_int_distribution<std::uint32_t> tok(0, static_cast<std::uint32_t>(k - 1));
    for (auto & idx : targets.indices) {
      idx = tok(rng);
    }
    wmkit::Mask mask{h, w, std::vector<std::uint8_t>(h * w, 1)};
    for (std::size_t p = 0; p < h * w; ++p) {
      mask.bits[p] = (p + static_cast<std::size_t>(t)) % 2 == 0 ? 0 : 1;
    }
    mask.bits[0] = 0;
    worst_ce = std::max(
      worst_ce, oracle::relative_error(
                  wmkit::masked_ce_loss(logits, targets, mask, true).gradient,
                  oracle::numeric_gradient(
                    [&](const std::vector<double> & p) {
                      wmkit::Logits l = logits;
                      l.values = p;
                      return wmkit::masked_ce_loss(l, targets, mask).value;
                    },
                    logits.values)));

    wmkit::Logits u(h, w, k), s(h, w, k);
    wmkit::fill_standard_normal(rng, u.values);
    wmkit::fill_standard_normal(rng, s.values);
    for (double & val : u.values) {
      val *= 2.0;
    }
    for (double & val : s.values) {
      val *= 0.3;
    }
    worst_kd = std::max(
      worst_kd, oracle::relative_error(
                  wmkit::kd_soft_target_loss(u, s, 2.0, 0.2, true).gradient,
                  oracle::numeric_gradient(
                    [&](const std::vector<double> & p) {
                      wmkit::Logits uu = u;
                      uu.values = p;
                      return wmkit::kd_soft_target_loss(uu, s, 2.0, 0.2).value;
                    },
                    u.values)));
  }
  const double worst = std::max({worst_fm, worst_ce, worst_kd});
  return {worst <= 1e-5, std::to_string(trials) + " random inputs up to 4x4x16, max rel err fm " + fmt(worst_fm) +
                           ", ce " + fmt(worst_ce) + ", kd " + fmt(worst_kd)};
}

// 7 ---------------------------------------------------------------------------
Outcome kd_zero_case(const fs::path & scratch)
{
  wmkit::Rng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    wmkit::Logits s(3, 2, 12);
    wmkit::fill_standard_normal(rng, s.values);
    wmkit::Logits u = s;
    const double shift = 20.0 * wmkit::uniform01(rng) - 10.0;
    for (double & v : u.values) {
      v = v * wmkit::kDefaultKdModelTemperature / wmkit::kDefaultKdTargetTemperature + shift;
    }
    worst = std::max(worst, std::abs(wmkit::kd_soft_target_loss(u, s).value));
  }
  const bool defaults = wmkit::kDefaultKdModelTemperature == 2.0 && wmkit::kDefaultKdTargetTemperature == 0.2 &&
                        wmkit::kDefaultKdWeight == 0.5;
  const auto help = cli_runner::run(scratch, "--help");
  const bool in_help = help.exit_code == 0 && help.out.find("T=2") != std::string::npos &&
                       help.out.find("T'=0.2") != std::string::npos &&
                       help.out.find("lambda=0.5") != std::string::npos;
  return {worst <= 1e-12 && defaults && in_help,
          "max |loss| " + fmt(worst) + " over 100 shifted cases; defaults T=2 T'=0.2 lambda=0.5: " +
            (defaults ? "yes" : "no") + "; listed in --help: " + (in_help ? "yes" : "no")};
}

// 8 ---------------------------------------------------------------------------
Outcome window_arithmetic()
{
  const auto chunked = wmkit::chunked_windows({wmkit::WindowMode::Chunked, 4.0, 5.0, 20.0});
  bool ok = chunked.size() == 5;
  for (std::size_t i = 0; ok && i < chunked.size(); ++i) {
    ok = chunked[i].start == 20 * i && chunked[i].end == 20 * (i + 1) && chunked[i].frames() == 20;
  }
  const auto cumulative = wmkit::cumulative_windows({wmkit::WindowMode::Cumulative, 4.0, 5.0, 16.0});
  const std::vector<wmkit::Window> want{{0, 20}, {0, 40}, {0, 60}, {0, 80}};
  ok = ok && cumulative == want;
  return {ok, std::to_string(chunked.size()) + " chunked windows of 20 frames; " + std::to_string(cumulative.size()) +
                " cumulative windows ending at 20/40/60/80"};
}

// 9 ---------------------------------------------------------------------------
Outcome turn_detection()
{
  auto arc = [](double omega) {
    const double speed = 8.0, rate = 5.0, r = speed / omega;
    std::vector<wmkit::Pose> poses;
    for (int i = 0; i < 20; ++i) {
      const double th = omega * i / rate;
      poses.push_back(wmkit::Pose::from_yaw(th, {r * std::sin(th), r * (1.0 - std::cos(th)), 0.0}));
    }
    return wmkit::PoseSequence::uniform(poses, rate);
  };
  const bool at = wmkit::is_turn_event(arc(0.12));
  const bool below = wmkit::is_turn_event(arc(0.119));
  return {at && !below, std::string("0.12 rad/s -> ") + (at ? "turn" : "no turn") + ", 0.119 rad/s -> " +
                          (below ? "turn" : "no turn") + " (threshold " + fmt(wmkit::kDefaultTurnThreshold) + ")"};
}

// 10 --------------------------------------------------------------------------
Outcome synthetic_discrimination()
{
  const auto t0 = Clock::now();
  wmkit::Rng rng(0);
  wmkit::PresetSpread spread;
  spread.speed = 1.0;
  spread.yaw_rate = 0.05;
  const std::size_t n = 50;
  auto make = [&](const char * name) {
    return wmkit::to_trajectory_set(name, wmkit::gen_set(*wmkit::preset_by_name(name), n, 10.0, 5.0, rng, spread));
  };
  const auto real = make("turn");
  const auto clean = make("turn");
  const auto stop = make("stop");
  const auto slide = make("slide");

  wmkit::TrajectoryReportOptions opts;
  opts.k = 3;
  opts.metrics = {wmkit::Metric::Frechet};
  auto precision = [&](const wmkit::TrajectorySet & gen) {
    return wmkit::trajectory_report(real, gen, opts).rows.front().precision;
  };
  const double p_clean = precision(clean), p_stop = precision(stop), p_slide = precision(slide);
  const double secs = seconds_since(t0);
  return {p_stop < p_clean && p_slide < p_clean && secs < 30.0,
          "precision clean " + fmt(p_clean) + ", stop " + fmt(p_stop) + ", slide " + fmt(p_slide) + " (n=50, k=3, " +
            fmt(secs) + " s)"};
}

// 11 --------------------------------------------------------------------------
Outcome quantizer_exhaustive()
{
  wmkit::Rng rng(11);
  int mismatches = 0;
  std::size_t latents = 0;
  bool round_trip = true;
  for (std::size_t k : {2u, 5u, 16u, 33u, 64u}) {
    const std::size_t d = 3 + k % 6;
    std::vector<double> entries(k * d);
    wmkit::fill_standard_normal(rng, entries);
    const auto cb = wmkit::Codebook::normalized(k, d, entries);
    wmkit::LatentGrid grid(10, 25, d);
    wmkit::fill_standard_normal(rng, grid.values);
    const auto q = wmkit::quantize(grid, cb);
    for (std::size_t pos = 0; pos < grid.positions(); ++pos, ++latents) {
      const auto x = grid.at(pos);
      double norm = 0.0;
      for (double v : x) {
        norm += v * v;
      }
      norm = std::sqrt(norm);
      std::size_t best = 0;
      double best_d = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = x[j] / norm - cb.row(c)[j];
          dist += diff * diff;
        }
        if (c == 0 || dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      mismatches += q.tokens.indices[pos] == best ? 0 : 1;
    }
    const auto back = wmkit::dequantize(q.tokens, cb);
    round_trip = round_trip && back.values == q.latents.values && wmkit::quantize(back, cb).tokens == q.tokens;
  }

  // Exact ties: duplicated codes and a latent equidistant from two axes.
  const wmkit::Codebook dup(4, 2, {0, 1, 1, 0, 0, -1, 1, 0});
  const auto tie = wmkit::quantize(wmkit::LatentGrid(1, 2, 2, std::vector<double>{5, 0, 1, 1}), dup);
  const bool ties = tie.tokens.indices[0] == 1 && tie.tokens.indices[1] == 0;

  return {mismatches == 0 && latents >= 1000 && round_trip && ties,
          std::to_string(latents) + " latents over K in {2,5,16,33,64}, " + std::to_string(mismatches) +
            " argmin mismatches; round trip " + (round_trip ? "exact" : "broken") + "; tie-break " +
            (ties ? "lowest index" : "wrong")};
}

// 12 --------------------------------------------------------------------------
Outcome end_to_end_determinism(const fs::path & scratch)
{
  const auto real = scratch / "real";
  const auto gen = scratch / "gen";
  auto q = [](const fs::path & p) { return "'" + p.string() + "'"; };
  auto pipeline = [&](const fs::path & report) {
    fs::remove_all(real);
    fs::remove_all(gen);
    const auto a = cli_runner::run(scratch, "synth --preset turn --n 12 --seed 5 --yaw-rate-spread 0.05 --out " + q(real));
    const auto b = cli_runner::run(scratch, "synth --preset slide --n 12 --seed 6 --yaw-rate-spread 0.05 --out " + q(gen));
    const auto c = cli_runner::run(
      scratch, "traj-metrics --real " + q(real) + " --gen " + q(gen) + " --metric both --paired-ade --deterministic --out " +
                 q(report));
    return a.exit_code == 0 && b.exit_code == 0 && c.exit_code == 0;
  };
  const bool ran = pipeline(scratch / "report_a.json") && pipeline(scratch / "report_b.json");
  const auto ra = cli_runner::slurp(scratch / "report_a.json");
  const auto rb = cli_runner::slurp(scratch / "report_b.json");
  const bool same = ran && !ra.empty() && ra == rb;
  return {same, std::string("two synth -> traj-metrics runs ") + (ran ? "succeeded" : "failed") + ", reports " +
                  (same ? "byte-identical" : "differ") + " (" + std::to_string(ra.size()) + " bytes)"};
}

}  // namespace

int main()
{
  const fs::path scratch = fs::temp_directory_path() / "wmkit_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
    {"Frechet oracle equivalence", frechet_oracle},
    {"Precision/recall oracle equivalence", precision_recall_oracle},
    {"Identical/disjoint set sanity", identical_and_disjoint},
    {"Flow sampler exactness", flow_sampler_exactness},
    {"MGM sampling contract", mgm_contract},
    {"Gradient checks", gradient_checks},
    {"KD zero case and defaults", [&] { return kd_zero_case(scratch); }},
    {"Window arithmetic", window_arithmetic},
    {"Turn detection boundary", turn_detection},
    {"Synthetic discrimination", synthetic_discrimination},
    {"Quantizer exhaustive check", quantizer_exhaustive},
    {"End-to-end determinism", [&] { return end_to_end_determinism(scratch); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception & e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  fs::remove_all(scratch);
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
