#include "support.hpp"
#include "wmkit/io.hpp"
#include "wmkit/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace
{

using testing_support::code_of;
using wmkit::ErrorCode;
using wmkit::PoseFlavor;

class TempDir
{
public:
  TempDir()
  {
    path_ = fs::temp_directory_path() /
            ("wmkit_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path & path() const { return path_; }

private:
  fs::path path_;
};

wmkit::PoseSequence sample(std::uint64_t seed, const char * preset = "jitter")
{
  wmkit::Rng rng(seed);
  return wmkit::gen_trajectory(*wmkit::preset_by_name(preset), 4.0, 5.0, rng);
}

void write_text(const fs::path & p, const std::string & text)
{
  std::ofstream(p) << text;
}

}  // namespace

TEST(TrajectoryFormat, RoundTripBothFlavors)
{
  for (PoseFlavor flavor : {PoseFlavor::Matrix, PoseFlavor::Quat}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto seq = sample(seed);
      std::stringstream ss;
      wmkit::write_trajectory(ss, seq, flavor);
      const auto back = wmkit::read_trajectory(ss, "mem", flavor);
      ASSERT_EQ(back.size(), seq.size());
      EXPECT_EQ(back.sample_rate(), seq.sample_rate());
      for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_LE((back[i].position - seq[i].position).norm(), 1e-9);
        EXPECT_LE((back[i].rotation - seq[i].rotation).norm(), 1e-9);
        EXPECT_NEAR(back.timestamps()[i], seq.timestamps()[i], 1e-12);
      }
    }
  }
}

TEST(TrajectoryFormat, QuaternionNormErrorNamesLine)
{
  std::istringstream in(
    "# wmkit-trajectory v1 flavor=quat rate=5 frames=2\n"
    "0 0 0 0 1 0 0 0\n"
    "0.2 1 0 0 0.9 0 0 0\n");
  try {
    wmkit::read_trajectory(in, "bad.traj");
    FAIL() << "expected ParseError";
  } catch (const wmkit::Error & e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("bad.traj:3"), std::string::npos) << e.what();
  }
}

TEST(TrajectoryFormat, Rejections)
{
  auto parse = [](const std::string & text) {
    std::istringstream in(text);
    return code_of([&] { wmkit::read_trajectory(in, "x"); });
  };
  EXPECT_EQ(parse(""), ErrorCode::ParseError);
  EXPECT_EQ(parse("hello\n"), ErrorCode::ParseError);
  EXPECT_EQ(parse("# wmkit-trajectory v1 flavor=quat rate=5 frames=3\n0 0 0 0 1 0 0 0\n0.2 0 0 0 1 0 0 0\n"), ErrorCode::ParseError);
  EXPECT_EQ(parse("# wmkit-trajectory v1 flavor=quat rate=5 frames=2\n0 0 0 0 1 0 0 0\n0 0 0 0 1 0 0 0\n"), ErrorCode::ParseError);
  EXPECT_EQ(parse("# wmkit-trajectory v1 flavor=quat rate=5 frames=2\n0 0 0 0 1 0 0 0\n0.3 0 0 0 1 0 0 0\n"), ErrorCode::InconsistentRate);
  EXPECT_EQ(parse("# wmkit-trajectory v1 flavor=quat rate=5 frames=2\n0 0 0 0 1 0 0\n"), ErrorCode::ParseError);
  EXPECT_EQ(
    parse("# wmkit-trajectory v1 flavor=matrix rate=5 frames=2\n"
          "0 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n"
          "0.2 1 0 0 1 0 1 0 0 0 0 1 0 0 0 1 1\n"),
    ErrorCode::ParseError);
  EXPECT_EQ(
    parse("# wmkit-trajectory v1 flavor=matrix rate=5 frames=2\n"
          "0 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n"
          "0.2 2 0 0 1 0 1 0 0 0 0 1 0 0 0 0 1\n"),
    ErrorCode::ParseError);
  std::istringstream in("# wmkit-trajectory v1 flavor=quat rate=5 frames=2\n0 0 0 0 1 0 0 0\n0.2 0 0 0 1 0 0 0\n");
  EXPECT_EQ(code_of([&] { wmkit::read_trajectory(in, "x", PoseFlavor::Matrix); }), ErrorCode::ParseError);
}

TEST(LoadTrajectories, LexicographicOrderAndFiltering)
{
  TempDir dir;
  const auto a = sample(1), b = sample(2), c = sample(3);
  wmkit::save_trajectory(dir.path() / "b.traj", b, PoseFlavor::Quat);
  wmkit::save_trajectory(dir.path() / "a.traj", a, PoseFlavor::Matrix);
  wmkit::save_trajectory(dir.path() / "c.traj", c, PoseFlavor::Quat);
  write_text(dir.path() / "notes.txt", "ignored");
  const auto entries = wmkit::load_trajectories(dir.path());
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[0].path.filename(), "a.traj");
  EXPECT_EQ(entries[2].path.filename(), "c.traj");
  EXPECT_LE((entries[1].sequence[3].position - b[3].position).norm(), 1e-9);
  EXPECT_EQ(code_of([&] { wmkit::load_trajectories(dir.path(), PoseFlavor::Matrix); }), ErrorCode::ParseError);
  EXPECT_EQ(wmkit::load_trajectories(dir.path() / "a.traj").size(), 1u);
}

TEST(LoadTrajectories, EmptyAndMissing)
{
  TempDir dir;
  EXPECT_TRUE(wmkit::load_trajectories(dir.path()).empty());
  EXPECT_EQ(code_of([&] { wmkit::load_trajectories(dir.path() / "nope"); }), ErrorCode::IoError);
}

TEST(LoadTrajectories, MixedRatesRejected)
{
  TempDir dir;
  wmkit::save_trajectory(dir.path() / "a.traj", sample(1), PoseFlavor::Quat);
  wmkit::Rng rng(2);
  wmkit::save_trajectory(
    dir.path() / "b.traj", wmkit::gen_trajectory(*wmkit::preset_by_name("turn"), 4.0, 10.0, rng), PoseFlavor::Quat);
  EXPECT_EQ(code_of([&] { wmkit::load_trajectories(dir.path()); }), ErrorCode::InconsistentRate);
}

TEST(FrameRecords, RoundTrip)
{
  TempDir dir;
  std::vector<wmkit::TokenGrid> tokens{
    wmkit::TokenGrid(2, 2, 8, std::vector<std::uint32_t>{1, 2, 3, 4}), wmkit::TokenGrid(2, 2, 8, 7u)};
  {
    std::ofstream out(dir.path() / "t.jsonl");
    wmkit::write_frames_jsonl(out, tokens);
  }
  EXPECT_EQ(wmkit::read_token_frames(dir.path() / "t.jsonl"), tokens);

  wmkit::LatentGrid g(1, 2, 3, std::vector<double>{0.1, -2.5, 3e-17, 4, 5, 6});
  {
    std::ofstream out(dir.path() / "l.jsonl");
    wmkit::write_frames_jsonl(out, std::vector<wmkit::LatentGrid>{g});
  }
  const auto back = wmkit::read_latent_frames(dir.path() / "l.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].values, g.values);

  EXPECT_EQ(code_of([&] { wmkit::read_token_frames(dir.path() / "l.jsonl"); }), ErrorCode::ParseError);
  write_text(dir.path() / "broken.jsonl", "{\"frame\":0,\n");
  EXPECT_EQ(code_of([&] { wmkit::read_token_frames(dir.path() / "broken.jsonl"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] { wmkit::read_token_frames(dir.path() / "missing.jsonl"); }), ErrorCode::IoError);
}

TEST(CodebookFormats, BinaryAndJsonRoundTrip)
{
  wmkit::Rng rng(4);
  std::vector<double> e(12 * 5);
  wmkit::fill_standard_normal(rng, e);
  const auto cb = wmkit::Codebook::normalized(12, 5, e);

  std::stringstream bin;
  wmkit::write_codebook_binary(bin, cb);
  const auto from_bin = wmkit::read_codebook_binary(bin);
  ASSERT_EQ(from_bin.size(), 12u);
  ASSERT_EQ(from_bin.dim(), 5u);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_NEAR(from_bin.entries()[i], cb.entries()[i], 1e-6);
  }

  const auto from_json = wmkit::codebook_from_json(nlohmann::json::parse(wmkit::codebook_to_json(cb).dump()));
  EXPECT_EQ(from_json.entries(), cb.entries());

  std::stringstream junk("NOPE");
  EXPECT_EQ(code_of([&] { wmkit::read_codebook_binary(junk); }), ErrorCode::ParseError);
  std::stringstream again;
  wmkit::write_codebook_binary(again, cb);
  std::stringstream cut(again.str().substr(0, 30));
  EXPECT_EQ(code_of([&] { wmkit::read_codebook_binary(cut); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { wmkit::codebook_from_json(nlohmann::json{{"format", "other"}}); }), ErrorCode::ParseError);
}
