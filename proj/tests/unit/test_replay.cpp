#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "h2r/error.hpp"
#include "h2r/replay.hpp"
#include "test_support.hpp"

namespace h2r {
namespace {

using test::synth_episode;

Episode line_episode(std::size_t n, double step_m, double fps = 10.0) {
  Episode e;
  e.id = "line";
  e.domain = Domain::kRobot;
  e.task_id = "t";
  e.fps = fps;
  for (std::size_t i = 0; i < n; ++i) {
    FrameRecord f;
    f.timestamp = static_cast<double>(i) / fps;
    f.wrist_pose = Pose(Vec3(step_m * static_cast<double>(i), 0.0, 0.5), Quat::Identity(), Frame::kCamera);
    f.hand_joints = test::bundled_model().mid_range();
    e.frames.push_back(f);
  }
  return e;
}

ReplayLimits wide() {
  ReplayLimits l;
  l.box_min = Vec3(-100, -100, -100);
  l.box_max = Vec3(100, 100, 100);
  l.vmax = 1e3;
  l.wmax = 1e3;
  l.jmax = 1e3;
  return l;
}

TEST(SpeedProfile, StaticEpisodeIsZeroAndPasses) {
  const Episode e = line_episode(12, 0.0);
  const auto p = speed_profile(e);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(p.linear[i], 0.0);
    EXPECT_EQ(p.angular[i], 0.0);
    EXPECT_EQ(p.joint[i], 0.0);
  }
  EXPECT_TRUE(check_episode(e, ReplayLimits{}, &test::bundled_model()).pass());
}

TEST(SpeedProfile, ConstantStep) {
  // 0.5 m per frame at 10 fps is 5 m/s everywhere.
  const auto p = speed_profile(line_episode(10, 0.5));
  for (const double v : p.linear) EXPECT_NEAR(v, 5.0, 1e-12);
}

TEST(SpeedProfile, SingleJumpSpreadsOverTwoFrames) {
  // A 0.5 m jump between frames 4 and 5 gives (0.5 / 2) / 0.1 = 2.5 m/s at frames 4 and 5.
  Episode e = line_episode(10, 0.0);
  for (std::size_t i = 5; i < 10; ++i) e.frames[i].wrist_pose = Pose(Vec3(0.5, 0, 0.5), Quat::Identity());
  const auto p = speed_profile(e);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(p.linear[i], (i == 4 || i == 5) ? 2.5 : 0.0, 1e-12) << "frame " << i;
  }
  ReplayLimits l = wide();
  l.vmax = 1.0;
  const auto rep = check_episode(e, l);
  ASSERT_EQ(rep.violations.size(), 2u);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::kLinearSpeed);
  EXPECT_EQ(rep.violations[0].frame, 4u);
  EXPECT_EQ(rep.violations[1].frame, 5u);
  EXPECT_NEAR(rep.max_linear_speed, 2.5, 1e-12);
}

TEST(SpeedProfile, AngularAndJointOracle) {
  Episode e = line_episode(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    const double th = 0.1 * static_cast<double>(i);
    e.frames[i].wrist_pose = Pose(Vec3(0, 0, 0.5), Quat(Eigen::AngleAxisd(th, Vec3::UnitZ())));
    e.frames[i].hand_joints[2] += 0.05 * static_cast<double>(i);
  }
  const auto p = speed_profile(e);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(p.angular[i], 1.0, 1e-9);  // 0.1 rad per 0.1 s
    EXPECT_NEAR(p.joint[i], 0.5, 1e-12);
  }
}

TEST(SpeedProfile, SlowdownScalesSpeedsDown) {
  const Episode e = synth_episode("h", Domain::kHuman, 1, 41);
  const Episode s = slow_down(e, 2.25);
  const auto a = speed_profile(e);
  const auto b = speed_profile(s);
  double ma = 0.0, mb = 0.0;
  for (const double v : a.linear) ma = std::max(ma, v);
  for (const double v : b.linear) mb = std::max(mb, v);
  EXPECT_NEAR(mb / ma, 1.0 / 2.25, 0.03);
}

TEST(CheckEpisode, WorkspaceAndJointLimits) {
  Episode e = line_episode(5, 0.0);
  e.frames[2].wrist_pose = Pose(Vec3(0, 0, 3.0), Quat::Identity());
  e.frames[3].hand_joints[0] = test::bundled_model().upper_limits()[0] + 0.2;
  ReplayLimits l = ReplayLimits{};
  l.vmax = l.wmax = l.jmax = 1e3;
  const auto without = check_episode(e, l);
  ASSERT_EQ(without.violations.size(), 1u);
  EXPECT_EQ(without.violations[0].kind, ViolationKind::kWorkspace);
  EXPECT_EQ(without.violations[0].frame, 2u);
  EXPECT_NEAR(without.violations[0].value, 1.0, 1e-12);
  const auto with = check_episode(e, l, &test::bundled_model());
  ASSERT_EQ(with.violations.size(), 2u);
  EXPECT_EQ(with.violations[1].kind, ViolationKind::kJointLimit);
  EXPECT_EQ(with.violations[1].frame, 3u);
  EXPECT_NEAR(with.violations[1].value, 0.2, 1e-12);
}

TEST(CheckEpisode, InputErrors) {
  Episode e = line_episode(5, 0.0);
  e.fps = 0.0;
  EXPECT_THROW(check_episode(e, ReplayLimits{}), InvalidArgument);
  EXPECT_THROW(check_episode(line_episode(1, 0.0), ReplayLimits{}), InvalidArgument);
  ReplayLimits bad;
  bad.vmax = -1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(CheckEpisodes, ThreadIndependent) {
  std::vector<Episode> eps;
  for (int i = 0; i < 6; ++i) eps.push_back(synth_episode("e" + std::to_string(i), Domain::kHuman, 10 + i));
  const auto a = check_episodes(eps, ReplayLimits{}, &test::bundled_model(), 1);
  const auto b = check_episodes(eps, ReplayLimits{}, &test::bundled_model(), 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].episode_id, b[i].episode_id);
    EXPECT_EQ(a[i].max_linear_speed, b[i].max_linear_speed);
    EXPECT_EQ(a[i].violations.size(), b[i].violations.size());
  }
}

TEST(ReplayLimits, JsonRoundTripAndBundledFile) {
  ReplayLimits l;
  l.box_min = Vec3(-0.3, -0.2, 0.1);
  l.vmax = 0.75;
  const ReplayLimits back = ReplayLimits::from_json(l.to_json());
  EXPECT_EQ(back.to_json(), l.to_json());
  const ReplayLimits bundled = ReplayLimits::load(test::data_dir() / "replay_limits.json");
  EXPECT_NO_THROW(bundled.validate());
}

TEST(ChunkReconstruction, ExactInBothModes) {
  const Episode e = synth_episode("h", Domain::kHuman, 3, 30);
  for (const PoseMode mode : {PoseMode::kRelative, PoseMode::kAbsolute}) {
    ChunkSpec spec;
    spec.pose_mode = mode;
    const auto samples = make_samples(e, spec);
    const auto rep = chunk_reconstruction_check(samples, e, mode);
    EXPECT_TRUE(rep.pass()) << rep.max_error();
    EXPECT_EQ(rep.mode, mode);
    std::size_t pads = 0;
    for (const auto& s : samples)
      for (const auto m : s.pad_mask) pads += m;
    EXPECT_EQ(rep.padded_rows, pads);
    EXPECT_EQ(rep.rows_checked + rep.padded_rows, samples.size() * 16);
    EXPECT_LT(rep.max_padded_error, 1e-9);
  }
}

TEST(ChunkReconstruction, LocalizesCorruptedRow) {
  const Episode e = synth_episode("h", Domain::kHuman, 4, 30);
  auto samples = make_samples(e, ChunkSpec{});
  samples[7].action(3, 1) += 0.01;
  const auto rep = chunk_reconstruction_check(samples, e, PoseMode::kRelative);
  EXPECT_FALSE(rep.pass());
  ASSERT_EQ(rep.over_tolerance.size(), 1u);
  EXPECT_EQ(rep.over_tolerance[0].sample, 7u);
  EXPECT_EQ(rep.over_tolerance[0].row, 3u);
  EXPECT_NEAR(rep.worst.position, 0.01, 1e-9);
}

TEST(ChunkReconstruction, ModeAndEpisodeMismatch) {
  const Episode e = synth_episode("h", Domain::kHuman, 5, 20);
  const auto samples = make_samples(e, ChunkSpec{});
  EXPECT_THROW(chunk_reconstruction_check(samples, e, PoseMode::kAbsolute), InvalidArgument);
  Episode other = e;
  other.id = "other";
  EXPECT_THROW(chunk_reconstruction_check(samples, other, PoseMode::kRelative), ValidationError);
}

}  // namespace
}  // namespace h2r
