#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "h2r/dataset.hpp"
#include "h2r/error.hpp"
#include "h2r/transform.hpp"
#include "test_support.hpp"

namespace h2r {
namespace {

using test::synth_episode;
using test::TempDir;

Episode with_refs(Episode e) {
  for (std::size_t i = 0; i < e.frames.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "images/f%04zu.pgm", i);
    e.frames[i].image_ref = buf;
  }
  return e;
}

TEST(Slowdown, FrameCountOracle) {
  // N' = round((N-1)f) + 1
  const struct {
    std::size_t n;
    double f;
    std::size_t expected;
  } cases[] = {{41, 2.25, 91}, {21, 2.25, 46}, {2, 2.25, 3}, {11, 1.5, 16}, {10, 2.0, 19}, {9, 2.25, 19}};
  for (const auto& c : cases) {
    const Episode e = synth_episode("e", Domain::kHuman, 1, c.n);
    EXPECT_EQ(slow_down(e, c.f).frames.size(), c.expected) << c.n << " x " << c.f;
  }
}

TEST(Slowdown, EndpointsPreservedAndTimestampsAtFps) {
  const Episode e = synth_episode("e", Domain::kHuman, 2, 41);
  const Episode s = slow_down(e, 2.25);
  const auto& a0 = e.frames.front();
  const auto& a1 = e.frames.back();
  EXPECT_EQ(s.frames.front().wrist_pose.position(), a0.wrist_pose.position());
  EXPECT_EQ(s.frames.front().hand_joints, a0.hand_joints);
  EXPECT_LT((s.frames.back().wrist_pose.position() - a1.wrist_pose.position()).norm(), 1e-15);
  EXPECT_LT(angle_between(s.frames.back().wrist_pose.orientation(), a1.wrist_pose.orientation()), 1e-12);
  EXPECT_EQ(s.frames.back().hand_joints, a1.hand_joints);
  for (std::size_t i = 1; i < s.frames.size(); ++i) {
    EXPECT_NEAR(s.frames[i].timestamp - s.frames[i - 1].timestamp, 1.0 / e.fps, 1e-12);
  }
  EXPECT_DOUBLE_EQ(s.provenance.slowdown_factor, 2.25);
  EXPECT_NO_THROW(s.validate(&test::bundled_model()));
}

TEST(Slowdown, InteriorSamplesInterpolate) {
  // With f = 2 on N = 5, output frame 2k lands on input frame k and 2k+1 halfway.
  const Episode e = synth_episode("e", Domain::kHuman, 3, 5);
  const Episode s = slow_down(e, 2.0);
  ASSERT_EQ(s.frames.size(), 9u);
  for (std::size_t k = 0; k + 1 < e.frames.size(); ++k) {
    const auto& a = e.frames[k];
    const auto& b = e.frames[k + 1];
    EXPECT_LT((s.frames[2 * k].hand_joints - a.hand_joints).cwiseAbs().maxCoeff(), 1e-12);
    const auto& mid = s.frames[2 * k + 1];
    EXPECT_LT((mid.wrist_pose.position() - 0.5 * (a.wrist_pose.position() + b.wrist_pose.position())).norm(), 1e-12);
    EXPECT_LT((mid.hand_joints - 0.5 * (a.hand_joints + b.hand_joints)).cwiseAbs().maxCoeff(), 1e-12);
    const double half = angle_between(a.wrist_pose.orientation(), b.wrist_pose.orientation()) / 2;
    EXPECT_NEAR(angle_between(a.wrist_pose.orientation(), mid.wrist_pose.orientation()), half, 1e-9);
    EXPECT_NEAR(angle_between(b.wrist_pose.orientation(), mid.wrist_pose.orientation()), half, 1e-9);
    for (int m = 0; m < kHandKeypoints; ++m) {
      const Vec3 expect = 0.5 * ((*a.keypoints)[m] + (*b.keypoints)[m]);
      EXPECT_LT(((*mid.keypoints)[m] - expect).norm(), 1e-12);
    }
  }
}

TEST(Slowdown, FactorOneIsIdentityAndErrors) {
  const Episode e = synth_episode("e", Domain::kHuman, 4);
  const Episode s = slow_down(e, 1.0);
  EXPECT_EQ(encode_frames(s), encode_frames(e));
  EXPECT_THROW(slow_down(synth_episode("r", Domain::kRobot, 4), 2.25), InvalidArgument);
  EXPECT_THROW(slow_down(e, 0.5), InvalidArgument);
  Episode one = e;
  one.frames.resize(1);
  EXPECT_THROW(slow_down(one, 2.0), InvalidArgument);
}

TEST(Slowdown, ProcessEpisodeOnlyTouchesHuman) {
  const ChunkSpec spec;
  const Episode r = synth_episode("r", Domain::kRobot, 5);
  EXPECT_EQ(encode_frames(process_episode(r, spec)), encode_frames(r));
  EXPECT_EQ(process_episode(synth_episode("h", Domain::kHuman, 5), spec).frames.size(), 46u);
}

TEST(StateRow, LayoutAndInverse) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const Pose p = test::random_pose(rng);
    JointState j;
    for (int a = 0; a < kActuatorCount; ++a) j[a] = rng.uniform();
    const auto row = state_row(p, j);
    EXPECT_EQ(row.segment<3>(0).transpose(), p.position());
    const Rot6D r = encode_rot6d(p.orientation());
    for (int c = 0; c < 6; ++c) EXPECT_EQ(row(3 + c), r[c]);
    EXPECT_EQ(row.segment<6>(9).transpose(), j);
    const Pose back = pose_from_row(row, Frame::kCamera);
    EXPECT_LT((back.position() - p.position()).norm(), 1e-15);
    EXPECT_LT(angle_between(back.orientation(), p.orientation()), 1e-12);
  }
}

TEST(Samples, ShapesHistoryAndPadding) {
  const Episode e = with_refs(synth_episode("e", Domain::kHuman, 7, 21));
  ChunkSpec spec;
  spec.t_p = 3;
  spec.t_a = 5;
  const auto samples = make_samples(e, spec);
  ASSERT_EQ(samples.size(), e.frames.size());
  const long n = static_cast<long>(e.frames.size());
  for (const auto& s : samples) {
    ASSERT_EQ(s.proprio.rows(), 3);
    ASSERT_EQ(s.action.rows(), 5);
    EXPECT_EQ(s.image_ref, e.frames[s.t].image_ref);
    EXPECT_EQ(s.task_id, e.task_id);
    for (int h = 0; h < 3; ++h) {
      const long idx = std::max(0L, static_cast<long>(s.t) - 2 + h);
      const auto& f = e.frames[static_cast<std::size_t>(idx)];
      EXPECT_EQ(s.proprio.row(h), state_row(f.wrist_pose, f.hand_joints));
    }
    for (int k = 1; k <= 5; ++k) {
      const bool pad = static_cast<long>(s.t) + k > n - 1;
      EXPECT_EQ(s.pad_mask[k - 1], pad ? 1 : 0);
    }
  }
  // Last sample: every action row pads and repeats the final frame (relative: identity pose).
  const auto& last = samples.back();
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(last.pad_mask[k], 1);
    EXPECT_LT(last.action.row(k).segment<3>(0).norm(), 1e-15);
  }
}

TEST(Samples, RelativeActionsRecomposeToAbsolute) {
  const Episode e = synth_episode("e", Domain::kHuman, 8, 31);
  ChunkSpec rel;
  ChunkSpec abs = rel;
  abs.pose_mode = PoseMode::kAbsolute;
  const auto a = make_samples(e, rel);
  const auto b = make_samples(e, abs);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].proprio, b[i].proprio);
    const Pose cur = pose_from_row(a[i].proprio.row(rel.t_p - 1), Frame::kCamera);
    for (int k = 0; k < rel.t_a; ++k) {
      const Pose composed = compose(cur, pose_from_row(a[i].action.row(k), Frame::kWrist));
      const Pose direct = pose_from_row(b[i].action.row(k), Frame::kCamera);
      EXPECT_LT((composed.position() - direct.position()).norm(), 1e-12);
      EXPECT_LT(angle_between(composed.orientation(), direct.orientation()), 1e-12);
      EXPECT_EQ(a[i].action.row(k).segment<6>(9), b[i].action.row(k).segment<6>(9));
    }
  }
}

TEST(ChunkSpec, Validation) {
  ChunkSpec s;
  EXPECT_NO_THROW(s.validate());
  s.t_p = 0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = ChunkSpec{};
  s.slowdown = 0.9;
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_EQ(pose_mode_from_string("absolute"), PoseMode::kAbsolute);
  EXPECT_THROW(pose_mode_from_string("both"), InvalidArgument);
}

TEST(CropResize, CenterCropOf720p) {
  const CropResize c = crop_resize_spec(1280, 720);
  EXPECT_EQ(c.crop_x, 320);
  EXPECT_EQ(c.crop_y, 120);
  EXPECT_EQ(c.out_width, 224);
  // Half-pixel centers: output pixel 0 samples crop x = 0.5 * 640/224 - 0.5.
  const Eigen::Vector2d p = c.source_coordinate(0, 0);
  EXPECT_NEAR(p.x(), 320 + 0.5 * 640.0 / 224 - 0.5, 1e-12);
  EXPECT_NEAR(p.y(), 120 + 0.5 * 480.0 / 224 - 0.5, 1e-12);
  EXPECT_THROW(crop_resize_spec(600, 480), InvalidArgument);
}

TEST(CropResize, BilinearReproducesAffineImages) {
  // Bilinear interpolation is exact for affine intensity; with these sizes no
  // sample is clamped, so every output equals the affine function at its source coordinate.
  const CropResize c = crop_resize_spec(1280, 720);
  Image src{1280, 720, std::vector<double>(1280 * 720)};
  for (int y = 0; y < 720; ++y)
    for (int x = 0; x < 1280; ++x) src.pixels[static_cast<std::size_t>(y) * 1280 + x] = 0.25 * x - 0.5 * y + 3.0;
  const Image out = apply_crop_resize(src, c);
  ASSERT_EQ(out.width, 224);
  ASSERT_EQ(out.height, 224);
  for (int v = 0; v < 224; v += 7) {
    for (int u = 0; u < 224; u += 5) {
      const Eigen::Vector2d p = c.source_coordinate(u, v);
      EXPECT_NEAR(out.at(u, v), 0.25 * p.x() - 0.5 * p.y() + 3.0, 1e-9);
    }
  }
  EXPECT_THROW(apply_crop_resize(Image{10, 10, std::vector<double>(100)}, c), InvalidArgument);
}

TEST(CropResize, HandComputedBilinear) {
  // 2x2 -> 4x4: output (1,1) samples (0.25, 0.25).
  const Image src{2, 2, {0.0, 4.0, 8.0, 12.0}};
  const Image out = resize_bilinear(src, 4, 4);
  EXPECT_NEAR(out.at(1, 1), 0.25 * 4.0 + 0.25 * 8.0, 1e-15);
  EXPECT_NEAR(out.at(0, 0), 0.0, 1e-15);  // clamped to the corner
  EXPECT_NEAR(out.at(3, 3), 12.0, 1e-15);
}

TEST(SampleShards, EncodeDecodeRoundTrip) {
  const Episode e = with_refs(synth_episode("e", Domain::kHuman, 9, 25));
  ChunkSpec spec;
  spec.pose_mode = PoseMode::kAbsolute;
  spec.t_a = 7;
  const auto samples = make_samples(e, spec);
  const auto bytes = encode_samples(samples, spec);
  ChunkSpec back_spec;
  const auto back = decode_samples(bytes, &back_spec);
  EXPECT_EQ(back, samples);
  EXPECT_EQ(back_spec.t_a, 7);
  EXPECT_EQ(back_spec.pose_mode, PoseMode::kAbsolute);
  auto bad = bytes;
  bad[bad.size() / 2] ^= std::byte{0x10};
  EXPECT_THROW(decode_samples(bad), FormatError);
}

TEST(SampleShards, ExportAndReadBack) {
  TempDir data("transform_ds");
  TempDir out1("transform_out1");
  TempDir out4("transform_out4");
  write_dataset({with_refs(synth_episode("h0", Domain::kHuman, 10)), with_refs(synth_episode("h1", Domain::kHuman, 11)),
                 with_refs(synth_episode("r0", Domain::kRobot, 12))},
                data.path());
  const auto ds = Dataset::open(data.path());
  const ChunkSpec spec;
  const auto idx1 = export_samples(ds, spec, out1.path(), 1);
  const auto idx4 = export_samples(ds, spec, out4.path(), 4);
  EXPECT_EQ(idx1.to_json(), idx4.to_json());
  ASSERT_EQ(idx1.shards.size(), 3u);
  EXPECT_EQ(idx1.shards[0].n_samples, 46u);  // 21 frames slowed by 2.25
  EXPECT_EQ(idx1.shards[2].n_samples, 21u);
  EXPECT_EQ(idx1.source_index_hash, ds.index().hash());
  const auto set = read_samples(out1.path());
  EXPECT_EQ(set.samples.size(), 46u + 46u + 21u);
  EXPECT_EQ(SampleIndex::from_json(idx1.to_json()).to_json(), idx1.to_json());
  ASSERT_EQ(idx1.crops.size(), 3u);
  EXPECT_EQ(idx1.crops[0].second.crop_x, 320);
}

}  // namespace
}  // namespace h2r
