#include <benchmark/benchmark.h>

#include "h2r/geometry.hpp"
#include "h2r/kinematics.hpp"
#include "h2r/normalize.hpp"
#include "h2r/retarget.hpp"
#include "h2r/synth.hpp"
#include "h2r/transform.hpp"

namespace {

const h2r::HandModel& model() {
  static const h2r::HandModel m = h2r::HandModel::load(std::filesystem::path(H2R_BENCH_DATA_DIR) / "hand" /
                                                       "inspire6_approx.hand");
  return m;
}

h2r::Episode episode(std::size_t n) {
  h2r::SynthTrajectoryOptions o;
  o.frames = n;
  const auto tr = h2r::synth_trajectory(model(), 1, o);
  h2r::Episode e;
  e.id = "bench";
  e.task_id = "t";
  e.fps = o.fps;
  for (std::size_t i = 0; i < n; ++i) {
    h2r::FrameRecord f;
    f.timestamp = tr.timestamps[i];
    f.wrist_pose = tr.wrist[i];
    f.hand_joints = tr.joints[i];
    e.frames.push_back(f);
  }
  return e;
}

void BM_Compose(benchmark::State& state) {
  h2r::Rng rng(1);
  const h2r::Pose a(h2r::Vec3(0.1, 0.2, 0.3), h2r::Quat(0.9, 0.1, 0.3, 0.2));
  const h2r::Pose b(h2r::Vec3(-0.1, 0.0, 0.4), h2r::Quat(0.7, -0.2, 0.1, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(h2r::compose(a, h2r::inverse(b)));
}
BENCHMARK(BM_Compose);

void BM_Rot6dRoundTrip(benchmark::State& state) {
  const h2r::Quat q = h2r::Quat(0.7, -0.2, 0.1, 0.5).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(h2r::decode_rot6d(h2r::encode_rot6d(q)));
}
BENCHMARK(BM_Rot6dRoundTrip);

void BM_ForwardKinematics(benchmark::State& state) {
  const auto q = model().mid_range();
  for (auto _ : state) benchmark::DoNotOptimize(h2r::forward_kinematics(model(), q));
}
BENCHMARK(BM_ForwardKinematics);

void BM_Jacobian(benchmark::State& state) {
  const auto q = model().mid_range();
  for (auto _ : state) benchmark::DoNotOptimize(h2r::fingertip_jacobian(model(), q));
}
BENCHMARK(BM_Jacobian);

void BM_RetargetFrame(benchmark::State& state) {
  h2r::Rng rng(2);
  h2r::HumanHand h;
  h.wrist_pose = h2r::Pose::identity(h2r::Frame::kWrist);
  h.keypoints = h2r::synth_keypoints(model(), h2r::synth_joint_state(model(), rng));
  const h2r::RetargetConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(h2r::retarget_frame(model(), h, model().mid_range(), cfg));
}
BENCHMARK(BM_RetargetFrame);

void BM_SlowDown(benchmark::State& state) {
  const auto e = episode(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(h2r::slow_down(e, 2.25));
}
BENCHMARK(BM_SlowDown)->Arg(81)->Arg(401);

void BM_MakeSamples(benchmark::State& state) {
  const auto e = episode(static_cast<std::size_t>(state.range(0)));
  const h2r::ChunkSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(h2r::make_samples(e, spec));
}
BENCHMARK(BM_MakeSamples)->Arg(81)->Arg(401);

void BM_FitStats(benchmark::State& state) {
  const auto samples = h2r::make_samples(episode(401), h2r::ChunkSpec{});
  for (auto _ : state) benchmark::DoNotOptimize(h2r::fit_stats(samples, h2r::NormMode::kUnified));
}
BENCHMARK(BM_FitStats);

}  // namespace
BENCHMARK_MAIN();
