#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "h2r/calibration.hpp"
#include "h2r/dataset.hpp"
#include "h2r/util.hpp"

namespace h2r {

// Synthetic data with known ground truth, used by tests, benchmarks and
// the `synth` command. Everything is a pure function of the seed.

struct SynthCalibrationOptions {
  int board_cols = 9;
  int board_rows = 6;
  double square = 0.04;  // meters
  // Camera sits 0.5-0.65 m from the board centre, tilted this far off the
  // board normal (rad), like a head camera looking down at a desk.
  double view_tilt_min = 0.6;
  double view_tilt_max = 0.95;
  Intrinsics intrinsics{900.0, 900.0, 640.0, 360.0};
  double pixel_noise = 0.0;          // px, Gaussian per coordinate
  double depth_noise = 0.0;          // m, along the plane normal
  double anchor_height_error = 0.0;  // m, along the plane normal
  int depth_points = 200;
  int depth_outliers = 0;
};

struct SynthCalibration {
  CalibrationSession session;
  Pose t_cam;      // true camera pose in the board frame
  Pose t_vr;       // true VR origin in the board frame
  Pose vr_to_cam;  // inverse(t_cam) ∘ t_vr
};

SynthCalibration synth_calibration(std::uint64_t seed, const SynthCalibrationOptions& options = {});

// 21 wrist-local landmarks for joint state q: the wrist, then per finger
// the chain base, two points interpolated toward the tip, and the FK tip.
Keypoints synth_keypoints(const HandModel& model, const JointState& q);

// A random joint state strictly inside the model limits.
JointState synth_joint_state(const HandModel& model, Rng& rng, double margin = 0.05);

struct SynthTrajectory {
  std::vector<double> timestamps;
  std::vector<Pose> wrist;  // camera frame
  std::vector<JointState> joints;
};

struct SynthTrajectoryOptions {
  std::size_t frames = 41;
  double fps = 10.0;
  Vec3 center{0.0, 0.05, 0.55};
  double amplitude = 0.12;        // m
  double rotation_amplitude = 0.35;  // rad
  double cycles = 0.6;            // oscillation periods over the episode
};

// Smooth wrist and joint motion: sinusoids with random phase and
// direction, so finite-difference speeds vary slowly from frame to frame.
SynthTrajectory synth_trajectory(const HandModel& model, std::uint64_t seed, const SynthTrajectoryOptions& options);

struct SynthTask {
  std::string id;
  std::string instruction;
};

struct SynthCorpusConfig {
  std::uint64_t seed = 7;
  std::size_t human_episodes = 56;
  std::size_t robot_episodes = 12;
  double fps = 10.0;
  // Frame counts are drawn from {min, min + 4, ..., max}.
  std::size_t frames_min = 41;
  std::size_t frames_max = 81;
  int image_width = 1280;
  int image_height = 720;
  std::vector<SynthTask> human_tasks;
  std::vector<SynthTask> robot_tasks;
  SynthCalibrationOptions calibration;

  void validate() const;
  std::string to_json() const;
  static SynthCorpusConfig from_json(const std::string& text);
  static SynthCorpusConfig load(const std::filesystem::path& path);
};

struct SynthEpisode {
  std::string id;
  Domain domain = Domain::kHuman;
  std::string task_id;
  SynthTrajectory truth;  // camera frame
};

struct SynthCorpus {
  SynthCorpusConfig config;
  SynthCalibration calibration;
  Pose base_to_camera;
  std::vector<SynthEpisode> human;
  std::vector<SynthEpisode> robot;
};

SynthCorpus make_synth_corpus(const HandModel& model, const SynthCorpusConfig& config);

// Writes calibration.json, human/ and robot/ raw sessions (frame files and
// small placeholder PGM images) and robot/extrinsic.json under `dir`.
void write_synth_corpus(const SynthCorpus& corpus, const HandModel& model, const std::filesystem::path& dir);

// Index-only corpus with the given per-domain episode counts (no frames).
DatasetIndex make_counts_index(std::size_t n_human, std::size_t n_robot);

}  // namespace h2r
