#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "h2r/dataset.hpp"
#include "h2r/transform.hpp"

namespace h2r {

// Workspace box (camera frame, meters) and speed limits. The bundled
// defaults in data/replay_limits.json are placeholders, not hardware values.
struct ReplayLimits {
  Vec3 box_min{-1.0, -1.0, 0.05};
  Vec3 box_max{1.0, 1.0, 2.0};
  double vmax = 1.0;  // m/s
  double wmax = 3.0;  // rad/s
  double jmax = 6.0;  // rad/s

  void validate() const;
  std::string to_json() const;
  static ReplayLimits from_json(const std::string& text);
  static ReplayLimits load(const std::filesystem::path& path);
};

enum class ViolationKind { kWorkspace, kLinearSpeed, kAngularSpeed, kJointSpeed, kJointLimit };
std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind = ViolationKind::kWorkspace;
  std::size_t frame = 0;
  double value = 0.0;  // offending speed, or distance outside the box / limits
  double limit = 0.0;
};

struct ReplayReport {
  std::string episode_id;
  std::size_t n_frames = 0;
  double max_linear_speed = 0.0;
  double max_angular_speed = 0.0;
  double max_joint_speed = 0.0;
  std::vector<Violation> violations;  // ordered by frame, then kind

  bool pass() const { return violations.empty(); }
};

// Finite-difference speeds at dt = 1/fps: central differences inside the
// episode, one-sided at both ends.
struct SpeedProfile {
  std::vector<double> linear;
  std::vector<double> angular;
  std::vector<double> joint;  // max over actuators
};
SpeedProfile speed_profile(const Episode& episode);

// Joint limits are only checked when `model` is given. Throws
// InvalidArgument for fps <= 0 or fewer than 2 frames.
ReplayReport check_episode(const Episode& episode, const ReplayLimits& limits, const HandModel* model = nullptr);

std::vector<ReplayReport> check_episodes(const std::vector<Episode>& episodes, const ReplayLimits& limits,
                                         const HandModel* model = nullptr, int threads = 1);

struct ChunkError {
  std::size_t sample = 0;  // index into the sample list
  std::size_t row = 0;     // action row
  double position = 0.0;   // meters
  double rotation = 0.0;   // radians
  double joints = 0.0;     // max abs
};

struct ReconstructionReport {
  PoseMode mode = PoseMode::kRelative;
  std::size_t rows_checked = 0;
  std::size_t padded_rows = 0;
  double max_position_error = 0.0;
  double max_rotation_error = 0.0;
  double max_joint_error = 0.0;
  ChunkError worst;                  // unpadded row with the largest error
  double max_padded_error = 0.0;     // position error over padded rows, reported separately
  std::vector<ChunkError> over_tolerance;

  double max_error() const;
  bool pass(double tol = 1e-9) const { return max_error() < tol; }
};

// Rebuilds every action row from its sample's current proprio pose and
// compares it with the frame it came from. Relative rows are composed onto
// the current pose; absolute rows are compared directly. Throws
// InvalidArgument when a sample's mode differs from `expected`, and
// ValidationError when a sample does not belong to `episode`.
ReconstructionReport chunk_reconstruction_check(const std::vector<TrainingSample>& samples, const Episode& episode,
                                                PoseMode expected, double tol = 1e-9);

}  // namespace h2r
