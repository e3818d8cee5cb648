#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "h2r/geometry.hpp"
#include "h2r/retarget.hpp"

namespace h2r {

// Pinhole intrinsics for pre-rectified images (no distortion model).
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Board corners in the chessboard frame (z = 0), indexed by point id.
struct PlanarTarget {
  std::vector<Vec3> points;
  Intrinsics intrinsics;

  // Throws InvalidArgument / DegenerateInput on fewer than 4 points,
  // non-zero z, or collinear layouts.
  void validate() const;
};

struct Detection {
  int point_id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

// Projects a board point for a camera whose pose in the board frame is
// `camera_in_board`. Throws DegenerateInput when the point is not in front
// of the camera.
Eigen::Vector2d project(const Intrinsics& k, const Pose& camera_in_board, const Vec3& board_point);

struct PlanarPoseEstimate {
  Pose camera_in_board = Pose::identity(Frame::kChessboard);
  double residual_px = 0.0;          // RMS reprojection error after refinement
  double initial_residual_px = 0.0;  // RMS error of the homography initialisation
  int iterations = 0;
};

// Homography initialisation followed by damped Gauss–Newton on the
// reprojection error. Stops when the step norm drops below 1e-10 or after
// 100 iterations.
PlanarPoseEstimate estimate_planar_pose(const PlanarTarget& target,
                                        std::span<const Detection> detections);

struct Plane {
  Vec3 normal = Vec3::UnitZ();  // unit, oriented toward +z
  double offset = 0.0;          // normal · x = offset on the plane
  double inlier_rms = 0.0;
  std::size_t inlier_count = 0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

struct PlaneFitOptions {
  bool ransac = false;
  double inlier_threshold = 0.005;  // meters
  int iterations = 200;
  std::uint64_t seed = 0;
};

// Least-squares plane through the centroid along the smallest covariance
// eigenvector, optionally inside a seeded RANSAC loop. Throws
// DegenerateInput for fewer than 3 points or rank-deficient sets.
Plane fit_plane(std::span<const Vec3> points, const PlaneFitOptions& options = {});

inline constexpr double kAnchorPlaneWarnDistance = 0.05;  // meters

struct AnchorSolution {
  Pose t_vr = Pose::identity(Frame::kChessboard);  // VR camera in the board frame
  Vec3 projected_anchor = Vec3::Zero();
  double plane_distance = 0.0;
  bool far_from_plane = false;
};

// The anchor block sits at the board origin. Its height is taken from the
// fitted desktop plane; only the in-plane reading is trusted.
AnchorSolution solve_vr_anchor(const Pose& anchor_in_vr, const Plane& plane);

struct CalibrationResult {
  std::string id;
  Pose t_cam = Pose::identity(Frame::kChessboard);
  Pose t_vr = Pose::identity(Frame::kChessboard);
  Pose vr_to_cam = Pose::identity(Frame::kCamera);  // inverse(t_cam) ∘ t_vr
  double residual_px = 0.0;
  double initial_residual_px = 0.0;
  std::optional<Plane> plane;
  double anchor_plane_distance = 0.0;
  std::vector<std::string> warnings;

  static CalibrationResult from_parts(std::string id, const Pose& t_cam, const Pose& t_vr);
  static CalibrationResult identity(std::string id = "identity");

  std::string to_json() const;
  static CalibrationResult from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static CalibrationResult load(const std::filesystem::path& path);
};

// VR-frame data to camera frame. Inputs must be tagged Frame::kVr.
Pose apply_calibration(const CalibrationResult& cal, const Pose& vr_pose);
Vec3 apply_calibration(const CalibrationResult& cal, const Vec3& vr_point);
HumanHand apply_calibration(const CalibrationResult& cal, const HumanHand& vr_hand);

// Everything captured during one calibration sitting.
struct CalibrationSession {
  std::string id;
  PlanarTarget target;
  std::vector<Detection> detections;
  Pose anchor_in_vr = Pose::identity(Frame::kVr);
  std::vector<Vec3> depth_points;
  PlaneFitOptions plane_options;

  std::string to_json() const;
  static CalibrationSession from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static CalibrationSession load(const std::filesystem::path& path);
};

CalibrationResult calibrate(const CalibrationSession& session);

}  // namespace h2r
