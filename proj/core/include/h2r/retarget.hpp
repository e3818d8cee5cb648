#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "h2r/geometry.hpp"
#include "h2r/kinematics.hpp"

namespace h2r {

inline constexpr int kHandKeypoints = 21;

// 21 landmarks: wrist, then 4 per finger from thumb to pinky (MCP→tip).
struct HumanHand {
  std::array<Vec3, kHandKeypoints> keypoints{};
  Pose wrist_pose = Pose::identity(Frame::kCamera);

  // Keypoints re-expressed in the wrist's local frame.
  HumanHand to_wrist_local() const;
};

// Human vector keypoints[to] - keypoints[from] is matched against the robot
// vector (fingertip `robot_tip` - wrist origin).
struct TaskVector {
  int human_from = 0;
  int human_to = 0;
  int robot_tip = 0;
  double weight = 1.0;
};

struct RetargetConfig {
  std::vector<TaskVector> task_vectors = default_task_vectors();
  double scale = 1.0;
  double smoothness = 0.05;  // weight on ||q - q_prev||^2
  int max_iters = 100;
  double step_tol = 1e-8;
  double initial_damping = 1e-3;
  // Rounds of re-solving with limit-pinned actuators pushed inward. Gauss-Newton
  // cannot leave a flat saddle on a bound, so the escape is explicit.
  int bound_restarts = 2;

  // wrist→fingertip for the five fingers.
  static std::vector<TaskVector> default_task_vectors();
  void validate(const HandModel& model) const;
  // Stable hash of the canonical text form, recorded in provenance.
  std::uint64_t hash() const;
};

struct RetargetResult {
  JointState q = JointState::Zero();
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  // Objective at the start point followed by every accepted iterate.
  std::vector<double> accepted_objectives;
};

// Objective value sum_i w_i ||s v_i(hand) - v_i(FK(q))||^2 + beta ||q - q_prev||^2
// with `hand` already in the wrist-local frame.
double retarget_objective(const HandModel& model, const HumanHand& hand, const JointState& q,
                          const JointState& q_prev, const RetargetConfig& cfg);

// Damped Gauss–Newton (Levenberg–Marquardt) with box projection onto the
// actuator limits, started from q_prev. `hand` keypoints must already be
// wrist-local. Throws InvalidArgument on non-finite keypoints.
RetargetResult retarget_frame(const HandModel& model, const HumanHand& hand,
                              const JointState& q_prev, const RetargetConfig& cfg);

// Sequential warm start: frame t starts from and is anchored to frame t-1's
// solution; frame 0 uses the model's mid-range values.
std::vector<RetargetResult> retarget_episode(const HandModel& model,
                                             std::span<const HumanHand> hands,
                                             const RetargetConfig& cfg);

}  // namespace h2r
