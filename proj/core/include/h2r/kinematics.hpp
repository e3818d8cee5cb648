#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "h2r/geometry.hpp"

namespace h2r {

inline constexpr int kActuatorCount = 6;

// Actuated hand joint values, radians.
using JointState = Eigen::Matrix<double, kActuatorCount, 1>;

struct ActuatorSpec {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
};

// One revolute joint: the chain transform advances by `offset`, then rotates
// about `axis` (unit, in the post-offset frame) by the angle
// sum_a drive[a] * q[a].
struct JointSpec {
  std::string name;
  Vec3 axis = Vec3::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
  Pose offset = Pose::identity(Frame::kWrist);
  std::array<double, kActuatorCount> drive{};
};

struct FingerChain {
  std::string name;
  Pose base = Pose::identity(Frame::kWrist);
  std::vector<JointSpec> joints;
  Pose tip = Pose::identity(Frame::kWrist);
};

// Serial-chain description of the robot hand. Immutable after construction;
// the constructor validates every invariant (unit axes, lo < hi, exactly
// kActuatorCount actuators, coupled joint ranges inside joint limits).
class HandModel {
 public:
  HandModel(std::vector<FingerChain> fingers, std::array<ActuatorSpec, kActuatorCount> actuators);

  // "h2r-hand v1" text format; see docs/FORMATS.md.
  static HandModel parse(std::string_view text);
  static HandModel load(const std::filesystem::path& path);
  std::string serialize() const;

  const std::vector<FingerChain>& fingers() const { return fingers_; }
  const std::array<ActuatorSpec, kActuatorCount>& actuators() const { return actuators_; }
  std::size_t fingertip_count() const { return fingers_.size(); }

  JointState lower_limits() const;
  JointState upper_limits() const;
  JointState mid_range() const;
  JointState clamp(const JointState& q) const;
  bool within_limits(const JointState& q, double tol = 0.0) const;

  // Same topology with every translation multiplied by `factor`.
  HandModel scaled(double factor) const;

 private:
  std::vector<FingerChain> fingers_;
  std::array<ActuatorSpec, kActuatorCount> actuators_;
};

// Fingertip positions in the wrist frame, one per finger chain.
// Throws InvalidArgument when q does not have kActuatorCount entries.
std::vector<Vec3> forward_kinematics(const HandModel& model,
                                     const Eigen::Ref<const Eigen::VectorXd>& q);

// d(fingertip positions)/dq, stacked 3 rows per fingertip, one column per
// actuator. Coupled joints contribute through their drive ratios.
Eigen::MatrixXd fingertip_jacobian(const HandModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& q);

// Both at once; retargeting needs the pair every iteration.
void forward_kinematics_with_jacobian(const HandModel& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& q,
                                      std::vector<Vec3>& tips, Eigen::MatrixXd& jacobian);

}  // namespace h2r
