#pragma once

#include <array>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace h2r {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

// Coordinate frame a pose is expressed in. Tags are metadata checked at
// module boundaries; the inner math never looks at them.
enum class Frame { kVr, kCamera, kWrist, kChessboard, kRobotBase };

std::string_view to_string(Frame frame);
Frame frame_from_string(std::string_view name);

// Rigid transform with a unit quaternion kept in canonical form (w >= 0).
class Pose {
 public:
  Pose() = default;
  Pose(const Vec3& position, const Quat& orientation, Frame frame = Frame::kCamera);

  static Pose identity(Frame frame = Frame::kCamera) { return Pose({0, 0, 0}, Quat::Identity(), frame); }
  static Pose translation(const Vec3& t, Frame frame = Frame::kCamera) {
    return Pose(t, Quat::Identity(), frame);
  }
  static Pose from_matrix(const Mat4& m, Frame frame = Frame::kCamera);

  const Vec3& position() const { return position_; }
  const Quat& orientation() const { return orientation_; }
  Frame frame() const { return frame_; }
  Pose with_frame(Frame frame) const { return Pose(position_, orientation_, frame); }

  Mat3 rotation() const { return orientation_.toRotationMatrix(); }
  Mat4 matrix() const;

  // Maps a point from the pose's child frame into its parent frame.
  Vec3 apply(const Vec3& point) const { return orientation_ * point + position_; }

 private:
  Vec3 position_ = Vec3::Zero();
  Quat orientation_ = Quat::Identity();
  Frame frame_ = Frame::kCamera;
};

// Normalises and flips to w >= 0. Throws InvalidArgument on a zero or
// non-finite quaternion.
Quat canonical(const Quat& q);

// a ∘ b. The result carries a's frame tag.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

// base⁻¹ ∘ target: target expressed in base's local frame. The result is
// tagged kWrist. Throws FrameMismatch when the tags differ.
Pose relative(const Pose& base, const Pose& target);

// Linear position, shorter-arc spherical orientation. t=0 and t=1 return
// the endpoints exactly. Throws InvalidArgument for t outside [0, 1] and
// FrameMismatch for differing tags.
Pose slerp(const Pose& a, const Pose& b, double t);
Quat slerp(const Quat& a, const Quat& b, double t);

// Geodesic angle between two rotations, in [0, π].
double angle_between(const Quat& a, const Quat& b);
double rotation_angle(const Quat& q);

// First two rows of the rotation matrix, row-major.
using Rot6D = std::array<double, 6>;

Rot6D encode_rot6d(const Quat& q);
Rot6D encode_rot6d(const Mat3& r);
// Gram–Schmidt: normalise row 1, orthogonalise and normalise row 2,
// row 3 = row1 × row2. Throws DegenerateInput when row 1 is (near) zero
// or the rows are (near) parallel.
Mat3 decode_rot6d_matrix(const Rot6D& v);
Quat decode_rot6d(const Rot6D& v);

}  // namespace h2r
