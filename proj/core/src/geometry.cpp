#include "h2r/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "h2r/error.hpp"

namespace h2r {
namespace {

constexpr double kSlerpLerpThreshold = 1.0 - 1e-9;
constexpr double kRot6dDegenerate = 1e-9;

}  // namespace

std::string_view to_string(Frame frame) {
  switch (frame) {
    case Frame::kVr: return "vr";
    case Frame::kCamera: return "camera";
    case Frame::kWrist: return "wrist";
    case Frame::kChessboard: return "chessboard";
    case Frame::kRobotBase: return "robot_base";
  }
  return "unknown";
}

Frame frame_from_string(std::string_view name) {
  if (name == "vr") return Frame::kVr;
  if (name == "camera") return Frame::kCamera;
  if (name == "wrist") return Frame::kWrist;
  if (name == "chessboard") return Frame::kChessboard;
  if (name == "robot_base") return Frame::kRobotBase;
  throw InvalidArgument("unknown frame '" + std::string(name) + "'");
}

Quat canonical(const Quat& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) throw InvalidArgument("quaternion is zero or non-finite");
  // Already-unit inputs are kept as is so that canonical() is idempotent.
  Quat out = std::abs(n - 1.0) <= 4 * std::numeric_limits<double>::epsilon() ? q : Quat(q.coeffs() / n);
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Pose::Pose(const Vec3& position, const Quat& orientation, Frame frame)
    : position_(position), orientation_(canonical(orientation)), frame_(frame) {}

Pose Pose::from_matrix(const Mat4& m, Frame frame) {
  return Pose(m.block<3, 1>(0, 3), Quat(Mat3(m.block<3, 3>(0, 0))), frame);
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = rotation();
  m.block<3, 1>(0, 3) = position_;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.orientation() * b.position() + a.position(),
              a.orientation() * b.orientation(), a.frame());
}

Pose inverse(const Pose& p) {
  const Quat qi = p.orientation().conjugate();
  return Pose(-(qi * p.position()), qi, p.frame());
}

Pose relative(const Pose& base, const Pose& target) {
  if (base.frame() != target.frame()) {
    throw FrameMismatch("relative: base is in '" + std::string(to_string(base.frame())) +
                        "' but target is in '" + std::string(to_string(target.frame())) + "'");
  }
  const Quat qi = base.orientation().conjugate();
  return Pose(qi * (target.position() - base.position()), qi * target.orientation(),
              Frame::kWrist);
}

Quat slerp(const Quat& a, const Quat& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("slerp: t must lie in [0, 1]");
  if (t == 0.0) return canonical(a);
  if (t == 1.0) return canonical(b);
  Eigen::Vector4d va = a.coeffs();
  Eigen::Vector4d vb = b.coeffs();
  double dot = va.dot(vb);
  if (dot < 0.0) {
    vb = -vb;
    dot = -dot;
  }
  Eigen::Vector4d out;
  if (dot > kSlerpLerpThreshold) {
    out = va + t * (vb - va);
  } else {
    const double theta = std::acos(std::min(dot, 1.0));
    const double s = std::sin(theta);
    out = (std::sin((1.0 - t) * theta) / s) * va + (std::sin(t * theta) / s) * vb;
  }
  Quat q;
  q.coeffs() = out;
  return canonical(q);
}

Pose slerp(const Pose& a, const Pose& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("slerp: t must lie in [0, 1]");
  if (a.frame() != b.frame()) throw FrameMismatch("slerp: poses in different frames");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return Pose(a.position() + t * (b.position() - a.position()),
              slerp(a.orientation(), b.orientation(), t), a.frame());
}

double rotation_angle(const Quat& q) {
  const Quat c = canonical(q);
  // atan2 form stays accurate for angles near 0 where acos(w) does not.
  return 2.0 * std::atan2(c.vec().norm(), c.w());
}

double angle_between(const Quat& a, const Quat& b) {
  return rotation_angle(a.conjugate() * b);
}

Rot6D encode_rot6d(const Mat3& r) {
  return {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2)};
}

Rot6D encode_rot6d(const Quat& q) { return encode_rot6d(canonical(q).toRotationMatrix()); }

Mat3 decode_rot6d_matrix(const Rot6D& v) {
  Vec3 r1(v[0], v[1], v[2]);
  Vec3 r2(v[3], v[4], v[5]);
  if (!r1.allFinite() || !r2.allFinite()) throw DegenerateInput("rot6d: non-finite entries");
  const double n1 = r1.norm();
  if (n1 < kRot6dDegenerate) throw DegenerateInput("rot6d: first row is zero");
  r1 /= n1;
  r2 -= r1.dot(r2) * r1;
  const double n2 = r2.norm();
  if (n2 < kRot6dDegenerate * std::max(1.0, Vec3(v[3], v[4], v[5]).norm())) {
    throw DegenerateInput("rot6d: rows are parallel");
  }
  r2 /= n2;
  Mat3 r;
  r.row(0) = r1;
  r.row(1) = r2;
  r.row(2) = r1.cross(r2);
  return r;
}

Quat decode_rot6d(const Rot6D& v) { return canonical(Quat(decode_rot6d_matrix(v))); }

}  // namespace h2r
