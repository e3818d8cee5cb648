#include "h2r/kinematics.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "h2r/error.hpp"
#include "h2r/util.hpp"

namespace h2r {
namespace {

constexpr double kAxisTolerance = 1e-9;
constexpr double kRangeTolerance = 1e-12;

void check_size(const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (q.size() != kActuatorCount) {
    throw InvalidArgument("joint state has " + std::to_string(q.size()) +
                          " values; the hand model has " + std::to_string(kActuatorCount) +
                          " actuators");
  }
}

double joint_angle(const JointSpec& joint, const Eigen::Ref<const Eigen::VectorXd>& q) {
  double angle = 0.0;
  for (int a = 0; a < kActuatorCount; ++a) angle += joint.drive[a] * q[a];
  return angle;
}

// Line-oriented tokenizer for the hand model format.
struct Line {
  int number = 0;
  std::vector<std::string> tokens;

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("hand model line " + std::to_string(number) + ": " + what);
  }
  double number_at(std::size_t i) const {
    if (i >= tokens.size()) fail("missing value");
    try {
      return parse_double(tokens[i]);
    } catch (const FormatError&) {
      fail("expected a number, got '" + tokens[i] + "'");
    }
  }
  Pose pose_at(std::size_t i) const {
    const Vec3 p(number_at(i), number_at(i + 1), number_at(i + 2));
    const Quat q(number_at(i + 3), number_at(i + 4), number_at(i + 5), number_at(i + 6));
    return Pose(p, q, Frame::kWrist);
  }
  const std::string& word_at(std::size_t i) const {
    if (i >= tokens.size()) fail("missing token");
    return tokens[i];
  }
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    Line line{number, {}};
    for (std::string tok; ls >> tok;) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::string pose_tokens(const Pose& p) {
  const auto& t = p.position();
  const auto& q = p.orientation();
  std::string out;
  for (double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) {
    out += ' ';
    out += format_double(v);
  }
  return out;
}

}  // namespace

HandModel::HandModel(std::vector<FingerChain> fingers,
                     std::array<ActuatorSpec, kActuatorCount> actuators)
    : fingers_(std::move(fingers)), actuators_(std::move(actuators)) {
  if (fingers_.empty()) throw InvalidArgument("hand model has no finger chains");
  for (const auto& act : actuators_) {
    if (!(act.lower < act.upper)) {
      throw InvalidArgument("actuator '" + act.name + "' has lower >= upper");
    }
  }
  std::set<std::string> names;
  for (const auto& finger : fingers_) {
    if (!names.insert(finger.name).second) {
      throw InvalidArgument("duplicate finger name '" + finger.name + "'");
    }
    for (const auto& joint : finger.joints) {
      const std::string where = finger.name + "/" + joint.name;
      if (std::abs(joint.axis.norm() - 1.0) > kAxisTolerance) {
        throw InvalidArgument("joint " + where + " axis is not unit length");
      }
      if (!(joint.lower < joint.upper)) {
        throw InvalidArgument("joint " + where + " has lower >= upper");
      }
      // Interval image of the actuator box under the linear drive map.
      double lo = 0.0, hi = 0.0;
      for (int a = 0; a < kActuatorCount; ++a) {
        const double x = joint.drive[a] * actuators_[a].lower;
        const double y = joint.drive[a] * actuators_[a].upper;
        lo += std::min(x, y);
        hi += std::max(x, y);
      }
      if (lo < joint.lower - kRangeTolerance || hi > joint.upper + kRangeTolerance) {
        throw InvalidArgument("joint " + where +
                              ": actuator limits drive it outside its joint limits");
      }
    }
  }
}

HandModel HandModel::parse(std::string_view text) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw FormatError("hand model: empty file");
  const auto& header = lines.front();
  if (header.tokens.size() != 2 || header.tokens[0] != "h2r-hand") {
    header.fail("expected header 'h2r-hand v1'");
  }
  if (header.tokens[1] != "v1") {
    header.fail("unsupported hand model version '" + header.tokens[1] + "'");
  }

  std::array<ActuatorSpec, kActuatorCount> actuators;
  std::array<bool, kActuatorCount> seen{};
  std::vector<FingerChain> fingers;
  FingerChain* current = nullptr;
  bool have_tip = false;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto& kw = line.tokens[0];
    if (kw == "actuator") {
      if (current) line.fail("'actuator' inside a finger block");
      if (line.tokens.size() != 5) line.fail("usage: actuator <index> <name> <lower> <upper>");
      const double idx = line.number_at(1);
      if (idx != std::floor(idx) || idx < 0 || idx >= kActuatorCount) {
        line.fail("actuator index must be an integer in [0, 6)");
      }
      const auto a = static_cast<std::size_t>(idx);
      if (seen[a]) line.fail("actuator " + line.tokens[1] + " declared twice");
      seen[a] = true;
      actuators[a] = {line.tokens[2], line.number_at(3), line.number_at(4)};
    } else if (kw == "finger") {
      if (current) line.fail("nested 'finger' (missing 'end')");
      if (line.tokens.size() != 2) line.fail("usage: finger <name>");
      fingers.push_back(FingerChain{line.tokens[1], Pose::identity(Frame::kWrist), {},
                                    Pose::identity(Frame::kWrist)});
      current = &fingers.back();
      have_tip = false;
    } else if (kw == "base") {
      if (!current) line.fail("'base' outside a finger block");
      if (line.tokens.size() != 8) line.fail("usage: base <px py pz qw qx qy qz>");
      current->base = line.pose_at(1);
    } else if (kw == "joint") {
      if (!current) line.fail("'joint' outside a finger block");
      // joint <name> axis x y z limits lo hi offset px py pz qw qx qy qz drive (a r)+
      if (line.tokens.size() < 20 || line.word_at(2) != "axis" || line.word_at(6) != "limits" ||
          line.word_at(9) != "offset" || line.word_at(17) != "drive" ||
          (line.tokens.size() - 18) % 2 != 0) {
        line.fail(
            "usage: joint <name> axis <x y z> limits <lo hi> offset <px py pz qw qx qy qz> "
            "drive <actuator ratio>...");
      }
      JointSpec joint;
      joint.name = line.tokens[1];
      joint.axis = Vec3(line.number_at(3), line.number_at(4), line.number_at(5));
      joint.lower = line.number_at(7);
      joint.upper = line.number_at(8);
      joint.offset = line.pose_at(10);
      for (std::size_t k = 18; k < line.tokens.size(); k += 2) {
        const double idx = line.number_at(k);
        if (idx != std::floor(idx) || idx < 0 || idx >= kActuatorCount) {
          line.fail("drive actuator index must be an integer in [0, 6)");
        }
        joint.drive[static_cast<std::size_t>(idx)] += line.number_at(k + 1);
      }
      current->joints.push_back(std::move(joint));
    } else if (kw == "tip") {
      if (!current) line.fail("'tip' outside a finger block");
      if (line.tokens.size() != 8) line.fail("usage: tip <px py pz qw qx qy qz>");
      current->tip = line.pose_at(1);
      have_tip = true;
    } else if (kw == "end") {
      if (!current) line.fail("'end' without 'finger'");
      if (!have_tip) line.fail("finger '" + current->name + "' has no tip");
      current = nullptr;
    } else {
      line.fail("unknown keyword '" + kw + "'");
    }
  }
  if (current) throw FormatError("hand model: finger '" + current->name + "' is not closed");
  for (int a = 0; a < kActuatorCount; ++a) {
    if (!seen[a]) throw FormatError("hand model: actuator " + std::to_string(a) + " not declared");
  }
  try {
    return HandModel(std::move(fingers), std::move(actuators));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("hand model: ") + e.what());
  }
}

HandModel HandModel::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

std::string HandModel::serialize() const {
  std::string out = "h2r-hand v1\n";
  for (int a = 0; a < kActuatorCount; ++a) {
    const auto& act = actuators_[a];
    out += "actuator " + std::to_string(a) + " " + act.name + " " + format_double(act.lower) +
           " " + format_double(act.upper) + "\n";
  }
  for (const auto& f : fingers_) {
    out += "finger " + f.name + "\n";
    out += "  base" + pose_tokens(f.base) + "\n";
    for (const auto& j : f.joints) {
      out += "  joint " + j.name + " axis " + format_double(j.axis.x()) + " " +
             format_double(j.axis.y()) + " " + format_double(j.axis.z()) + " limits " +
             format_double(j.lower) + " " + format_double(j.upper) + " offset" +
             pose_tokens(j.offset) + " drive";
      for (int a = 0; a < kActuatorCount; ++a) {
        if (j.drive[a] != 0.0) out += " " + std::to_string(a) + " " + format_double(j.drive[a]);
      }
      out += "\n";
    }
    out += "  tip" + pose_tokens(f.tip) + "\nend\n";
  }
  return out;
}

JointState HandModel::lower_limits() const {
  JointState q;
  for (int a = 0; a < kActuatorCount; ++a) q[a] = actuators_[a].lower;
  return q;
}

JointState HandModel::upper_limits() const {
  JointState q;
  for (int a = 0; a < kActuatorCount; ++a) q[a] = actuators_[a].upper;
  return q;
}

JointState HandModel::mid_range() const { return 0.5 * (lower_limits() + upper_limits()); }

JointState HandModel::clamp(const JointState& q) const {
  return q.cwiseMax(lower_limits()).cwiseMin(upper_limits());
}

bool HandModel::within_limits(const JointState& q, double tol) const {
  for (int a = 0; a < kActuatorCount; ++a) {
    if (!(q[a] >= actuators_[a].lower - tol && q[a] <= actuators_[a].upper + tol)) return false;
  }
  return true;
}

HandModel HandModel::scaled(double factor) const {
  if (!(factor > 0.0)) throw InvalidArgument("scale factor must be positive");
  auto scale = [factor](const Pose& p) {
    return Pose(p.position() * factor, p.orientation(), p.frame());
  };
  auto fingers = fingers_;
  for (auto& f : fingers) {
    f.base = scale(f.base);
    f.tip = scale(f.tip);
    for (auto& j : f.joints) j.offset = scale(j.offset);
  }
  return HandModel(std::move(fingers), actuators_);
}

void forward_kinematics_with_jacobian(const HandModel& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& q,
                                      std::vector<Vec3>& tips, Eigen::MatrixXd& jacobian) {
  check_size(q);
  const auto& fingers = model.fingers();
  tips.resize(fingers.size());
  jacobian.setZero(3 * static_cast<Eigen::Index>(fingers.size()), kActuatorCount);

  struct AxisPoint {
    Vec3 axis;
    Vec3 origin;
    const JointSpec* joint;
  };
  std::vector<AxisPoint> axes;
  for (std::size_t f = 0; f < fingers.size(); ++f) {
    const auto& chain = fingers[f];
    axes.clear();
    Mat3 rot = chain.base.rotation();
    Vec3 pos = chain.base.position();
    for (const auto& joint : chain.joints) {
      pos += rot * joint.offset.position();
      rot = rot * joint.offset.rotation();
      axes.push_back({rot * joint.axis, pos, &joint});
      rot = rot * Eigen::AngleAxisd(joint_angle(joint, q), joint.axis).toRotationMatrix();
    }
    const Vec3 tip = pos + rot * chain.tip.position();
    tips[f] = tip;
    const auto row = 3 * static_cast<Eigen::Index>(f);
    for (const auto& ax : axes) {
      const Vec3 column = ax.axis.cross(tip - ax.origin);
      for (int a = 0; a < kActuatorCount; ++a) {
        const double ratio = ax.joint->drive[a];
        if (ratio != 0.0) jacobian.block<3, 1>(row, a) += ratio * column;
      }
    }
  }
}

std::vector<Vec3> forward_kinematics(const HandModel& model,
                                     const Eigen::Ref<const Eigen::VectorXd>& q) {
  std::vector<Vec3> tips;
  Eigen::MatrixXd jac;
  forward_kinematics_with_jacobian(model, q, tips, jac);
  return tips;
}

Eigen::MatrixXd fingertip_jacobian(const HandModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& q) {
  std::vector<Vec3> tips;
  Eigen::MatrixXd jac;
  forward_kinematics_with_jacobian(model, q, tips, jac);
  return jac;
}

}  // namespace h2r
