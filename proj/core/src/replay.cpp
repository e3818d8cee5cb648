#include "h2r/replay.hpp"

#include <algorithm>
#include <cmath>

#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

using detail::Json;

double box_excess(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d = std::max({d, lo(i) - p(i), p(i) - hi(i)});
  return d;
}

}  // namespace

void ReplayLimits::validate() const {
  if (!box_min.allFinite() || !box_max.allFinite() || (box_min.array() >= box_max.array()).any()) {
    throw InvalidArgument("replay limits: box_min must be below box_max on every axis");
  }
  if (!(vmax > 0.0) || !(wmax > 0.0) || !(jmax > 0.0)) {
    throw InvalidArgument("replay limits: vmax, wmax and jmax must be positive");
  }
}

std::string ReplayLimits::to_json() const {
  return detail::dump_json(Json{{"format", "h2r-replay-limits/1"},
                                {"note", "placeholder values, not measured on hardware"},
                                {"box_min", detail::vec_to_json(box_min)},
                                {"box_max", detail::vec_to_json(box_max)},
                                {"vmax", vmax},
                                {"wmax", wmax},
                                {"jmax", jmax}});
}

ReplayLimits ReplayLimits::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "replay limits");
  try {
    if (j.at("format").get<std::string>() != "h2r-replay-limits/1") {
      throw FormatError("replay limits: unsupported format");
    }
    ReplayLimits l;
    l.box_min = detail::vec_from_json(j.at("box_min"), "box_min");
    l.box_max = detail::vec_from_json(j.at("box_max"), "box_max");
    l.vmax = j.at("vmax").get<double>();
    l.wmax = j.at("wmax").get<double>();
    l.jmax = j.at("jmax").get<double>();
    l.validate();
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("replay limits: ") + e.what());
  }
}

ReplayLimits ReplayLimits::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kWorkspace: return "workspace";
    case ViolationKind::kLinearSpeed: return "linear_speed";
    case ViolationKind::kAngularSpeed: return "angular_speed";
    case ViolationKind::kJointSpeed: return "joint_speed";
    case ViolationKind::kJointLimit: return "joint_limit";
  }
  return "unknown";
}

SpeedProfile speed_profile(const Episode& episode) {
  if (!(episode.fps > 0.0) || !std::isfinite(episode.fps)) {
    throw InvalidArgument("replay: episode " + episode.id + " has fps <= 0");
  }
  const std::size_t n = episode.frames.size();
  if (n < 2) throw InvalidArgument("replay: episode " + episode.id + " has fewer than 2 frames");
  const double dt = 1.0 / episode.fps;
  SpeedProfile s;
  s.linear.resize(n);
  s.angular.resize(n);
  s.joint.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == n ? n - 1 : i + 1;
    const double span = static_cast<double>(b - a) * dt;
    const auto& fa = episode.frames[a];
    const auto& fb = episode.frames[b];
    s.linear[i] = (fb.wrist_pose.position() - fa.wrist_pose.position()).norm() / span;
    s.angular[i] = angle_between(fa.wrist_pose.orientation(), fb.wrist_pose.orientation()) / span;
    s.joint[i] = (fb.hand_joints - fa.hand_joints).cwiseAbs().maxCoeff() / span;
  }
  return s;
}

ReplayReport check_episode(const Episode& episode, const ReplayLimits& limits, const HandModel* model) {
  limits.validate();
  const SpeedProfile s = speed_profile(episode);
  ReplayReport r;
  r.episode_id = episode.id;
  r.n_frames = episode.frames.size();
  JointState lo = JointState::Zero(), hi = JointState::Zero();
  if (model) {
    lo = model->lower_limits();
    hi = model->upper_limits();
  }
  for (std::size_t i = 0; i < r.n_frames; ++i) {
    const auto& f = episode.frames[i];
    r.max_linear_speed = std::max(r.max_linear_speed, s.linear[i]);
    r.max_angular_speed = std::max(r.max_angular_speed, s.angular[i]);
    r.max_joint_speed = std::max(r.max_joint_speed, s.joint[i]);
    const double out = box_excess(f.wrist_pose.position(), limits.box_min, limits.box_max);
    if (out > 0.0) r.violations.push_back({ViolationKind::kWorkspace, i, out, 0.0});
    if (s.linear[i] > limits.vmax) r.violations.push_back({ViolationKind::kLinearSpeed, i, s.linear[i], limits.vmax});
    if (s.angular[i] > limits.wmax) {
      r.violations.push_back({ViolationKind::kAngularSpeed, i, s.angular[i], limits.wmax});
    }
    if (s.joint[i] > limits.jmax) r.violations.push_back({ViolationKind::kJointSpeed, i, s.joint[i], limits.jmax});
    if (model) {
      const double excess = std::max((lo - f.hand_joints).maxCoeff(), (f.hand_joints - hi).maxCoeff());
      if (excess > 1e-9) r.violations.push_back({ViolationKind::kJointLimit, i, excess, 0.0});
    }
  }
  return r;
}

std::vector<ReplayReport> check_episodes(const std::vector<Episode>& episodes, const ReplayLimits& limits,
                                         const HandModel* model, int threads) {
  std::vector<ReplayReport> out(episodes.size());
  parallel_for(episodes.size(), threads, [&](std::size_t i) { out[i] = check_episode(episodes[i], limits, model); });
  return out;
}

double ReconstructionReport::max_error() const {
  return std::max({max_position_error, max_rotation_error, max_joint_error});
}

ReconstructionReport chunk_reconstruction_check(const std::vector<TrainingSample>& samples, const Episode& episode,
                                                PoseMode expected, double tol) {
  const std::size_t n = episode.frames.size();
  if (n == 0) throw InvalidArgument("reconstruction: episode " + episode.id + " has no frames");
  ReconstructionReport rep;
  rep.mode = expected;
  double worst = -1.0;
  for (std::size_t si = 0; si < samples.size(); ++si) {
    const auto& s = samples[si];
    if (s.pose_mode != expected) {
      throw InvalidArgument("reconstruction: sample " + std::to_string(si) + " is in " +
                            std::string(to_string(s.pose_mode)) + " mode, expected " +
                            std::string(to_string(expected)));
    }
    if (s.episode_id != episode.id || s.t >= n || s.proprio.rows() < 1 ||
        s.pad_mask.size() != static_cast<std::size_t>(s.action.rows())) {
      throw ValidationError("reconstruction: sample " + std::to_string(si) + " does not belong to episode " +
                            episode.id);
    }
    const Pose current = pose_from_row(s.proprio.row(s.proprio.rows() - 1), Frame::kCamera);
    for (Eigen::Index k = 0; k < s.action.rows(); ++k) {
      const std::size_t src = std::min<std::size_t>(s.t + static_cast<std::size_t>(k) + 1, n - 1);
      const auto& f = episode.frames[src];
      const Pose stored = pose_from_row(s.action.row(k), expected == PoseMode::kRelative ? Frame::kWrist : Frame::kCamera);
      const Pose rebuilt = expected == PoseMode::kRelative ? compose(current, stored) : stored;
      ChunkError e;
      e.sample = si;
      e.row = static_cast<std::size_t>(k);
      e.position = (rebuilt.position() - f.wrist_pose.position()).norm();
      e.rotation = angle_between(rebuilt.orientation(), f.wrist_pose.orientation());
      e.joints = (s.action.row(k).tail<kActuatorCount>().transpose() - f.hand_joints).cwiseAbs().maxCoeff();
      if (s.pad_mask[static_cast<std::size_t>(k)]) {
        ++rep.padded_rows;
        rep.max_padded_error = std::max(rep.max_padded_error, e.position);
        continue;
      }
      ++rep.rows_checked;
      rep.max_position_error = std::max(rep.max_position_error, e.position);
      rep.max_rotation_error = std::max(rep.max_rotation_error, e.rotation);
      rep.max_joint_error = std::max(rep.max_joint_error, e.joints);
      const double m = std::max({e.position, e.rotation, e.joints});
      if (m > worst) {
        worst = m;
        rep.worst = e;
      }
      if (!(m < tol)) rep.over_tolerance.push_back(e);
    }
  }
  return rep;
}

}  // namespace h2r
