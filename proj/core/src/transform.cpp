#include "h2r/transform.hpp"

#include <algorithm>
#include <cmath>

#include "h2r/error.hpp"
#include "h2r/util.hpp"

namespace h2r {

std::string_view to_string(PoseMode mode) {
  return mode == PoseMode::kRelative ? "relative" : "absolute";
}

PoseMode pose_mode_from_string(std::string_view name) {
  if (name == "relative") return PoseMode::kRelative;
  if (name == "absolute") return PoseMode::kAbsolute;
  throw InvalidArgument("unknown pose mode '" + std::string(name) + "'");
}

void ChunkSpec::validate() const {
  if (t_p < 1) throw InvalidArgument("chunk spec: t_p must be >= 1");
  if (t_a < 1) throw InvalidArgument("chunk spec: t_a must be >= 1");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidArgument("chunk spec: fps must be > 0");
  if (!(slowdown >= 1.0) || !std::isfinite(slowdown)) {
    throw InvalidArgument("chunk spec: slowdown must be >= 1");
  }
}

Eigen::Matrix<double, 1, kStateDim> state_row(const Pose& pose, const JointState& joints) {
  Eigen::Matrix<double, 1, kStateDim> row;
  row.segment<3>(0) = pose.position().transpose();
  const Rot6D r = encode_rot6d(pose.orientation());
  for (int i = 0; i < 6; ++i) row(3 + i) = r[static_cast<std::size_t>(i)];
  row.segment<kActuatorCount>(9) = joints.transpose();
  return row;
}

Pose pose_from_row(const Eigen::Ref<const Eigen::Matrix<double, 1, kStateDim>>& row, Frame frame) {
  Rot6D r;
  for (int i = 0; i < 6; ++i) r[static_cast<std::size_t>(i)] = row(3 + i);
  return Pose(row.segment<3>(0).transpose(), decode_rot6d(r), frame);
}

Episode slow_down(const Episode& episode, double factor) {
  if (episode.domain != Domain::kHuman) {
    throw InvalidArgument("slow_down: episode " + episode.id + " is not a human episode");
  }
  if (!(factor >= 1.0) || !std::isfinite(factor)) throw InvalidArgument("slow_down: factor must be >= 1");
  const std::size_t n = episode.frames.size();
  if (n < 2) throw InvalidArgument("slow_down: episode " + episode.id + " has fewer than 2 frames");
  if (factor == 1.0) return episode;

  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n - 1) * factor)) + 1;
  const double t0 = episode.frames.front().timestamp;
  const double t1 = episode.frames.back().timestamp;

  Episode out = episode;
  out.frames.clear();
  out.frames.reserve(n_out);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n_out; ++i) {
    const bool last = i + 1 == n_out;
    const double tau = last ? t1 : t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n_out - 1);
    while (j + 2 < n && episode.frames[j + 1].timestamp <= tau) ++j;
    const auto& a = episode.frames[j];
    const auto& b = episode.frames[j + 1];
    double s = last ? 1.0 : (tau - a.timestamp) / (b.timestamp - a.timestamp);
    s = std::clamp(s, 0.0, 1.0);

    FrameRecord f;
    f.timestamp = t0 + static_cast<double>(i) / episode.fps;
    f.image_ref = s < 0.5 ? a.image_ref : b.image_ref;
    f.wrist_pose = slerp(a.wrist_pose, b.wrist_pose, s);
    if (s == 0.0) {
      f.hand_joints = a.hand_joints;
      f.keypoints = a.keypoints;
    } else if (s == 1.0) {
      f.hand_joints = b.hand_joints;
      f.keypoints = b.keypoints;
    } else {
      f.hand_joints = a.hand_joints + s * (b.hand_joints - a.hand_joints);
      if (a.keypoints) {
        Keypoints k;
        for (int m = 0; m < kHandKeypoints; ++m) {
          k[m] = (*a.keypoints)[m] + s * ((*b.keypoints)[m] - (*a.keypoints)[m]);
        }
        f.keypoints = k;
      }
    }
    out.frames.push_back(std::move(f));
  }
  out.provenance.slowdown_factor = episode.provenance.slowdown_factor * factor;
  out.provenance.steps.push_back("slowdown:" + format_double(factor));
  return out;
}

Episode process_episode(const Episode& episode, const ChunkSpec& spec) {
  spec.validate();
  if (episode.domain == Domain::kRobot) return episode;
  return slow_down(episode, spec.slowdown);
}

std::vector<TrainingSample> make_samples(const Episode& episode, const ChunkSpec& spec) {
  spec.validate();
  episode.validate();
  const auto n = static_cast<long>(episode.frames.size());
  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long t = 0; t < n; ++t) {
    const auto& cur = episode.frames[static_cast<std::size_t>(t)];
    TrainingSample s;
    s.episode_id = episode.id;
    s.t = static_cast<std::uint32_t>(t);
    s.image_ref = cur.image_ref;
    s.task_id = episode.task_id;
    s.domain = episode.domain;
    s.instruction = episode.instruction;
    s.pose_mode = spec.pose_mode;

    s.proprio.resize(spec.t_p, kStateDim);
    for (int h = 0; h < spec.t_p; ++h) {
      const long idx = std::max(0L, t - (spec.t_p - 1) + h);
      const auto& f = episode.frames[static_cast<std::size_t>(idx)];
      s.proprio.row(h) = state_row(f.wrist_pose, f.hand_joints);
    }
    s.action.resize(spec.t_a, kStateDim);
    s.pad_mask.assign(static_cast<std::size_t>(spec.t_a), 0);
    for (int k = 1; k <= spec.t_a; ++k) {
      long idx = t + k;
      if (idx > n - 1) {
        idx = n - 1;
        s.pad_mask[static_cast<std::size_t>(k - 1)] = 1;
      }
      const auto& f = episode.frames[static_cast<std::size_t>(idx)];
      const Pose wrist = spec.pose_mode == PoseMode::kRelative ? relative(cur.wrist_pose, f.wrist_pose)
                                                               : f.wrist_pose;
      s.action.row(k - 1) = state_row(wrist, f.hand_joints);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Eigen::Vector2d CropResize::source_coordinate(int u, int v) const {
  const double sx = static_cast<double>(crop_width) / out_width;
  const double sy = static_cast<double>(crop_height) / out_height;
  return {crop_x + (u + 0.5) * sx - 0.5, crop_y + (v + 0.5) * sy - 0.5};
}

CropResize crop_resize_spec(int src_width, int src_height) {
  CropResize c;
  if (src_width < c.crop_width || src_height < c.crop_height) {
    throw InvalidArgument("crop_resize_spec: source " + std::to_string(src_width) + "x" +
                          std::to_string(src_height) + " is smaller than the 640x480 crop");
  }
  c.src_width = src_width;
  c.src_height = src_height;
  c.crop_x = (src_width - c.crop_width) / 2;
  c.crop_y = (src_height - c.crop_height) / 2;
  return c;
}

Image resize_bilinear(const Image& src, int out_width, int out_height) {
  if (src.width <= 0 || src.height <= 0 ||
      src.pixels.size() != static_cast<std::size_t>(src.width) * static_cast<std::size_t>(src.height)) {
    throw InvalidArgument("resize_bilinear: malformed source image");
  }
  if (out_width <= 0 || out_height <= 0) throw InvalidArgument("resize_bilinear: empty output");
  Image out{out_width, out_height, std::vector<double>(static_cast<std::size_t>(out_width) * out_height)};
  const double sx = static_cast<double>(src.width) / out_width;
  const double sy = static_cast<double>(src.height) / out_height;
  for (int v = 0; v < out_height; ++v) {
    const double y = std::clamp((v + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = y - y0;
    for (int u = 0; u < out_width; ++u) {
      const double x = std::clamp((u + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = x - x0;
      const double top = src.at(x0, y0) + fx * (src.at(x1, y0) - src.at(x0, y0));
      const double bottom = src.at(x0, y1) + fx * (src.at(x1, y1) - src.at(x0, y1));
      out.pixels[static_cast<std::size_t>(v) * out_width + u] = top + fy * (bottom - top);
    }
  }
  return out;
}

Image apply_crop_resize(const Image& src, const CropResize& spec) {
  if (src.width != spec.src_width || src.height != spec.src_height) {
    throw InvalidArgument("apply_crop_resize: image size differs from the crop record");
  }
  Image crop{spec.crop_width, spec.crop_height,
             std::vector<double>(static_cast<std::size_t>(spec.crop_width) * spec.crop_height)};
  for (int y = 0; y < spec.crop_height; ++y) {
    for (int x = 0; x < spec.crop_width; ++x) {
      crop.pixels[static_cast<std::size_t>(y) * spec.crop_width + x] = src.at(spec.crop_x + x, spec.crop_y + y);
    }
  }
  return resize_bilinear(crop, spec.out_width, spec.out_height);
}

}  // namespace h2r
