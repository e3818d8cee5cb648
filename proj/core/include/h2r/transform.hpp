#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "h2r/dataset.hpp"

namespace h2r {

// pos(3) + rot6d(6) + joints(6)
inline constexpr int kStateDim = 15;

enum class PoseMode { kRelative, kAbsolute };

std::string_view to_string(PoseMode mode);
PoseMode pose_mode_from_string(std::string_view name);

struct ChunkSpec {
  int t_p = 2;
  int t_a = 16;
  double fps = 10.0;
  PoseMode pose_mode = PoseMode::kRelative;
  double slowdown = 2.25;  // human episodes only

  void validate() const;
};

using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, kStateDim, Eigen::RowMajor>;

struct TrainingSample {
  std::string episode_id;
  std::uint32_t t = 0;  // frame index of the current observation
  std::string image_ref;
  StateMatrix proprio;  // t_p rows, oldest first, absolute camera frame
  StateMatrix action;   // t_a rows for t+1 .. t+t_a
  std::vector<std::uint8_t> pad_mask;  // 1 where the action row repeats the final frame
  std::string task_id;
  Domain domain = Domain::kHuman;
  std::string instruction;
  PoseMode pose_mode = PoseMode::kRelative;

  bool operator==(const TrainingSample&) const = default;
};

// Row layout shared by proprio and action rows.
Eigen::Matrix<double, 1, kStateDim> state_row(const Pose& pose, const JointState& joints);
// Inverse of the pose part of a state row; the pose is tagged `frame`.
Pose pose_from_row(const Eigen::Ref<const Eigen::Matrix<double, 1, kStateDim>>& row, Frame frame);

// Stretches the episode in time by `factor` at the same fps:
// N' = round((N-1)·factor) + 1 frames, sampled uniformly over the original
// time span; positions, joints and keypoints are interpolated linearly and
// orientations by slerp. Endpoints are preserved exactly and factor 1
// returns the input unchanged. Throws for robot episodes, factor < 1 or
// fewer than 2 frames.
Episode slow_down(const Episode& episode, double factor);

// Applies the slowdown to human episodes and passes robot episodes through.
Episode process_episode(const Episode& episode, const ChunkSpec& spec);

// One sample per frame. History indices clamp at frame 0; action rows past
// the last frame repeat it and are flagged in pad_mask.
std::vector<TrainingSample> make_samples(const Episode& episode, const ChunkSpec& spec);

// Center crop to 640x480 followed by a bilinear resize to 224x224.
struct CropResize {
  int src_width = 0;
  int src_height = 0;
  int crop_x = 0;
  int crop_y = 0;
  int crop_width = 640;
  int crop_height = 480;
  int out_width = 224;
  int out_height = 224;

  // Continuous source coordinate sampled for output pixel (u, v), using
  // pixel centers (align_corners = false).
  Eigen::Vector2d source_coordinate(int u, int v) const;
};

CropResize crop_resize_spec(int src_width, int src_height);

// Single-channel row-major image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Bilinear resize with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& src, int out_width, int out_height);
Image apply_crop_resize(const Image& src, const CropResize& spec);

// H2RSMP1 shards: one file per episode plus samples/index.json.
std::vector<std::byte> encode_samples(const std::vector<TrainingSample>& samples, const ChunkSpec& spec);
std::vector<TrainingSample> decode_samples(std::span<const std::byte> bytes, ChunkSpec* spec = nullptr);

struct SampleShard {
  std::string file;
  std::string episode_id;
  Domain domain = Domain::kHuman;
  std::size_t n_samples = 0;
  std::uint64_t checksum = 0;
};

struct SampleIndex {
  ChunkSpec spec;
  std::vector<SampleShard> shards;
  std::uint64_t source_index_hash = 0;
  std::vector<std::pair<std::string, CropResize>> crops;  // per episode id

  std::string to_json() const;
  static SampleIndex from_json(const std::string& text);
};

// Processes every dataset episode and writes shards under out_dir.
SampleIndex export_samples(const Dataset& dataset, const ChunkSpec& spec,
                           const std::filesystem::path& out_dir, int threads = 1);

struct SampleSet {
  SampleIndex index;
  std::vector<TrainingSample> samples;  // shard order
};

SampleSet read_samples(const std::filesystem::path& dir);

}  // namespace h2r
