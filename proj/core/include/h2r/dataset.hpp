#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "h2r/calibration.hpp"
#include "h2r/geometry.hpp"
#include "h2r/kinematics.hpp"
#include "h2r/retarget.hpp"

namespace h2r {

enum class Domain { kHuman, kRobot };

std::string_view to_string(Domain domain);
Domain domain_from_string(std::string_view name);

using Keypoints = std::array<Vec3, kHandKeypoints>;

// One timestamped observation/action record. Named to avoid clashing with
// the coordinate-frame enum.
struct FrameRecord {
  double timestamp = 0.0;
  std::string image_ref;
  Pose wrist_pose = Pose::identity(Frame::kCamera);
  JointState hand_joints = JointState::Zero();
  std::optional<Keypoints> keypoints;  // camera frame, human episodes only
};

// Processing log carried with every episode.
struct Provenance {
  std::string source;  // session the episode came from
  std::string calibration_id;
  std::uint64_t retarget_config_hash = 0;
  std::size_t dropped_frames = 0;
  double slowdown_factor = 1.0;
  // Retargeting runs on the raw frames; joints are interpolated afterwards.
  std::string processing_order = "retarget-then-slowdown";
  std::vector<std::string> steps;

  bool operator==(const Provenance&) const = default;
};

struct Episode {
  std::string id;
  Domain domain = Domain::kHuman;
  std::string task_id;
  std::string instruction;
  std::string scene_tag;
  double fps = 10.0;
  int image_width = 0;  // source resolution of the referenced images
  int image_height = 0;
  std::vector<FrameRecord> frames;
  Provenance provenance;

  // Directory holding the files named by image_refs ("images/<file>").
  // Used when copying images into a dataset; not serialized.
  std::filesystem::path image_root;

  bool has_keypoints() const;
  // >= 2 frames, fps > 0, strictly increasing timestamps, finite values,
  // camera-frame wrist poses, consistent keypoint presence. When `model`
  // is given, joints must lie within its limits (1e-9 slack).
  void validate(const HandModel* model = nullptr) const;
};

struct IndexEntry {
  std::string id;
  Domain domain = Domain::kHuman;
  std::string task_id;
  std::size_t n_frames = 0;
  std::string path;  // episode directory relative to the dataset root
  std::uint64_t frames_checksum = 0;
};

struct DatasetIndex {
  std::vector<IndexEntry> episodes;  // sorted by id
  std::map<std::string, std::vector<std::string>> tasks;  // task -> instructions
  std::size_t n_human = 0;
  std::size_t n_robot = 0;

  // Recomputes counts and the task table from `episodes`.
  void recount();
  // Throws ValidationError when stored counts disagree with the entries.
  void check_counts() const;
  std::string to_json() const;
  static DatasetIndex from_json(const std::string& text);
  std::uint64_t hash() const;
};

// frames.bin encoding (see docs/FORMATS.md).
inline constexpr std::string_view kFramesMagic = "H2REP1";
inline constexpr std::uint32_t kFrameStrideBase = 14;
inline constexpr std::uint32_t kFrameStrideKeypoints = 14 + 3 * kHandKeypoints;

std::vector<std::byte> encode_frames(const Episode& episode);
// Fills timestamps, poses, joints and keypoints of `episode.frames`. Image
// refs are taken from `image_refs`, which must match the row count.
void decode_frames(std::span<const std::byte> bytes, const std::vector<std::string>& image_refs,
                   Episode& episode);
std::string encode_meta(const Episode& episode);
// Returns the episode without frames plus the image refs listed in meta.
Episode decode_meta(const std::string& text, std::vector<std::string>& image_refs);

void write_episode(const Episode& episode, const std::filesystem::path& episode_dir);
Episode read_episode(const std::filesystem::path& episode_dir);

// Writes episodes under out_dir/episodes/<id>/ and the merged index.
// Episodes already in out_dir with other ids are kept; same ids are
// replaced, so re-running an ingestion is idempotent.
DatasetIndex write_dataset(const std::vector<Episode>& episodes, const std::filesystem::path& out_dir);

class Dataset {
 public:
  // Reads and checks index.json; every episode directory must exist.
  static Dataset open(const std::filesystem::path& dir);

  const DatasetIndex& index() const { return index_; }
  const std::filesystem::path& root() const { return root_; }
  std::size_t size() const { return index_.episodes.size(); }
  // Loads one episode and verifies it against its index entry.
  Episode load(std::size_t i) const;

 private:
  std::filesystem::path root_;
  DatasetIndex index_;
};

// Accepts a dataset directory or a bare index file. A bare index is only
// count-checked; no episode files are required.
DatasetIndex read_index(const std::filesystem::path& path);

struct RejectedEpisode {
  std::string id;
  std::string reason;
};

struct IngestResult {
  std::vector<Episode> episodes;
  std::vector<RejectedEpisode> rejected;
};

inline constexpr double kMaxDroppedFraction = 0.20;

struct HumanIngestOptions {
  // When set, hand joints are retargeted from the keypoints; otherwise
  // joints stay at zero.
  const HandModel* model = nullptr;
  RetargetConfig retarget;
  int threads = 1;
};

// Raw human session: session.json plus one whitespace frame file per
// episode with VR-frame wrist poses and keypoints (see docs/FORMATS.md).
IngestResult ingest_human_raw(const std::filesystem::path& session_dir, const CalibrationResult& cal,
                              const HumanIngestOptions& options = {});

// Raw robot session with base-frame wrist poses. `base_to_camera` maps the
// robot base frame into the camera frame.
IngestResult ingest_robot_raw(const std::filesystem::path& session_dir, const Pose& base_to_camera,
                              int threads = 1);

Pose load_extrinsic(const std::filesystem::path& path);
void save_extrinsic(const Pose& base_to_camera, const std::filesystem::path& path);

}  // namespace h2r
