#include "h2r/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

namespace fs = std::filesystem;
using detail::Json;

constexpr std::size_t kMagicBytes = 8;
constexpr std::uint32_t kFlagKeypoints = 1u;
constexpr std::size_t kHeaderBytes = kMagicBytes + 4 + 4 + 8 + 8;

void check_id(const std::string& id) {
  if (id.empty() || id.front() == '.') throw ValidationError("invalid episode id '" + id + "'");
  for (const char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) throw ValidationError("invalid character in episode id '" + id + "'");
  }
}

}  // namespace

std::string_view to_string(Domain domain) {
  return domain == Domain::kHuman ? "human" : "robot";
}

Domain domain_from_string(std::string_view name) {
  if (name == "human") return Domain::kHuman;
  if (name == "robot") return Domain::kRobot;
  throw InvalidArgument("unknown domain '" + std::string(name) + "'");
}

bool Episode::has_keypoints() const {
  return !frames.empty() && frames.front().keypoints.has_value();
}

void Episode::validate(const HandModel* model) const {
  check_id(id);
  const std::string where = "episode " + id + ": ";
  if (frames.size() < 2) throw ValidationError(where + "needs at least 2 frames");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError(where + "fps must be positive");
  const bool kp = has_keypoints();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const std::string at = where + "frame " + std::to_string(i) + ": ";
    if (!std::isfinite(f.timestamp)) throw ValidationError(at + "non-finite timestamp");
    if (i > 0 && !(f.timestamp > frames[i - 1].timestamp)) {
      throw ValidationError(at + "timestamp " + format_double(f.timestamp) +
                            " is not after the previous frame");
    }
    if (f.wrist_pose.frame() != Frame::kCamera) {
      throw ValidationError(at + "wrist pose tagged '" + std::string(to_string(f.wrist_pose.frame())) +
                            "', expected camera");
    }
    if (!f.wrist_pose.position().allFinite() || !f.hand_joints.allFinite()) {
      throw ValidationError(at + "non-finite pose or joints");
    }
    if (f.keypoints.has_value() != kp) throw ValidationError(at + "inconsistent keypoint presence");
    if (kp) {
      for (const auto& k : *f.keypoints) {
        if (!k.allFinite()) throw ValidationError(at + "non-finite keypoint");
      }
    }
    if (model != nullptr && !model->within_limits(f.hand_joints, 1e-9)) {
      throw ValidationError(at + "hand joints outside model limits");
    }
  }
}

void DatasetIndex::recount() {
  std::sort(episodes.begin(), episodes.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
  n_human = 0;
  n_robot = 0;
  for (const auto& e : episodes) (e.domain == Domain::kHuman ? n_human : n_robot) += 1;
  for (const auto& e : episodes) tasks.try_emplace(e.task_id);
  for (auto it = tasks.begin(); it != tasks.end();) {
    const bool used = std::any_of(episodes.begin(), episodes.end(),
                                  [&](const IndexEntry& e) { return e.task_id == it->first; });
    it = used ? std::next(it) : tasks.erase(it);
  }
}

void DatasetIndex::check_counts() const {
  std::size_t h = 0, r = 0;
  std::set<std::string> ids;
  for (const auto& e : episodes) {
    (e.domain == Domain::kHuman ? h : r) += 1;
    if (!ids.insert(e.id).second) throw ValidationError("index: duplicate episode id '" + e.id + "'");
  }
  if (h != n_human || r != n_robot) {
    throw ValidationError("index: stored counts (" + std::to_string(n_human) + ", " +
                          std::to_string(n_robot) + ") disagree with episodes (" + std::to_string(h) +
                          ", " + std::to_string(r) + ")");
  }
}

std::string DatasetIndex::to_json() const {
  Json eps = Json::array();
  for (const auto& e : episodes) {
    eps.push_back(Json{{"id", e.id},
                       {"domain", std::string(to_string(e.domain))},
                       {"task", e.task_id},
                       {"n_frames", e.n_frames},
                       {"path", e.path},
                       {"frames_checksum", hex64(e.frames_checksum)}});
  }
  Json task_table = Json::object();
  for (const auto& [task, instructions] : tasks) task_table[task] = instructions;
  const Json j{{"format", "h2r-index/1"},
               {"relative_pose_convention", "base_inverse_target"},
               {"counts", Json{{"human", n_human}, {"robot", n_robot}}},
               {"tasks", task_table},
               {"episodes", eps}};
  return detail::dump_json(j);
}

DatasetIndex DatasetIndex::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "dataset index");
  try {
    if (j.at("format").get<std::string>() != "h2r-index/1") {
      throw FormatError("dataset index: unsupported format '" + j.at("format").get<std::string>() + "'");
    }
    DatasetIndex idx;
    idx.n_human = j.at("counts").at("human").get<std::size_t>();
    idx.n_robot = j.at("counts").at("robot").get<std::size_t>();
    for (const auto& [task, list] : j.at("tasks").items()) {
      idx.tasks[task] = list.get<std::vector<std::string>>();
    }
    for (const auto& e : j.at("episodes")) {
      idx.episodes.push_back({e.at("id").get<std::string>(),
                              domain_from_string(e.at("domain").get<std::string>()),
                              e.at("task").get<std::string>(), e.at("n_frames").get<std::size_t>(),
                              e.at("path").get<std::string>(),
                              parse_hex64(e.at("frames_checksum").get<std::string>())});
    }
    idx.check_counts();
    return idx;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset index: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("dataset index: ") + e.what());
  }
}

std::uint64_t DatasetIndex::hash() const { return fnv1a64(to_json()); }

std::vector<std::byte> encode_frames(const Episode& episode) {
  const bool kp = episode.has_keypoints();
  const std::uint32_t stride = kp ? kFrameStrideKeypoints : kFrameStrideBase;
  ByteWriter rows;
  for (const auto& f : episode.frames) {
    if (f.keypoints.has_value() != kp) throw ValidationError("encode_frames: mixed keypoint presence");
    rows.put_f64(f.timestamp);
    const auto& p = f.wrist_pose.position();
    const auto& q = f.wrist_pose.orientation();
    for (int i = 0; i < 3; ++i) rows.put_f64(p[i]);
    rows.put_f64(q.w());
    rows.put_f64(q.x());
    rows.put_f64(q.y());
    rows.put_f64(q.z());
    for (int i = 0; i < kActuatorCount; ++i) rows.put_f64(f.hand_joints[i]);
    if (kp) {
      for (const auto& k : *f.keypoints) {
        for (int i = 0; i < 3; ++i) rows.put_f64(k[i]);
      }
    }
  }
  ByteWriter out;
  std::string magic(kFramesMagic);
  magic.resize(kMagicBytes, '\0');
  out.put_raw(magic);
  out.put_u32(stride);
  out.put_u32(kp ? kFlagKeypoints : 0u);
  out.put_u64(episode.frames.size());
  out.put_u64(fnv1a64(rows.bytes()));
  out.put_bytes(rows.bytes());
  return out.take();
}

void decode_frames(std::span<const std::byte> bytes, const std::vector<std::string>& image_refs,
                   Episode& episode) {
  if (bytes.size() < kHeaderBytes) throw FormatError("frames.bin: truncated header");
  ByteReader r(bytes);
  const auto magic = r.get_bytes(kMagicBytes);
  std::string expected(kFramesMagic);
  expected.resize(kMagicBytes, '\0');
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::byte*>(expected.data()))) {
    throw FormatError("frames.bin: bad magic or unsupported version");
  }
  const std::uint32_t stride = r.get_u32();
  const std::uint32_t flags = r.get_u32();
  const std::uint64_t n = r.get_u64();
  const std::uint64_t checksum = r.get_u64();
  const bool kp = (flags & kFlagKeypoints) != 0;
  if ((flags & ~kFlagKeypoints) != 0) throw FormatError("frames.bin: unknown flags");
  if (stride != (kp ? kFrameStrideKeypoints : kFrameStrideBase)) {
    throw FormatError("frames.bin: row stride " + std::to_string(stride) + " does not match flags");
  }
  if (r.remaining() != n * stride * sizeof(double)) {
    throw FormatError("frames.bin: expected " + std::to_string(n) + " rows, payload is truncated or oversized");
  }
  if (fnv1a64(bytes.subspan(kHeaderBytes)) != checksum) throw FormatError("frames.bin: checksum mismatch");
  if (image_refs.size() != n) throw FormatError("frames.bin: row count differs from meta image_refs");

  episode.frames.clear();
  episode.frames.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    FrameRecord f;
    f.timestamp = r.get_f64();
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = r.get_f64();
    const double w = r.get_f64(), x = r.get_f64(), y = r.get_f64(), z = r.get_f64();
    f.wrist_pose = Pose(p, Quat(w, x, y, z), Frame::kCamera);
    for (int k = 0; k < kActuatorCount; ++k) f.hand_joints[k] = r.get_f64();
    if (kp) {
      Keypoints pts;
      for (auto& pt : pts) {
        for (int k = 0; k < 3; ++k) pt[k] = r.get_f64();
      }
      f.keypoints = pts;
    }
    f.image_ref = image_refs[i];
    episode.frames.push_back(std::move(f));
  }
}

std::string encode_meta(const Episode& e) {
  Json refs = Json::array();
  for (const auto& f : e.frames) refs.push_back(f.image_ref);
  const auto& p = e.provenance;
  const Json j{{"format", "h2r-episode/1"},
               {"id", e.id},
               {"domain", std::string(to_string(e.domain))},
               {"task", e.task_id},
               {"instruction", e.instruction},
               {"scene", e.scene_tag},
               {"fps", e.fps},
               {"image_size", Json::array({e.image_width, e.image_height})},
               {"pose_frame", "camera"},
               {"relative_pose_convention", "base_inverse_target"},
               {"provenance",
                Json{{"source", p.source},
                     {"calibration_id", p.calibration_id},
                     {"retarget_config_hash", hex64(p.retarget_config_hash)},
                     {"dropped_frames", p.dropped_frames},
                     {"slowdown_factor", p.slowdown_factor},
                     {"processing_order", p.processing_order},
                     {"steps", p.steps}}},
               {"image_refs", refs}};
  return detail::dump_json(j);
}

Episode decode_meta(const std::string& text, std::vector<std::string>& image_refs) {
  const Json j = detail::parse_json(text, "episode meta");
  try {
    if (j.at("format").get<std::string>() != "h2r-episode/1") {
      throw FormatError("episode meta: unsupported format '" + j.at("format").get<std::string>() + "'");
    }
    if (j.at("pose_frame").get<std::string>() != "camera") {
      throw FormatError("episode meta: only camera-frame episodes are stored");
    }
    Episode e;
    e.id = j.at("id").get<std::string>();
    e.domain = domain_from_string(j.at("domain").get<std::string>());
    e.task_id = j.at("task").get<std::string>();
    e.instruction = j.at("instruction").get<std::string>();
    e.scene_tag = j.at("scene").get<std::string>();
    e.fps = j.at("fps").get<double>();
    const auto& size = j.at("image_size");
    e.image_width = size.at(0).get<int>();
    e.image_height = size.at(1).get<int>();
    const auto& p = j.at("provenance");
    e.provenance.source = p.at("source").get<std::string>();
    e.provenance.calibration_id = p.at("calibration_id").get<std::string>();
    e.provenance.retarget_config_hash = parse_hex64(p.at("retarget_config_hash").get<std::string>());
    e.provenance.dropped_frames = p.at("dropped_frames").get<std::size_t>();
    e.provenance.slowdown_factor = p.at("slowdown_factor").get<double>();
    e.provenance.processing_order = p.at("processing_order").get<std::string>();
    e.provenance.steps = p.at("steps").get<std::vector<std::string>>();
    image_refs = j.at("image_refs").get<std::vector<std::string>>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("episode meta: ") + ex.what());
  } catch (const InvalidArgument& ex) {
    throw FormatError(std::string("episode meta: ") + ex.what());
  }
}

void write_episode(const Episode& episode, const fs::path& episode_dir) {
  episode.validate();
  fs::create_directories(episode_dir);
  if (!episode.image_root.empty()) {
    std::set<std::string> copied;
    for (const auto& f : episode.frames) {
      if (f.image_ref.empty() || !copied.insert(f.image_ref).second) continue;
      const fs::path ref(f.image_ref);
      if (ref.parent_path() != "images") {
        throw ValidationError("episode " + episode.id + ": image ref '" + f.image_ref +
                              "' must have the form images/<file>");
      }
      const fs::path src = episode.image_root / ref.filename();
      const fs::path dst = episode_dir / f.image_ref;
      if (!fs::exists(src)) {
        throw ValidationError("episode " + episode.id + ": referenced image '" + src.string() + "' is missing");
      }
      if (fs::exists(dst) && fs::equivalent(src, dst)) continue;
      write_binary_file(dst, read_binary_file(src));
    }
  }
  write_binary_file(episode_dir / "frames.bin", encode_frames(episode));
  write_text_file(episode_dir / "meta.json", encode_meta(episode));
}

Episode read_episode(const fs::path& episode_dir) {
  std::vector<std::string> refs;
  Episode e = decode_meta(read_text_file(episode_dir / "meta.json"), refs);
  decode_frames(read_binary_file(episode_dir / "frames.bin"), refs, e);
  e.image_root = episode_dir / "images";
  e.validate();
  return e;
}

DatasetIndex write_dataset(const std::vector<Episode>& episodes, const fs::path& out_dir) {
  DatasetIndex index;
  if (fs::exists(out_dir / "index.json")) index = Dataset::open(out_dir).index();

  std::set<std::string> seen;
  for (const auto& e : episodes) {
    e.validate();
    if (!seen.insert(e.id).second) throw ValidationError("write_dataset: duplicate episode id '" + e.id + "'");
  }
  for (const auto& e : episodes) {
    const std::string rel = "episodes/" + e.id;
    const fs::path dir = out_dir / rel;
    if (fs::exists(dir)) {
      // Keep the previous copy's images readable when they are the source.
      if (!e.image_root.empty() && fs::exists(e.image_root) && fs::equivalent(e.image_root, dir / "images")) {
        write_episode(e, dir);
      } else {
        fs::remove_all(dir);
        write_episode(e, dir);
      }
    } else {
      write_episode(e, dir);
    }
    const auto bytes = read_binary_file(dir / "frames.bin");
    IndexEntry entry{e.id, e.domain, e.task_id, e.frames.size(), rel, fnv1a64(bytes)};
    std::erase_if(index.episodes, [&](const IndexEntry& x) { return x.id == e.id; });
    index.episodes.push_back(entry);
    auto& list = index.tasks[e.task_id];
    if (!e.instruction.empty() && std::find(list.begin(), list.end(), e.instruction) == list.end()) {
      list.push_back(e.instruction);
      std::sort(list.begin(), list.end());
    }
  }
  index.recount();
  write_text_file(out_dir / "index.json", index.to_json());
  return index;
}

Dataset Dataset::open(const fs::path& dir) {
  Dataset d;
  d.root_ = dir;
  d.index_ = DatasetIndex::from_json(read_text_file(dir / "index.json"));
  for (const auto& e : d.index_.episodes) {
    if (!fs::exists(dir / e.path / "frames.bin") || !fs::exists(dir / e.path / "meta.json")) {
      throw ValidationError("dataset: episode '" + e.id + "' is missing files under " + (dir / e.path).string());
    }
  }
  return d;
}

Episode Dataset::load(std::size_t i) const {
  if (i >= index_.episodes.size()) throw InvalidArgument("dataset: episode index out of range");
  const auto& entry = index_.episodes[i];
  const fs::path dir = root_ / entry.path;
  const auto bytes = read_binary_file(dir / "frames.bin");
  if (fnv1a64(bytes) != entry.frames_checksum) {
    throw FormatError("dataset: frames.bin checksum for '" + entry.id + "' differs from the index");
  }
  std::vector<std::string> refs;
  Episode e = decode_meta(read_text_file(dir / "meta.json"), refs);
  decode_frames(bytes, refs, e);
  e.image_root = dir / "images";
  if (e.id != entry.id || e.domain != entry.domain || e.task_id != entry.task_id ||
      e.frames.size() != entry.n_frames) {
    throw ValidationError("dataset: episode '" + entry.id + "' disagrees with its index entry");
  }
  e.validate();
  return e;
}

DatasetIndex read_index(const fs::path& path) {
  if (fs::is_directory(path)) return Dataset::open(path).index();
  return DatasetIndex::from_json(read_text_file(path));
}

}  // namespace h2r
