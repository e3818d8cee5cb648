#include <cmath>
#include <sstream>

#include "h2r/dataset.hpp"
#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

namespace fs = std::filesystem;
using detail::Json;

struct SessionEpisode {
  std::string id;
  std::string task;
  std::string instruction;
  std::string scene;
  std::string frames_file;
};

struct Session {
  std::string id;
  double fps = 0.0;
  int image_width = 0;
  int image_height = 0;
  std::vector<SessionEpisode> episodes;
};

Session read_session(const fs::path& dir, const std::string& format) {
  const fs::path file = dir / "session.json";
  if (!fs::exists(file)) throw FormatError("session: " + file.string() + " not found");
  const Json j = detail::parse_json(read_text_file(file), file.string());
  try {
    if (j.at("format").get<std::string>() != format) {
      throw FormatError(file.string() + ": expected format '" + format + "'");
    }
    Session s;
    s.id = j.at("id").get<std::string>();
    s.fps = j.at("fps").get<double>();
    if (!(s.fps > 0.0)) throw FormatError(file.string() + ": fps must be positive");
    s.image_width = j.at("image_size").at(0).get<int>();
    s.image_height = j.at("image_size").at(1).get<int>();
    for (const auto& e : j.at("episodes")) {
      s.episodes.push_back({e.at("id").get<std::string>(), e.at("task").get<std::string>(),
                            e.value("instruction", std::string()), e.value("scene", std::string()),
                            e.at("frames").get<std::string>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

// Whitespace-separated rows; '#' starts a comment. Returns (line number, tokens).
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_rows(const fs::path& file,
                                                                         std::size_t n_tokens) {
  std::istringstream in(read_text_file(file));
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(std::move(t));
    if (tokens.empty()) continue;
    if (tokens.size() != n_tokens) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(n_tokens) + " fields, got " + std::to_string(tokens.size()));
    }
    rows.emplace_back(line_no, std::move(tokens));
  }
  return rows;
}

double number(const fs::path& file, std::size_t line, const std::string& token) {
  try {
    return parse_double(token);
  } catch (const Error&) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": bad number '" + token + "'");
  }
}

// Raw image paths are session-relative; episodes store "images/<name>" and
// remember the source directory for copying.
void assign_images(Episode& ep, const std::vector<std::string>& raw_refs, const fs::path& session_dir) {
  std::optional<fs::path> dir;
  for (std::size_t i = 0; i < raw_refs.size(); ++i) {
    if (raw_refs[i] == "-") continue;
    const fs::path p(raw_refs[i]);
    if (p.is_absolute() || p.filename().empty()) {
      throw FormatError("episode " + ep.id + ": image path '" + raw_refs[i] + "' must be session-relative");
    }
    if (dir && *dir != p.parent_path()) {
      throw FormatError("episode " + ep.id + ": all images of an episode must share one directory");
    }
    dir = p.parent_path();
    ep.frames[i].image_ref = "images/" + p.filename().string();
  }
  if (dir) ep.image_root = session_dir / *dir;
}

void check_monotonic(const std::string& id, const std::vector<double>& times,
                     const std::vector<std::size_t>& raw_index) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw ValidationError("episode " + id + ": timestamps not strictly increasing at frame " +
                            std::to_string(raw_index[i]) + " (" + format_double(times[i]) +
                            " after " + format_double(times[i - 1]) + ")");
    }
  }
}

}  // namespace

IngestResult ingest_human_raw(const fs::path& session_dir, const CalibrationResult& cal,
                              const HumanIngestOptions& options) {
  const Session s = read_session(session_dir, "h2r-human-session/1");
  if (options.model != nullptr) options.retarget.validate(*options.model);

  std::vector<std::optional<Episode>> built(s.episodes.size());
  std::vector<std::string> reasons(s.episodes.size());
  parallel_for(s.episodes.size(), options.threads, [&](std::size_t e) {
    const auto& se = s.episodes[e];
    const fs::path file = session_dir / se.frames_file;
    const auto rows = read_rows(file, 2 + 7 + 3 * kHandKeypoints);

    Episode ep;
    ep.id = se.id;
    ep.domain = Domain::kHuman;
    ep.task_id = se.task;
    ep.instruction = se.instruction;
    ep.scene_tag = se.scene;
    ep.fps = s.fps;
    ep.image_width = s.image_width;
    ep.image_height = s.image_height;
    ep.provenance.source = s.id;
    ep.provenance.calibration_id = cal.id;

    std::vector<std::string> raw_refs;
    std::vector<double> times;
    std::vector<std::size_t> raw_index;
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& [line, tok] = rows[r];
      std::vector<double> v(tok.size());
      for (std::size_t k = 0; k < tok.size(); ++k) {
        if (k != 1) v[k] = number(file, line, tok[k]);
      }
      bool tracked = std::isfinite(v[0]);
      for (std::size_t k = 2; k < v.size(); ++k) tracked = tracked && std::isfinite(v[k]);
      if (!tracked) {
        ++dropped;
        continue;
      }
      HumanHand hand;
      hand.wrist_pose = Pose(Vec3(v[2], v[3], v[4]), Quat(v[5], v[6], v[7], v[8]), Frame::kVr);
      for (int k = 0; k < kHandKeypoints; ++k) {
        hand.keypoints[k] = Vec3(v[9 + 3 * k], v[10 + 3 * k], v[11 + 3 * k]);
      }
      const HumanHand cam = apply_calibration(cal, hand);
      FrameRecord f;
      f.timestamp = v[0];
      f.wrist_pose = cam.wrist_pose;
      f.keypoints = cam.keypoints;
      ep.frames.push_back(std::move(f));
      raw_refs.push_back(tok[1]);
      times.push_back(v[0]);
      raw_index.push_back(r);
    }
    ep.provenance.dropped_frames = dropped;
    ep.provenance.steps.push_back("ingest-human");
    ep.provenance.steps.push_back("calibrate:" + cal.id);

    if (rows.empty() || static_cast<double>(dropped) > kMaxDroppedFraction * static_cast<double>(rows.size())) {
      reasons[e] = std::to_string(dropped) + " of " + std::to_string(rows.size()) +
                   " frames lack hand tracking (limit " + format_double(100.0 * kMaxDroppedFraction) + "%)";
      return;
    }
    check_monotonic(ep.id, times, raw_index);
    assign_images(ep, raw_refs, session_dir);

    if (options.model != nullptr) {
      std::vector<HumanHand> local;
      local.reserve(ep.frames.size());
      for (const auto& f : ep.frames) {
        HumanHand h;
        h.wrist_pose = f.wrist_pose;
        h.keypoints = *f.keypoints;
        local.push_back(h.to_wrist_local());
      }
      const auto solved = retarget_episode(*options.model, local, options.retarget);
      for (std::size_t i = 0; i < solved.size(); ++i) ep.frames[i].hand_joints = solved[i].q;
      ep.provenance.retarget_config_hash = options.retarget.hash();
      ep.provenance.steps.push_back("retarget:" + hex64(options.retarget.hash()));
    }
    ep.validate(options.model);
    built[e] = std::move(ep);
  });

  IngestResult out;
  for (std::size_t e = 0; e < built.size(); ++e) {
    if (built[e]) out.episodes.push_back(std::move(*built[e]));
    else out.rejected.push_back({s.episodes[e].id, reasons[e]});
  }
  return out;
}

IngestResult ingest_robot_raw(const fs::path& session_dir, const Pose& base_to_camera, int threads) {
  const Session s = read_session(session_dir, "h2r-robot-session/1");
  std::vector<std::optional<Episode>> built(s.episodes.size());
  std::vector<std::string> reasons(s.episodes.size());
  const Pose extrinsic = base_to_camera.with_frame(Frame::kCamera);

  parallel_for(s.episodes.size(), threads, [&](std::size_t e) {
    const auto& se = s.episodes[e];
    const fs::path file = session_dir / se.frames_file;
    const auto rows = read_rows(file, 2 + 7 + kActuatorCount);

    Episode ep;
    ep.id = se.id;
    ep.domain = Domain::kRobot;
    ep.task_id = se.task;
    ep.instruction = se.instruction;
    ep.scene_tag = se.scene;
    ep.fps = s.fps;
    ep.image_width = s.image_width;
    ep.image_height = s.image_height;
    ep.provenance.source = s.id;
    ep.provenance.processing_order = "none";

    std::vector<std::string> raw_refs;
    std::vector<double> times;
    std::vector<std::size_t> raw_index;
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& [line, tok] = rows[r];
      std::vector<double> v(tok.size());
      bool finite = true;
      for (std::size_t k = 0; k < tok.size(); ++k) {
        if (k == 1) continue;
        v[k] = number(file, line, tok[k]);
        finite = finite && std::isfinite(v[k]);
      }
      if (!finite) {
        ++dropped;
        continue;
      }
      const Pose in_base(Vec3(v[2], v[3], v[4]), Quat(v[5], v[6], v[7], v[8]), Frame::kRobotBase);
      FrameRecord f;
      f.timestamp = v[0];
      f.wrist_pose = compose(extrinsic, in_base);
      for (int k = 0; k < kActuatorCount; ++k) f.hand_joints[k] = v[9 + static_cast<std::size_t>(k)];
      ep.frames.push_back(std::move(f));
      raw_refs.push_back(tok[1]);
      times.push_back(v[0]);
      raw_index.push_back(r);
    }
    ep.provenance.dropped_frames = dropped;
    ep.provenance.steps.push_back("ingest-robot");
    if (rows.empty() || static_cast<double>(dropped) > kMaxDroppedFraction * static_cast<double>(rows.size())) {
      reasons[e] = std::to_string(dropped) + " of " + std::to_string(rows.size()) + " frames are invalid";
      return;
    }
    check_monotonic(ep.id, times, raw_index);
    assign_images(ep, raw_refs, session_dir);
    ep.validate();
    built[e] = std::move(ep);
  });

  IngestResult out;
  for (std::size_t e = 0; e < built.size(); ++e) {
    if (built[e]) out.episodes.push_back(std::move(*built[e]));
    else out.rejected.push_back({s.episodes[e].id, reasons[e]});
  }
  return out;
}

Pose load_extrinsic(const fs::path& path) {
  if (!fs::exists(path)) throw InvalidArgument("extrinsic file " + path.string() + " not found");
  const Json j = detail::parse_json(read_text_file(path), path.string());
  try {
    if (j.at("format").get<std::string>() != "h2r-extrinsic/1") {
      throw FormatError(path.string() + ": expected format 'h2r-extrinsic/1'");
    }
    return detail::pose_from_json(j.at("base_to_camera"), Frame::kCamera).with_frame(Frame::kCamera);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_extrinsic(const Pose& base_to_camera, const fs::path& path) {
  const Json j{{"format", "h2r-extrinsic/1"},
               {"base_to_camera", detail::pose_to_json(base_to_camera.with_frame(Frame::kCamera))}};
  write_text_file(path, detail::dump_json(j));
}

}  // namespace h2r
