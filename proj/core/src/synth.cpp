#include "h2r/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "h2r/error.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

namespace fs = std::filesystem;
using detail::Json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
  return r.next_u64();
}

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  const double n = v.norm();
  return n > 1e-9 ? Vec3(v / n) : Vec3(Vec3::UnitZ());
}

std::string padded(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04zu", prefix, i);
  return buf;
}

std::vector<std::byte> placeholder_pgm(std::size_t episode, std::size_t frame) {
  constexpr int kW = 16, kH = 12;
  const std::string header = "P5\n16 12\n255\n";
  std::vector<std::byte> out;
  out.reserve(header.size() + kW * kH);
  for (const char c : header) out.push_back(static_cast<std::byte>(c));
  for (int y = 0; y < kH; ++y) {
    for (int x = 0; x < kW; ++x) {
      out.push_back(static_cast<std::byte>((x * 13 + y * 7 + frame * 3 + episode * 11) % 256));
    }
  }
  return out;
}

std::string pose_tokens(const Pose& p) {
  const auto& t = p.position();
  const auto& q = p.orientation();
  std::string s;
  for (const double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) s += " " + format_double(v);
  return s;
}

std::vector<SynthTask> default_human_tasks() {
  return {{"pour_bottle", "pour the bottle into the cup"},
          {"close_laptop", "close the laptop"},
          {"press_stapler", "press the stapler"},
          {"wipe_towel", "wipe the table with the towel"}};
}

std::vector<SynthTask> default_robot_tasks() {
  return {{"pick_cube", "pick up the cube"}, {"open_drawer", "open the drawer"}};
}

Json tasks_to_json(const std::vector<SynthTask>& tasks) {
  Json out = Json::array();
  for (const auto& t : tasks) out.push_back(Json{{"id", t.id}, {"instruction", t.instruction}});
  return out;
}

std::vector<SynthTask> tasks_from_json(const Json& j) {
  std::vector<SynthTask> out;
  for (const auto& t : j) out.push_back({t.at("id").get<std::string>(), t.at("instruction").get<std::string>()});
  return out;
}

}  // namespace

SynthCalibration synth_calibration(std::uint64_t seed, const SynthCalibrationOptions& o) {
  if (o.board_cols < 2 || o.board_rows < 2 || !(o.square > 0.0)) {
    throw InvalidArgument("synth_calibration: board needs at least 2x2 corners and a positive square size");
  }
  if (!(o.view_tilt_min > 0.0 && o.view_tilt_min <= o.view_tilt_max && o.view_tilt_max < 1.4)) {
    throw InvalidArgument("synth_calibration: view tilt must satisfy 0 < min <= max < 1.4 rad");
  }
  Rng rng(seed);
  SynthCalibration out;
  auto& s = out.session;
  s.id = "synth-cal-" + hex64(seed);
  s.target.intrinsics = o.intrinsics;
  for (int r = 0; r < o.board_rows; ++r) {
    for (int c = 0; c < o.board_cols; ++c) s.target.points.emplace_back(c * o.square, r * o.square, 0.0);
  }
  const Vec3 center((o.board_cols - 1) * o.square / 2.0, (o.board_rows - 1) * o.square / 2.0, 0.0);

  // Camera off to one side looking down at the board centre, with some roll.
  const double tilt = rng.uniform(o.view_tilt_min, o.view_tilt_max);
  const double azimuth = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const Vec3 dir(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
  const Vec3 cam = center + rng.uniform(0.5, 0.65) * dir;
  const Vec3 look = center + Vec3(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), 0.0);
  const Vec3 z = (look - cam).normalized();
  const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
  Mat3 rot;
  rot.col(0) = x;
  rot.col(1) = z.cross(x);
  rot.col(2) = z;
  rot = rot * Eigen::AngleAxisd(rng.uniform(-0.3, 0.3), Vec3::UnitZ()).toRotationMatrix();
  out.t_cam = Pose(cam, Quat(rot), Frame::kChessboard);

  for (std::size_t i = 0; i < s.target.points.size(); ++i) {
    Eigen::Vector2d px = project(o.intrinsics, out.t_cam, s.target.points[i]);
    px += Eigen::Vector2d(rng.normal(), rng.normal()) * o.pixel_noise;
    s.detections.push_back({static_cast<int>(i), px});
  }

  // VR tracking origin: off to the side and above the desk, yawed freely.
  const Quat q_vr = Quat(Eigen::AngleAxisd(rng.uniform(-std::numbers::pi, std::numbers::pi), Vec3::UnitZ())) *
                    Quat(Eigen::AngleAxisd(rng.uniform(-0.2, 0.2), Vec3::UnitX())) *
                    Quat(Eigen::AngleAxisd(rng.uniform(-0.2, 0.2), Vec3::UnitY()));
  out.t_vr = Pose(Vec3(rng.uniform(0.2, 0.4), rng.uniform(-0.5, -0.3), rng.uniform(0.3, 0.45)), q_vr,
                  Frame::kChessboard);
  out.vr_to_cam = compose(inverse(out.t_cam), out.t_vr).with_frame(Frame::kCamera);

  const Pose board_in_vr = inverse(out.t_vr);
  const Vec3 normal_vr = board_in_vr.orientation() * Vec3::UnitZ();
  s.anchor_in_vr = Pose(board_in_vr.position() + o.anchor_height_error * normal_vr, board_in_vr.orientation(),
                        Frame::kVr);

  const int n_points = std::max(o.depth_points, 3);
  for (int i = 0; i < n_points; ++i) {
    const Vec3 p(rng.uniform(-0.2, 0.6), rng.uniform(-0.2, 0.5), rng.normal() * o.depth_noise);
    s.depth_points.push_back(board_in_vr.apply(p));
  }
  for (int i = 0; i < o.depth_outliers; ++i) {
    const Vec3 p(rng.uniform(-0.2, 0.6), rng.uniform(-0.2, 0.5), rng.uniform(0.05, 0.3));
    s.depth_points.push_back(board_in_vr.apply(p));
  }
  s.plane_options.ransac = o.depth_outliers > 0;
  s.plane_options.seed = sub_seed(seed, 1);
  return out;
}

Keypoints synth_keypoints(const HandModel& model, const JointState& q) {
  if (model.fingertip_count() != 5) throw InvalidArgument("synth_keypoints: the hand model needs five fingers");
  const auto tips = forward_kinematics(model, q);
  Keypoints kp{};
  kp[0] = Vec3::Zero();
  for (std::size_t f = 0; f < 5; ++f) {
    const Vec3 base = model.fingers()[f].base.position();
    const Vec3& tip = tips[f];
    kp[1 + 4 * f] = base;
    kp[2 + 4 * f] = base + (tip - base) / 3.0;
    kp[3 + 4 * f] = base + 2.0 * (tip - base) / 3.0;
    kp[4 + 4 * f] = tip;
  }
  return kp;
}

JointState synth_joint_state(const HandModel& model, Rng& rng, double margin) {
  const JointState lo = model.lower_limits();
  const JointState hi = model.upper_limits();
  JointState q;
  for (int i = 0; i < kActuatorCount; ++i) {
    const double m = std::min(margin, 0.25 * (hi[i] - lo[i]));
    q[i] = rng.uniform(lo[i] + m, hi[i] - m);
  }
  return q;
}

SynthTrajectory synth_trajectory(const HandModel& model, std::uint64_t seed, const SynthTrajectoryOptions& o) {
  if (o.frames < 2 || !(o.fps > 0.0)) throw InvalidArgument("synth_trajectory: need >= 2 frames and fps > 0");
  Rng rng(seed);
  const Vec3 center = o.center + Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
  Vec3 amp, phase;
  for (int a = 0; a < 3; ++a) {
    amp[a] = o.amplitude * rng.uniform(0.5, 1.0);
    phase[a] = rng.uniform(0.0, kTwoPi);
  }
  const Quat q0 = Quat(Eigen::AngleAxisd(rng.uniform(-std::numbers::pi, std::numbers::pi), Vec3::UnitZ())) *
                  Quat(Eigen::AngleAxisd(rng.uniform(-0.5, 0.5), Vec3::UnitX()));
  const Vec3 rot_axis = random_unit(rng);
  const double rot_amp = o.rotation_amplitude * rng.uniform(0.5, 1.0);
  const double rot_phase = rng.uniform(0.0, kTwoPi);

  const JointState lo = model.lower_limits();
  const JointState hi = model.upper_limits();
  JointState j_amp, j_phase;
  for (int i = 0; i < kActuatorCount; ++i) {
    j_amp[i] = 0.4 * (hi[i] - lo[i]) * rng.uniform(0.3, 1.0);
    j_phase[i] = rng.uniform(0.0, kTwoPi);
  }

  SynthTrajectory out;
  const double n1 = static_cast<double>(o.frames - 1);
  for (std::size_t i = 0; i < o.frames; ++i) {
    const double w = kTwoPi * o.cycles * static_cast<double>(i) / n1;
    Vec3 p = center;
    for (int a = 0; a < 3; ++a) p[a] += amp[a] * std::sin(w + phase[a]);
    const Quat q = q0 * Quat(Eigen::AngleAxisd(rot_amp * std::sin(w + rot_phase), rot_axis));
    JointState j;
    for (int k = 0; k < kActuatorCount; ++k) j[k] = 0.5 * (lo[k] + hi[k]) + j_amp[k] * std::sin(w + j_phase[k]);
    out.timestamps.push_back(static_cast<double>(i) / o.fps);
    out.wrist.emplace_back(p, q, Frame::kCamera);
    out.joints.push_back(j);
  }
  return out;
}

void SynthCorpusConfig::validate() const {
  if (human_tasks.empty() || robot_tasks.empty()) throw InvalidArgument("synth config: task lists must not be empty");
  if (!(fps > 0.0)) throw InvalidArgument("synth config: fps must be positive");
  if (frames_min < 2 || frames_max < frames_min) throw InvalidArgument("synth config: bad frame range");
  if (image_width < 640 || image_height < 480) {
    throw InvalidArgument("synth config: image size must be at least 640x480");
  }
  std::set<std::string> ids;
  for (const auto& t : human_tasks) ids.insert(t.id);
  for (const auto& t : robot_tasks) ids.insert(t.id);
  if (ids.size() != human_tasks.size() + robot_tasks.size()) throw InvalidArgument("synth config: duplicate task ids");
}

std::string SynthCorpusConfig::to_json() const {
  const auto& c = calibration;
  return detail::dump_json(Json{
      {"format", "h2r-synth/1"},
      {"seed", seed},
      {"human_episodes", human_episodes},
      {"robot_episodes", robot_episodes},
      {"fps", fps},
      {"frames", Json::array({frames_min, frames_max})},
      {"image_size", Json::array({image_width, image_height})},
      {"human_tasks", tasks_to_json(human_tasks)},
      {"robot_tasks", tasks_to_json(robot_tasks)},
      {"calibration",
       Json{{"board", Json::array({c.board_cols, c.board_rows})},
            {"square", c.square},
            {"view_tilt", Json::array({c.view_tilt_min, c.view_tilt_max})},
            {"intrinsics", Json::array({c.intrinsics.fx, c.intrinsics.fy, c.intrinsics.cx, c.intrinsics.cy})},
            {"pixel_noise", c.pixel_noise},
            {"depth_noise", c.depth_noise},
            {"anchor_height_error", c.anchor_height_error},
            {"depth_points", c.depth_points},
            {"depth_outliers", c.depth_outliers}}}});
}

SynthCorpusConfig SynthCorpusConfig::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "synth config");
  try {
    if (j.at("format").get<std::string>() != "h2r-synth/1") throw FormatError("synth config: unsupported format");
    SynthCorpusConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.human_episodes = j.at("human_episodes").get<std::size_t>();
    c.robot_episodes = j.at("robot_episodes").get<std::size_t>();
    c.fps = j.at("fps").get<double>();
    c.frames_min = j.at("frames").at(0).get<std::size_t>();
    c.frames_max = j.at("frames").at(1).get<std::size_t>();
    c.image_width = j.at("image_size").at(0).get<int>();
    c.image_height = j.at("image_size").at(1).get<int>();
    c.human_tasks = tasks_from_json(j.at("human_tasks"));
    c.robot_tasks = tasks_from_json(j.at("robot_tasks"));
    if (j.contains("calibration")) {
      const auto& k = j.at("calibration");
      auto& o = c.calibration;
      o.board_cols = k.at("board").at(0).get<int>();
      o.board_rows = k.at("board").at(1).get<int>();
      o.square = k.at("square").get<double>();
      if (k.contains("view_tilt")) {
        o.view_tilt_min = k.at("view_tilt").at(0).get<double>();
        o.view_tilt_max = k.at("view_tilt").at(1).get<double>();
      }
      const auto intr = k.at("intrinsics").get<std::vector<double>>();
      if (intr.size() != 4) throw FormatError("synth config: intrinsics need 4 values");
      o.intrinsics = {intr[0], intr[1], intr[2], intr[3]};
      o.pixel_noise = k.at("pixel_noise").get<double>();
      o.depth_noise = k.at("depth_noise").get<double>();
      o.anchor_height_error = k.at("anchor_height_error").get<double>();
      o.depth_points = k.at("depth_points").get<int>();
      o.depth_outliers = k.at("depth_outliers").get<int>();
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  }
}

SynthCorpusConfig SynthCorpusConfig::load(const fs::path& path) { return from_json(read_text_file(path)); }

SynthCorpus make_synth_corpus(const HandModel& model, const SynthCorpusConfig& config) {
  SynthCorpusConfig cfg = config;
  if (cfg.human_tasks.empty()) cfg.human_tasks = default_human_tasks();
  if (cfg.robot_tasks.empty()) cfg.robot_tasks = default_robot_tasks();
  cfg.validate();

  SynthCorpus out;
  out.config = cfg;
  out.calibration = synth_calibration(sub_seed(cfg.seed, 0), cfg.calibration);
  out.base_to_camera = Pose(Vec3(0.35, -0.25, 0.8),
                            Quat(Eigen::AngleAxisd(2.4, Vec3(0.2, 0.9, -0.3).normalized())), Frame::kCamera);

  const std::size_t steps = (cfg.frames_max - cfg.frames_min) / 4 + 1;
  Rng rng(sub_seed(cfg.seed, 1));
  auto build = [&](Domain domain, std::size_t i) {
    const bool human = domain == Domain::kHuman;
    const auto& tasks = human ? cfg.human_tasks : cfg.robot_tasks;
    SynthEpisode ep;
    ep.id = padded(human ? "h" : "r", i);
    ep.domain = domain;
    ep.task_id = tasks[i % tasks.size()].id;
    SynthTrajectoryOptions t;
    t.fps = cfg.fps;
    t.frames = cfg.frames_min + 4 * static_cast<std::size_t>(rng.index(steps));
    t.cycles = rng.uniform(0.4, 0.8);
    if (!human) {
      // Teleoperated robot motion is slower and smaller.
      t.amplitude = 0.06;
      t.rotation_amplitude = 0.2;
      t.cycles *= 0.5;
    }
    ep.truth = synth_trajectory(model, rng.next_u64(), t);
    return ep;
  };
  for (std::size_t i = 0; i < cfg.human_episodes; ++i) out.human.push_back(build(Domain::kHuman, i));
  for (std::size_t i = 0; i < cfg.robot_episodes; ++i) out.robot.push_back(build(Domain::kRobot, i));
  return out;
}

void write_synth_corpus(const SynthCorpus& corpus, const HandModel& model, const fs::path& dir) {
  const auto& cfg = corpus.config;
  fs::create_directories(dir);
  corpus.calibration.session.save(dir / "calibration.json");

  auto task_of = [](const std::vector<SynthTask>& tasks, const std::string& id) -> const SynthTask& {
    for (const auto& t : tasks) {
      if (t.id == id) return t;
    }
    throw InvalidArgument("synth: unknown task '" + id + "'");
  };

  auto write_session = [&](const std::vector<SynthEpisode>& eps, bool human) {
    const fs::path root = dir / (human ? "human" : "robot");
    fs::create_directories(root / "frames");
    Json list = Json::array();
    const Pose cam_to_vr = inverse(corpus.calibration.vr_to_cam);
    const Pose camera_to_base = inverse(corpus.base_to_camera);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      const auto& ep = eps[e];
      const auto& task = task_of(human ? cfg.human_tasks : cfg.robot_tasks, ep.task_id);
      const fs::path image_dir = root / "images" / ep.id;
      fs::create_directories(image_dir);
      std::ostringstream rows;
      rows << (human ? "# t image wrist(vr: px py pz qw qx qy qz) keypoints(vr: 21 x 3)\n"
                     : "# t image wrist(base: px py pz qw qx qy qz) joints(6)\n");
      for (std::size_t i = 0; i < ep.truth.wrist.size(); ++i) {
        const std::string name = padded("f", i) + ".pgm";
        write_binary_file(image_dir / name, placeholder_pgm(e, i));
        rows << format_double(ep.truth.timestamps[i]) << " images/" << ep.id << "/" << name;
        const Pose& cam = ep.truth.wrist[i];
        if (human) {
          rows << pose_tokens(compose(cam_to_vr, cam));
          for (const Vec3& k : synth_keypoints(model, ep.truth.joints[i])) {
            const Vec3 v = cam_to_vr.apply(cam.apply(k));
            rows << " " << format_double(v.x()) << " " << format_double(v.y()) << " " << format_double(v.z());
          }
        } else {
          rows << pose_tokens(compose(camera_to_base, cam));
          for (int k = 0; k < kActuatorCount; ++k) rows << " " << format_double(ep.truth.joints[i][k]);
        }
        rows << "\n";
      }
      const std::string frames = "frames/" + ep.id + ".txt";
      write_text_file(root / frames, rows.str());
      list.push_back(Json{{"id", ep.id},
                          {"task", ep.task_id},
                          {"instruction", task.instruction},
                          {"scene", "synthetic"},
                          {"frames", frames}});
    }
    write_text_file(root / "session.json",
                    detail::dump_json(Json{{"format", human ? "h2r-human-session/1" : "h2r-robot-session/1"},
                                           {"id", human ? "synth-human" : "synth-robot"},
                                           {"fps", cfg.fps},
                                           {"image_size", Json::array({cfg.image_width, cfg.image_height})},
                                           {"episodes", list}}));
  };
  write_session(corpus.human, true);
  write_session(corpus.robot, false);
  save_extrinsic(corpus.base_to_camera, dir / "robot" / "extrinsic.json");
  write_text_file(dir / "synth.json", cfg.to_json());
}

DatasetIndex make_counts_index(std::size_t n_human, std::size_t n_robot) {
  DatasetIndex idx;
  const auto human = default_human_tasks();
  const auto robot = default_robot_tasks();
  for (std::size_t i = 0; i < n_human; ++i) {
    idx.episodes.push_back({padded("h", i), Domain::kHuman, human[i % human.size()].id, 0, "", 0});
  }
  for (std::size_t i = 0; i < n_robot; ++i) {
    idx.episodes.push_back({padded("r", i), Domain::kRobot, robot[i % robot.size()].id, 0, "", 0});
  }
  idx.recount();
  return idx;
}

}  // namespace h2r
