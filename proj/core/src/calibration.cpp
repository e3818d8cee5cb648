#include "h2r/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

using detail::Json;

constexpr double kRefineStepTol = 1e-10;
constexpr int kRefineMaxIters = 100;
constexpr double kMinDepth = 1e-9;
constexpr double kCollinearRatio = 1e-9;
constexpr double kVrToCamTolerance = 1e-12;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

// Board-in-camera transform as (R, t) for the inner loops.
struct BoardInCamera {
  Mat3 r;
  Vec3 t;
};

double rms_error(const PlanarTarget& target, std::span<const Detection> dets,
                 const BoardInCamera& x) {
  const auto& k = target.intrinsics;
  double sum = 0.0;
  for (const auto& d : dets) {
    const Vec3 pc = x.r * target.points[static_cast<std::size_t>(d.point_id)] + x.t;
    if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    const Eigen::Vector2d uv(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
    sum += (uv - d.pixel).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(dets.size()));
}

// Normalising similarity for DLT conditioning.
Mat3 conditioner(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  if (dist < 1e-15) throw DegenerateInput("planar pose: all points coincide");
  const double s = std::sqrt(2.0) / dist;
  Mat3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

BoardInCamera homography_init(const PlanarTarget& target, std::span<const Detection> dets) {
  const auto& k = target.intrinsics;
  std::vector<Eigen::Vector2d> board, image;
  for (const auto& d : dets) {
    const auto& p = target.points[static_cast<std::size_t>(d.point_id)];
    board.emplace_back(p.x(), p.y());
    image.emplace_back((d.pixel.x() - k.cx) / k.fx, (d.pixel.y() - k.cy) / k.fy);
  }
  const Mat3 tb = conditioner(board);
  const Mat3 ti = conditioner(image);

  Eigen::MatrixXd a(2 * dets.size(), 9);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Vec3 x = tb * Vec3(board[i].x(), board[i].y(), 1.0);
    const Vec3 y = ti * Vec3(image[i].x(), image[i].y(), 1.0);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << 0, 0, 0, -x.x(), -x.y(), -1, y.y() * x.x(), y.y() * x.y(), y.y();
    a.row(r + 1) << x.x(), x.y(), 1, 0, 0, 0, -y.x() * x.x(), -y.x() * x.y(), -y.x();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 hm = ti.inverse() * hn * tb;

  const double n1 = hm.col(0).norm();
  const double n2 = hm.col(1).norm();
  if (n1 < 1e-12 || n2 < 1e-12 || std::abs(hm.determinant()) < 1e-15 * n1 * n2 * hm.col(2).norm()) {
    throw DegenerateInput("planar pose: homography is degenerate");
  }
  double lambda = 2.0 / (n1 + n2);
  if (hm(2, 2) * lambda < 0.0) lambda = -lambda;  // board in front of the camera
  Mat3 r;
  r.col(0) = lambda * hm.col(0);
  r.col(1) = lambda * hm.col(1);
  r.col(2) = r.col(0).cross(r.col(1));
  return {nearest_rotation(r), lambda * hm.col(2)};
}

}  // namespace

void PlanarTarget::validate() const {
  if (points.size() < 4) throw InvalidArgument("planar target needs at least 4 points");
  if (!(intrinsics.fx > 0.0 && intrinsics.fy > 0.0)) {
    throw InvalidArgument("planar target: focal lengths must be positive");
  }
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) {
    if (!p.allFinite()) throw InvalidArgument("planar target: non-finite point");
    if (p.z() != 0.0) throw InvalidArgument("planar target: board points must have z == 0");
    mean += p.head<2>();
  }
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (es.eigenvalues()(1) <= 0.0 || es.eigenvalues()(0) <= kCollinearRatio * es.eigenvalues()(1)) {
    throw DegenerateInput("planar target: points are collinear");
  }
}

Eigen::Vector2d project(const Intrinsics& k, const Pose& camera_in_board, const Vec3& board_point) {
  const Vec3 pc = inverse(camera_in_board).apply(board_point);
  if (!(pc.z() > kMinDepth)) {
    throw DegenerateInput("point at depth " + format_double(pc.z()) +
                          " is not in front of the camera");
  }
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

PlanarPoseEstimate estimate_planar_pose(const PlanarTarget& target,
                                        std::span<const Detection> detections) {
  if (detections.size() < 4) {
    throw InvalidArgument("planar pose: need at least 4 detections, got " +
                          std::to_string(detections.size()));
  }
  std::set<int> ids;
  std::vector<Vec3> used;
  for (const auto& d : detections) {
    if (d.point_id < 0 || static_cast<std::size_t>(d.point_id) >= target.points.size()) {
      throw InvalidArgument("planar pose: unknown point id " + std::to_string(d.point_id));
    }
    if (!ids.insert(d.point_id).second) {
      throw InvalidArgument("planar pose: duplicate point id " + std::to_string(d.point_id));
    }
    if (!d.pixel.allFinite()) throw InvalidArgument("planar pose: non-finite pixel");
    used.push_back(target.points[static_cast<std::size_t>(d.point_id)]);
  }
  PlanarTarget matched{used, target.intrinsics};
  matched.validate();

  BoardInCamera x = homography_init(target, detections);
  for (const auto& d : detections) {
    const Vec3 pc = x.r * target.points[static_cast<std::size_t>(d.point_id)] + x.t;
    if (pc.z() <= kMinDepth) {
      throw DegenerateInput("planar pose: board point " + std::to_string(d.point_id) +
                            " lies behind the camera");
    }
  }

  PlanarPoseEstimate out;
  out.initial_residual_px = rms_error(target, detections, x);
  double cost = out.initial_residual_px;
  double damping = 1e-3;
  const auto& k = target.intrinsics;
  const auto n = static_cast<Eigen::Index>(detections.size());

  for (int iter = 0; iter < kRefineMaxIters; ++iter) {
    out.iterations = iter + 1;
    Eigen::MatrixXd jac(2 * n, 6);
    Eigen::VectorXd res(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = detections[static_cast<std::size_t>(i)];
      const Vec3 rp = x.r * target.points[static_cast<std::size_t>(d.point_id)];
      const Vec3 pc = rp + x.t;
      const double iz = 1.0 / pc.z();
      res(2 * i) = k.fx * pc.x() * iz + k.cx - d.pixel.x();
      res(2 * i + 1) = k.fy * pc.y() * iz + k.cy - d.pixel.y();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0, -k.fx * pc.x() * iz * iz, 0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      // Left perturbation R <- exp(w) R.
      jac.block<2, 3>(2 * i, 0) = dproj * (-skew(rp));
      jac.block<2, 3>(2 * i, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * res;
    bool accepted = false;
    double step_norm = 0.0;
    while (damping <= 1e10) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      a.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> delta = a.ldlt().solve(-g);
      step_norm = delta.norm();
      const Vec3 w = delta.head<3>();
      BoardInCamera trial{Eigen::AngleAxisd(w.norm(), w.norm() > 0 ? Vec3(w.normalized()) : Vec3::UnitZ())
                                  .toRotationMatrix() * x.r,
                          x.t + delta.tail<3>()};
      trial.r = nearest_rotation(trial.r);
      const double trial_cost = rms_error(target, detections, trial);
      if (trial_cost <= cost) {
        x = trial;
        cost = trial_cost;
        damping = std::max(1e-12, damping * 0.3);
        accepted = true;
        break;
      }
      if (step_norm < kRefineStepTol) break;
      damping *= 10.0;
    }
    if (!accepted || step_norm < kRefineStepTol) break;
  }

  out.residual_px = cost;
  out.camera_in_board = inverse(Pose(x.t, Quat(x.r), Frame::kChessboard));
  return out;
}

Plane fit_plane(std::span<const Vec3> points, const PlaneFitOptions& options) {
  if (points.size() < 3) throw DegenerateInput("fit_plane: need at least 3 points");
  for (const auto& p : points) {
    if (!p.allFinite()) throw InvalidArgument("fit_plane: non-finite point");
  }

  auto least_squares = [](const std::vector<const Vec3*>& pts) {
    Vec3 centroid = Vec3::Zero();
    for (const auto* p : pts) centroid += *p;
    centroid /= static_cast<double>(pts.size());
    Mat3 cov = Mat3::Zero();
    for (const auto* p : pts) {
      const Vec3 d = *p - centroid;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const auto& ev = es.eigenvalues();  // ascending
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
      throw DegenerateInput("fit_plane: points are collinear or coincident");
    }
    Plane plane;
    plane.normal = es.eigenvectors().col(0).normalized();
    if (plane.normal.z() < 0.0 ||
        (plane.normal.z() == 0.0 && (plane.normal.y() < 0.0 ||
                                     (plane.normal.y() == 0.0 && plane.normal.x() < 0.0)))) {
      plane.normal = -plane.normal;
    }
    plane.offset = plane.normal.dot(centroid);
    double ss = 0.0;
    for (const auto* p : pts) ss += std::pow(plane.signed_distance(*p), 2);
    plane.inlier_rms = std::sqrt(ss / static_cast<double>(pts.size()));
    plane.inlier_count = pts.size();
    return plane;
  };

  std::vector<const Vec3*> all;
  for (const auto& p : points) all.push_back(&p);
  if (!options.ransac) return least_squares(all);

  Rng rng(options.seed);
  std::size_t best_count = 0;
  Vec3 best_n = Vec3::UnitZ();
  double best_d = 0.0;
  for (int it = 0; it < options.iterations; ++it) {
    const auto i = rng.index(points.size());
    auto j = rng.index(points.size() - 1);
    if (j >= i) ++j;
    auto k = rng.index(points.size() - 2);
    if (k >= std::min(i, j)) ++k;
    if (k >= std::max(i, j)) ++k;
    const Vec3 n = (points[j] - points[i]).cross(points[k] - points[i]);
    if (n.norm() < 1e-12) continue;
    const Vec3 nu = n.normalized();
    const double d = nu.dot(points[i]);
    std::size_t count = 0;
    for (const auto& p : points) {
      if (std::abs(nu.dot(p) - d) < options.inlier_threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_n = nu;
      best_d = d;
    }
  }
  if (best_count < 3) throw DegenerateInput("fit_plane: RANSAC found no consensus plane");
  std::vector<const Vec3*> inliers;
  for (const auto& p : points) {
    if (std::abs(best_n.dot(p) - best_d) < options.inlier_threshold) inliers.push_back(&p);
  }
  return least_squares(inliers);
}

AnchorSolution solve_vr_anchor(const Pose& anchor_in_vr, const Plane& plane) {
  if (anchor_in_vr.frame() != Frame::kVr) {
    throw FrameMismatch("solve_vr_anchor: anchor reading must be in the vr frame");
  }
  AnchorSolution out;
  out.plane_distance = std::abs(plane.signed_distance(anchor_in_vr.position()));
  out.far_from_plane = out.plane_distance > kAnchorPlaneWarnDistance;
  out.projected_anchor = plane.project(anchor_in_vr.position());
  const Pose snapped(out.projected_anchor, anchor_in_vr.orientation(), Frame::kVr);
  out.t_vr = inverse(snapped).with_frame(Frame::kChessboard);
  return out;
}

CalibrationResult CalibrationResult::from_parts(std::string id, const Pose& t_cam,
                                                const Pose& t_vr) {
  CalibrationResult r;
  r.id = std::move(id);
  r.t_cam = t_cam.with_frame(Frame::kChessboard);
  r.t_vr = t_vr.with_frame(Frame::kChessboard);
  r.vr_to_cam = compose(inverse(r.t_cam), r.t_vr).with_frame(Frame::kCamera);
  return r;
}

CalibrationResult CalibrationResult::identity(std::string id) {
  return from_parts(std::move(id), Pose::identity(Frame::kChessboard),
                    Pose::identity(Frame::kChessboard));
}

std::string CalibrationResult::to_json() const {
  Json j{{"format", "h2r-calibration/1"},
         {"id", id},
         {"t_cam", detail::pose_to_json(t_cam)},
         {"t_vr", detail::pose_to_json(t_vr)},
         {"vr_to_cam", detail::pose_to_json(vr_to_cam)},
         {"residual_px", residual_px},
         {"initial_residual_px", initial_residual_px},
         {"anchor_plane_distance", anchor_plane_distance},
         {"warnings", warnings}};
  if (plane) {
    j["plane"] = Json{{"normal", detail::vec_to_json(plane->normal)},
                      {"offset", plane->offset},
                      {"inlier_rms", plane->inlier_rms},
                      {"inlier_count", plane->inlier_count}};
  }
  return detail::dump_json(j);
}

CalibrationResult CalibrationResult::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "calibration result");
  try {
    if (j.at("format").get<std::string>() != "h2r-calibration/1") {
      throw FormatError("calibration result: unsupported format '" +
                        j.at("format").get<std::string>() + "'");
    }
    auto r = from_parts(j.at("id").get<std::string>(),
                        detail::pose_from_json(j.at("t_cam"), Frame::kChessboard),
                        detail::pose_from_json(j.at("t_vr"), Frame::kChessboard));
    const Pose stored = detail::pose_from_json(j.at("vr_to_cam"), Frame::kCamera);
    if ((stored.position() - r.vr_to_cam.position()).norm() > kVrToCamTolerance ||
        angle_between(stored.orientation(), r.vr_to_cam.orientation()) > kVrToCamTolerance) {
      throw FormatError("calibration result: vr_to_cam is inconsistent with t_cam and t_vr");
    }
    r.vr_to_cam = stored;
    r.residual_px = j.at("residual_px").get<double>();
    r.initial_residual_px = j.value("initial_residual_px", 0.0);
    r.anchor_plane_distance = j.value("anchor_plane_distance", 0.0);
    r.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("plane")) {
      const auto& p = j.at("plane");
      Plane plane;
      plane.normal = detail::vec_from_json(p.at("normal"), "plane.normal");
      plane.offset = p.at("offset").get<double>();
      plane.inlier_rms = p.at("inlier_rms").get<double>();
      plane.inlier_count = p.at("inlier_count").get<std::size_t>();
      r.plane = plane;
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("calibration result: ") + e.what());
  }
}

void CalibrationResult::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json());
}

CalibrationResult CalibrationResult::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

Pose apply_calibration(const CalibrationResult& cal, const Pose& vr_pose) {
  if (vr_pose.frame() != Frame::kVr) {
    throw FrameMismatch("apply_calibration: expected a vr-frame pose, got '" +
                        std::string(to_string(vr_pose.frame())) + "'");
  }
  return compose(cal.vr_to_cam, vr_pose).with_frame(Frame::kCamera);
}

Vec3 apply_calibration(const CalibrationResult& cal, const Vec3& vr_point) {
  return cal.vr_to_cam.apply(vr_point);
}

HumanHand apply_calibration(const CalibrationResult& cal, const HumanHand& vr_hand) {
  HumanHand out;
  out.wrist_pose = apply_calibration(cal, vr_hand.wrist_pose);
  for (int k = 0; k < kHandKeypoints; ++k) {
    out.keypoints[k] = apply_calibration(cal, vr_hand.keypoints[k]);
  }
  return out;
}

std::string CalibrationSession::to_json() const {
  Json points = Json::array();
  for (const auto& p : target.points) points.push_back(detail::vec_to_json(p));
  Json dets = Json::array();
  for (const auto& d : detections) {
    dets.push_back(Json{{"id", d.point_id}, {"px", Json::array({d.pixel.x(), d.pixel.y()})}});
  }
  Json depth = Json::array();
  for (const auto& p : depth_points) depth.push_back(detail::vec_to_json(p));
  const auto& k = target.intrinsics;
  Json j{{"format", "h2r-calib-session/1"},
         {"id", id},
         {"intrinsics", Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
         {"board_points", points},
         {"detections", dets},
         {"anchor_in_vr", detail::pose_to_json(anchor_in_vr)},
         {"depth_points", depth},
         {"plane_fit",
          Json{{"ransac", plane_options.ransac},
               {"inlier_threshold", plane_options.inlier_threshold},
               {"iterations", plane_options.iterations},
               {"seed", plane_options.seed}}}};
  return detail::dump_json(j);
}

CalibrationSession CalibrationSession::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "calibration session");
  try {
    if (j.at("format").get<std::string>() != "h2r-calib-session/1") {
      throw FormatError("calibration session: unsupported format '" +
                        j.at("format").get<std::string>() + "'");
    }
    CalibrationSession s;
    s.id = j.at("id").get<std::string>();
    const auto& k = j.at("intrinsics");
    s.target.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                           k.at("cx").get<double>(), k.at("cy").get<double>()};
    for (const auto& p : j.at("board_points")) {
      s.target.points.push_back(detail::vec_from_json(p, "board_points"));
    }
    for (const auto& d : j.at("detections")) {
      const auto& px = d.at("px");
      if (!px.is_array() || px.size() != 2) throw FormatError("detection px must be [u, v]");
      s.detections.push_back({d.at("id").get<int>(), {px[0].get<double>(), px[1].get<double>()}});
    }
    s.anchor_in_vr = detail::pose_from_json(j.at("anchor_in_vr"), Frame::kVr);
    for (const auto& p : j.at("depth_points")) {
      s.depth_points.push_back(detail::vec_from_json(p, "depth_points"));
    }
    if (j.contains("plane_fit")) {
      const auto& pf = j.at("plane_fit");
      s.plane_options.ransac = pf.value("ransac", false);
      s.plane_options.inlier_threshold = pf.value("inlier_threshold", 0.005);
      s.plane_options.iterations = pf.value("iterations", 200);
      s.plane_options.seed = pf.value("seed", std::uint64_t{0});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("calibration session: ") + e.what());
  }
}

void CalibrationSession::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json());
}

CalibrationSession CalibrationSession::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

CalibrationResult calibrate(const CalibrationSession& session) {
  session.target.validate();
  const auto pose = estimate_planar_pose(session.target, session.detections);
  const Plane plane = fit_plane(session.depth_points, session.plane_options);
  const auto anchor = solve_vr_anchor(session.anchor_in_vr, plane);

  auto result = CalibrationResult::from_parts(session.id, pose.camera_in_board, anchor.t_vr);
  result.residual_px = pose.residual_px;
  result.initial_residual_px = pose.initial_residual_px;
  result.plane = plane;
  result.anchor_plane_distance = anchor.plane_distance;
  if (anchor.far_from_plane) {
    result.warnings.push_back("anchor reading is " + format_double(anchor.plane_distance) +
                              " m from the fitted desktop plane");
  }
  return result;
}

}  // namespace h2r
