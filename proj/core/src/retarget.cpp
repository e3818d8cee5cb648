#include "h2r/retarget.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "h2r/error.hpp"
#include "h2r/util.hpp"

namespace h2r {
namespace {

constexpr double kMinDamping = 1e-7;
constexpr double kMaxDamping = 1e3;
// Below this objective (m^2) a pinned solution is accepted as is.
constexpr double kRestartFloor = 1e-14;
// Restart offset from the limit, as a fraction of the actuator range.
constexpr double kRestartPush = 0.1;

// Stacked weighted residual r(q) and its Jacobian dr/dq.
struct Linearization {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
  double objective = 0.0;
};

Linearization linearize(const HandModel& model, const HumanHand& hand, const JointState& q,
                        const JointState& q_prev, const RetargetConfig& cfg, bool with_jacobian) {
  std::vector<Vec3> tips;
  Eigen::MatrixXd tip_jac;
  forward_kinematics_with_jacobian(model, q, tips, tip_jac);

  const auto n_vec = static_cast<Eigen::Index>(cfg.task_vectors.size());
  Linearization lin;
  lin.residual.resize(3 * n_vec + kActuatorCount);
  if (with_jacobian) lin.jacobian.setZero(3 * n_vec + kActuatorCount, kActuatorCount);

  for (Eigen::Index i = 0; i < n_vec; ++i) {
    const auto& tv = cfg.task_vectors[static_cast<std::size_t>(i)];
    const double sw = std::sqrt(tv.weight);
    const Vec3 human = hand.keypoints[tv.human_to] - hand.keypoints[tv.human_from];
    // The robot wrist sits at the origin of the wrist frame.
    const Vec3& robot = tips[static_cast<std::size_t>(tv.robot_tip)];
    lin.residual.segment<3>(3 * i) = sw * (cfg.scale * human - robot);
    if (with_jacobian) {
      lin.jacobian.block(3 * i, 0, 3, kActuatorCount) =
          -sw * tip_jac.block(3 * tv.robot_tip, 0, 3, kActuatorCount);
    }
  }
  const double sb = std::sqrt(cfg.smoothness);
  lin.residual.tail<kActuatorCount>() = sb * (q - q_prev);
  if (with_jacobian) {
    lin.jacobian.bottomRows(kActuatorCount) =
        sb * Eigen::Matrix<double, kActuatorCount, kActuatorCount>::Identity();
  }
  lin.objective = lin.residual.squaredNorm();
  return lin;
}

void check_hand(const HumanHand& hand) {
  for (int k = 0; k < kHandKeypoints; ++k) {
    if (!hand.keypoints[k].allFinite()) {
      throw InvalidArgument("keypoint " + std::to_string(k) + " is not finite");
    }
  }
}

}  // namespace

HumanHand HumanHand::to_wrist_local() const {
  HumanHand out;
  const Pose inv = inverse(wrist_pose);
  for (int k = 0; k < kHandKeypoints; ++k) out.keypoints[k] = inv.apply(keypoints[k]);
  out.wrist_pose = Pose::identity(Frame::kWrist);
  return out;
}

std::vector<TaskVector> RetargetConfig::default_task_vectors() {
  // Thumb..pinky fingertips are keypoints 4, 8, 12, 16, 20.
  std::vector<TaskVector> out;
  for (int f = 0; f < 5; ++f) out.push_back({0, 4 * (f + 1), f, 1.0});
  return out;
}

void RetargetConfig::validate(const HandModel& model) const {
  if (task_vectors.empty()) throw InvalidArgument("retarget: no task vectors");
  if (!(scale > 0.0)) throw InvalidArgument("retarget: scale must be > 0");
  if (!(smoothness >= 0.0)) throw InvalidArgument("retarget: smoothness must be >= 0");
  if (max_iters < 1) throw InvalidArgument("retarget: max_iters must be >= 1");
  for (const auto& tv : task_vectors) {
    if (!(tv.weight >= 0.0)) throw InvalidArgument("retarget: weights must be >= 0");
    if (tv.human_from < 0 || tv.human_from >= kHandKeypoints || tv.human_to < 0 ||
        tv.human_to >= kHandKeypoints) {
      throw InvalidArgument("retarget: human keypoint index out of range");
    }
    if (tv.robot_tip < 0 || static_cast<std::size_t>(tv.robot_tip) >= model.fingertip_count()) {
      throw InvalidArgument("retarget: robot fingertip index out of range");
    }
  }
}

std::uint64_t RetargetConfig::hash() const {
  std::string text = "scale=" + format_double(scale) + ";smoothness=" + format_double(smoothness) +
                     ";max_iters=" + std::to_string(max_iters) +
                     ";step_tol=" + format_double(step_tol) +
                     ";damping=" + format_double(initial_damping) +
                     ";restarts=" + std::to_string(bound_restarts) + ";vectors=";
  for (const auto& tv : task_vectors) {
    text += std::to_string(tv.human_from) + ">" + std::to_string(tv.human_to) + ":" +
            std::to_string(tv.robot_tip) + "@" + format_double(tv.weight) + ",";
  }
  return fnv1a64(text);
}

double retarget_objective(const HandModel& model, const HumanHand& hand, const JointState& q,
                          const JointState& q_prev, const RetargetConfig& cfg) {
  return linearize(model, hand, q, q_prev, cfg, false).objective;
}

namespace {

struct Descent {
  JointState q;
  Linearization lin;
  bool converged = false;
  int iterations = 0;
  std::vector<double> accepted;  // objectives after each accepted step
};

Descent descend(const HandModel& model, const HumanHand& hand, const JointState& start, const JointState& q_prev,
                const RetargetConfig& cfg) {
  Descent d;
  d.q = model.clamp(start);
  d.lin = linearize(model, hand, d.q, q_prev, cfg, true);
  double damping = std::clamp(cfg.initial_damping, kMinDamping, kMaxDamping);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    d.iterations = iter + 1;
    const Eigen::MatrixXd jtj = d.lin.jacobian.transpose() * d.lin.jacobian;
    const Eigen::VectorXd grad = d.lin.jacobian.transpose() * d.lin.residual;
    Eigen::MatrixXd normal = jtj;
    normal.diagonal().array() += damping;
    const Eigen::VectorXd delta = normal.ldlt().solve(-grad);

    const JointState candidate = model.clamp(d.q + delta);
    const double step = (candidate - d.q).norm();
    if (!(step >= cfg.step_tol)) {
      // The projected step vanished: stationary point of the box-constrained
      // problem (interior minimum or pinned at a limit).
      d.converged = std::isfinite(step);
      break;
    }
    Linearization trial = linearize(model, hand, candidate, q_prev, cfg, true);
    if (trial.objective <= d.lin.objective) {
      d.q = candidate;
      d.lin = std::move(trial);
      d.accepted.push_back(d.lin.objective);
      damping = std::max(kMinDamping, damping * 0.5);
    } else {
      // Even the most heavily damped step fails to descend.
      if (damping >= kMaxDamping) break;
      damping = std::min(kMaxDamping, damping * 2.0);
    }
  }
  return d;
}

}  // namespace

RetargetResult retarget_frame(const HandModel& model, const HumanHand& hand,
                              const JointState& q_prev, const RetargetConfig& cfg) {
  cfg.validate(model);
  check_hand(hand);
  if (!q_prev.allFinite()) throw InvalidArgument("retarget: q_prev is not finite");

  RetargetResult result;
  Descent best = descend(model, hand, q_prev, q_prev, cfg);
  result.accepted_objectives.push_back(linearize(model, hand, model.clamp(q_prev), q_prev, cfg, false).objective);
  result.accepted_objectives.insert(result.accepted_objectives.end(), best.accepted.begin(), best.accepted.end());
  result.iterations = best.iterations;

  const JointState lo = model.lower_limits();
  const JointState hi = model.upper_limits();
  for (int round = 0; round < cfg.bound_restarts; ++round) {
    if (best.lin.objective <= kRestartFloor) break;
    JointState start = best.q;
    bool pinned = false;
    for (int a = 0; a < kActuatorCount; ++a) {
      const double push = kRestartPush * (hi[a] - lo[a]);
      if (best.q[a] <= lo[a]) {
        start[a] = lo[a] + push;
        pinned = true;
      } else if (best.q[a] >= hi[a]) {
        start[a] = hi[a] - push;
        pinned = true;
      }
    }
    if (!pinned) break;
    Descent d = descend(model, hand, start, q_prev, cfg);
    result.iterations += d.iterations;
    if (!(d.lin.objective < best.lin.objective)) break;
    best = std::move(d);
    result.accepted_objectives.push_back(best.lin.objective);
  }
  result.q = best.q;
  result.objective = best.lin.objective;
  result.converged = best.converged;
  return result;
}

std::vector<RetargetResult> retarget_episode(const HandModel& model,
                                             std::span<const HumanHand> hands,
                                             const RetargetConfig& cfg) {
  if (hands.empty()) throw InvalidArgument("retarget_episode: empty sequence");
  std::vector<RetargetResult> out;
  out.reserve(hands.size());
  JointState anchor = model.mid_range();
  for (std::size_t t = 0; t < hands.size(); ++t) {
    try {
      out.push_back(retarget_frame(model, hands[t], anchor, cfg));
    } catch (const Error& e) {
      throw InvalidArgument("frame " + std::to_string(t) + ": " + e.what());
    }
    anchor = out.back().q;
  }
  return out;
}

}  // namespace h2r
