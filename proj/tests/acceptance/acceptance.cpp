// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "h2r/calibration.hpp"
#include "h2r/cotrain.hpp"
#include "h2r/dataset.hpp"
#include "h2r/error.hpp"
#include "h2r/evalscore.hpp"
#include "h2r/geometry.hpp"
#include "h2r/kinematics.hpp"
#include "h2r/mechanism.hpp"
#include "h2r/normalize.hpp"
#include "h2r/replay.hpp"
#include "h2r/retarget.hpp"
#include "h2r/synth.hpp"
#include "h2r/transform.hpp"
#include "h2r/util.hpp"

namespace fs = std::filesystem;
using namespace h2r;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path data;
  fs::path work;
  int threads = 1;
  std::optional<HandModel> model;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- shared pipeline ------------------------------------------------------

struct PipelineOutput {
  fs::path root;
  Dataset dataset;
  SampleSet samples;
};

// synth -> calibrate -> ingest -> transform -> normalize -> replay report.
PipelineOutput run_pipeline(const Context& ctx, const fs::path& root) {
  fs::remove_all(root);
  const auto cfg = SynthCorpusConfig::load(ctx.data / "synthetic" / "corpus.json");
  const auto corpus = make_synth_corpus(*ctx.model, cfg);
  const fs::path raw = root / "raw";
  write_synth_corpus(corpus, *ctx.model, raw);

  const auto cal = calibrate(CalibrationSession::load(raw / "calibration.json"));
  cal.save(root / "calibration.json");

  HumanIngestOptions hopt;
  hopt.model = &*ctx.model;
  hopt.threads = ctx.threads;
  const auto human = ingest_human_raw(raw / "human", cal, hopt);
  const auto robot = ingest_robot_raw(raw / "robot", load_extrinsic(raw / "robot" / "extrinsic.json"), ctx.threads);
  if (!human.rejected.empty() || !robot.rejected.empty()) throw Error("pipeline: synthetic episodes were rejected");
  const fs::path ds_dir = root / "dataset";
  write_dataset(human.episodes, ds_dir);
  write_dataset(robot.episodes, ds_dir);
  auto ds = Dataset::open(ds_dir);

  const ChunkSpec spec;
  export_samples(ds, spec, root / "samples", ctx.threads);
  auto set = read_samples(root / "samples");
  fit_stats(set.samples, NormMode::kUnified, ctx.threads, fnv1a64(set.index.to_json())).save(root / "norm.json");
  fit_stats(set.samples, NormMode::kPerDomain, ctx.threads, fnv1a64(set.index.to_json()))
      .save(root / "norm_per_domain.json");

  std::vector<Episode> processed;
  for (std::size_t i = 0; i < ds.size(); ++i) processed.push_back(process_episode(ds.load(i), spec));
  const auto reports = check_episodes(processed, ReplayLimits::load(ctx.data / "replay_limits.json"), &*ctx.model,
                                      ctx.threads);
  std::ostringstream rep;
  for (const auto& r : reports) {
    rep << r.episode_id << ' ' << r.n_frames << ' ' << format_double(r.max_linear_speed) << ' '
        << format_double(r.max_angular_speed) << ' ' << format_double(r.max_joint_speed) << ' '
        << r.violations.size() << '\n';
  }
  write_text_file(root / "replay_report.txt", rep.str());
  const auto w = compute_weights(ds.index());
  write_text_file(root / "weights.txt", format_double(w.alpha) + "\n");
  return {root, std::move(ds), std::move(set)};
}

std::map<std::string, std::uint64_t> tree_hashes(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = fnv1a64(read_binary_file(e.path()));
  }
  return out;
}

// ---- criteria -------------------------------------------------------------

Outcome c1_weights() {
  const auto w = compute_weights(1705, 1508);
  const double alpha = 1705.0 / 3213.0;
  const double err = std::abs(w.alpha - alpha);
  // Expected weight per domain, summed over its items: alpha and 1 - alpha.
  const double robot_sum = w.robot_weight * 1508.0 / 3213.0;
  const double human_sum = w.human_weight * 1705.0 / 3213.0;
  const double share_err = std::max(std::abs(robot_sum - w.alpha), std::abs(human_sum - (1.0 - w.alpha)));
  const double total_err = std::abs(robot_sum + human_sum - 1.0);
  const bool ok = err < 1e-12 && share_err < 1e-12 && total_err < 1e-12;
  return {ok, "alpha " + fmt("%.5f", w.alpha) + ", |alpha - 1705/3213| " + fmt("%.1e", err) + ", share error " +
                  fmt("%.1e", std::max(share_err, total_err))};
}

Outcome c2_replayability(const PipelineOutput& p) {
  std::map<std::string, std::vector<TrainingSample>> by_ep;
  for (const auto& s : p.samples.samples) by_ep[s.episode_id].push_back(s);
  std::size_t checked = 0, rows = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.dataset.size(); ++i) {
    if (p.dataset.index().episodes[i].domain != Domain::kHuman) continue;
    const Episode e = process_episode(p.dataset.load(i), p.samples.index.spec);
    const auto rep = chunk_reconstruction_check(by_ep.at(e.id), e, PoseMode::kRelative);
    worst = std::max(worst, rep.max_error());
    rows += rep.rows_checked;
    ++checked;
  }
  const bool ok = checked >= 50 && worst < 1e-9;
  return {ok, std::to_string(checked) + " human episodes, " + std::to_string(rows) + " unpadded rows, max error " +
                  fmt("%.2e", worst)};
}

Outcome c3_slowdown(const PipelineOutput& p) {
  std::size_t n_eps = 0, bad_count = 0;
  double worst_ratio_err = 0.0;
  for (std::size_t i = 0; i < p.dataset.size(); ++i) {
    if (p.dataset.index().episodes[i].domain != Domain::kHuman) continue;
    const Episode e = p.dataset.load(i);
    const Episode s = slow_down(e, 2.25);
    const auto n = e.frames.size();
    if (s.frames.size() != static_cast<std::size_t>(std::llround(static_cast<double>(n - 1) * 2.25)) + 1) ++bad_count;
    double va = 0.0, vb = 0.0;
    for (const double v : speed_profile(e).linear) va = std::max(va, v);
    for (const double v : speed_profile(s).linear) vb = std::max(vb, v);
    worst_ratio_err = std::max(worst_ratio_err, std::abs(vb / (va / 2.25) - 1.0));
    ++n_eps;
  }
  const bool ok = n_eps > 0 && bad_count == 0 && worst_ratio_err < 0.01;
  return {ok, std::to_string(n_eps) + " episodes, frame-count mismatches " + std::to_string(bad_count) +
                  ", worst speed ratio error " + fmt("%.3f", 100 * worst_ratio_err) + "%"};
}

std::pair<double, double> hand_pose_error(const CalibrationResult& cal, const Pose& true_vr_to_cam, Rng& rng) {
  double pos = 0.0, rot = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Pose in_cam(Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.15, 0.2), rng.uniform(0.35, 0.75)),
                      Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized(), Frame::kCamera);
    const Pose in_vr = compose(inverse(true_vr_to_cam), in_cam).with_frame(Frame::kVr);
    const Pose got = apply_calibration(cal, in_vr);
    pos = std::max(pos, (got.position() - in_cam.position()).norm());
    rot = std::max(rot, angle_between(got.orientation(), in_cam.orientation()));
  }
  return {pos, rot};
}

Outcome c4_calibration() {
  Rng rng(4);
  double clean = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = synth_calibration(seed);
    const auto [pos, rot] = hand_pose_error(calibrate(s.session), s.vr_to_cam, rng);
    clean = std::max({clean, pos, rot});
  }
  SynthCalibrationOptions o;
  o.pixel_noise = 0.5;
  o.depth_noise = 0.001;
  o.anchor_height_error = 0.003;
  double pos_max = 0.0, rot_max = 0.0;
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
    const auto s = synth_calibration(seed, o);
    const auto [pos, rot] = hand_pose_error(calibrate(s.session), s.vr_to_cam, rng);
    pos_max = std::max(pos_max, pos);
    rot_max = std::max(rot_max, rot);
  }
  const bool ok = clean < 1e-6 && pos_max < 0.002 && rot_max < 0.2 * kDeg;
  return {ok, "noiseless max " + fmt("%.1e", clean) + "; 0.5 px over 100 trials: " + fmt("%.3f", pos_max * 1000) +
                  " mm, " + fmt("%.4f", rot_max / kDeg) + " deg"};
}

Outcome c5_retarget(const Context& ctx) {
  Rng rng(5);
  RetargetConfig cfg;
  cfg.smoothness = 0.0;
  cfg.max_iters = 200;
  double obj = 0.0, jerr = 0.0;
  bool limits = true, monotone = true;
  for (int i = 0; i < 100; ++i) {
    const JointState truth = synth_joint_state(*ctx.model, rng);
    HumanHand h;
    h.wrist_pose = Pose::identity(Frame::kWrist);
    h.keypoints = synth_keypoints(*ctx.model, truth);
    const auto r = retarget_frame(*ctx.model, h, ctx.model->mid_range(), cfg);
    obj = std::max(obj, r.objective);
    jerr = std::max(jerr, (r.q - truth).cwiseAbs().maxCoeff());
    limits = limits && ctx.model->within_limits(r.q);
    for (std::size_t k = 1; k < r.accepted_objectives.size(); ++k)
      monotone = monotone && r.accepted_objectives[k] <= r.accepted_objectives[k - 1];
  }
  const bool ok = obj < 1e-10 && jerr < 1e-4 && limits && monotone;
  return {ok, "max objective " + fmt("%.1e", obj) + ", max joint error " + fmt("%.1e", jerr) + " rad, limits " +
                  (limits ? "ok" : "violated") + ", monotone " + (monotone ? "yes" : "no")};
}

Outcome c6_normalization(const PipelineOutput& p, int threads) {
  const auto& samples = p.samples.samples;
  const NormStats st = fit_stats(samples, NormMode::kUnified, threads);
  RunningStats pro, act;
  double rt = 0.0;
  for (const auto& s : samples) {
    const TrainingSample n = normalize(s, st, s.domain);
    for (int r = 0; r < n.proprio.rows(); ++r) pro.add(n.proprio.row(r));
    for (int r = 0; r < n.action.rows(); ++r) act.add(n.action.row(r));
    const TrainingSample b = denormalize(n, st, s.domain);
    rt = std::max({rt, (b.proprio - s.proprio).cwiseAbs().maxCoeff(), (b.action - s.action).cwiseAbs().maxCoeff()});
  }
  double mean_err = 0.0, std_err = 0.0;
  std::set<int> skipped;
  for (const auto* stream : {&st.unified.proprio, &st.unified.action}) skipped.insert(stream->replaced_dims.begin(), stream->replaced_dims.end());
  for (const auto* rs : {&pro, &act}) {
    const StateRow sd = rs->variance().cwiseSqrt();
    for (int c = 0; c < kStateDim; ++c) {
      mean_err = std::max(mean_err, std::abs(rs->mean()(c)));
      if (!skipped.count(c)) std_err = std::max(std_err, std::abs(sd(c) - 1.0));
    }
  }
  // The same raw sample normalized as human and as robot under per-domain stats.
  const NormStats pd = fit_stats(samples, NormMode::kPerDomain, threads);
  const TrainingSample& probe = samples.front();
  const auto as_h = normalize(probe, pd, Domain::kHuman);
  const auto as_r = normalize(probe, pd, Domain::kRobot);
  const double gap = (as_h.action - as_r.action).cwiseAbs().maxCoeff();
  const bool ok = mean_err < 1e-6 && std_err < 1e-6 && rt < 1e-12 && gap > 1e-3;
  return {ok, "mean " + fmt("%.1e", mean_err) + ", |std - 1| " + fmt("%.1e", std_err) + ", round trip " +
                  fmt("%.1e", rt) + ", per-domain gap " + fmt("%.3f", gap) +
                  (skipped.empty() ? "" : ", " + std::to_string(skipped.size()) + " constant dims")};
}

Outcome c7_sampler() {
  const auto w = compute_weights(1705, 1508);
  std::vector<Domain> items(1705, Domain::kHuman);
  items.insert(items.end(), 1508, Domain::kRobot);
  const DomainSampler sampler(items, w);
  Rng rng(7);
  const int n = 1000000;
  int robot = 0;
  for (int i = 0; i < n; ++i) robot += items[sampler.draw(rng)] == Domain::kRobot;
  const double frac = static_cast<double>(robot) / n;
  const double sigma = std::sqrt(w.alpha * (1 - w.alpha) / n);
  const double z = (frac - w.alpha) / sigma;
  return {std::abs(z) <= 3.0, "robot fraction " + fmt("%.5f", frac) + " vs alpha " + fmt("%.5f", w.alpha) + " (" +
                                  fmt("%+.2f", z) + " sigma)"};
}

Outcome c8_mechanism(int threads) {
  const HeightTaskSpec spec;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  const auto report = run_mechanism_suite(spec, default_mechanism_subsets(spec), seeds, threads);
  const auto& r = report.rows;
  const double h = r[0].mean_abs_error_cm, pad = r[1].mean_abs_error_cm, plat = r[2].mean_abs_error_cm,
               both = r[3].mean_abs_error_cm;
  const bool order = pad <= h && plat <= h && both <= pad && both <= plat;
  const double target = spec.task(spec.eval_task).height_cm;
  const bool close = std::abs(r[3].mean_prediction_cm - target) <= 2.0;
  return {order && close, "mean abs error H " + fmt("%.2f", h) + " / +pad " + fmt("%.2f", pad) + " / +platform " +
                              fmt("%.2f", plat) + " / +both " + fmt("%.2f", both) + " cm; +both predicts " +
                              fmt("%.2f", r[3].mean_prediction_cm) + " cm"};
}

Mat4 mat(const Pose& p) {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = p.orientation().toRotationMatrix();
  m.block<3, 1>(0, 3) = p.position();
  return m;
}

Outcome c9_geometry(const Context& ctx) {
  Rng rng(9);
  auto rpose = [&] {
    return Pose(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized(), Frame::kCamera);
  };
  double pose_err = 0.0, rot_err = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Pose a = rpose(), b = rpose();
    pose_err = std::max(pose_err, (mat(compose(a, b)) - mat(a) * mat(b)).cwiseAbs().maxCoeff());
    pose_err = std::max(pose_err, (mat(inverse(a)) - mat(a).inverse()).cwiseAbs().maxCoeff());
    const Pose back = compose(a, relative(a, b));
    pose_err = std::max({pose_err, (back.position() - b.position()).norm(),
                         angle_between(back.orientation(), b.orientation())});
    rot_err = std::max(rot_err, angle_between(decode_rot6d(encode_rot6d(a.orientation())), a.orientation()));
  }
  double jac_err = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < 1000; ++t) {
    JointState q;
    for (int a = 0; a < kActuatorCount; ++a)
      q[a] = rng.uniform(ctx.model->actuators()[a].lower, ctx.model->actuators()[a].upper);
    const Eigen::MatrixXd jac = fingertip_jacobian(*ctx.model, q);
    for (int a = 0; a < kActuatorCount; ++a) {
      JointState qp = q, qm = q;
      qp[a] += h;
      qm[a] -= h;
      const auto tp = forward_kinematics(*ctx.model, qp);
      const auto tm = forward_kinematics(*ctx.model, qm);
      for (int f = 0; f < static_cast<int>(tp.size()); ++f) {
        jac_err = std::max(jac_err, (jac.block<3, 1>(3 * f, a) - (tp[f] - tm[f]) / (2 * h)).cwiseAbs().maxCoeff());
      }
    }
  }
  const bool ok = pose_err < 1e-9 && rot_err < 1e-9 && jac_err < 1e-5;
  return {ok, "1e5 trials: pose " + fmt("%.1e", pose_err) + ", rot6d " + fmt("%.1e", rot_err) +
                  "; Jacobian over 1000 trials " + fmt("%.1e", jac_err)};
}

Outcome c10_scoring(const Context& ctx) {
  const auto rubrics = load_rubrics(ctx.data / "rubrics", true);
  bool sums = rubrics.size() == 13;
  for (const auto& r : rubrics) {
    int total = 0;
    for (const auto& s : r.stages) total += s.points;
    sums = sums && total == 8;
  }
  std::map<std::string, std::vector<RolloutResult>> by_task;
  for (int i = 0; i < 10; ++i) by_task["synthetic"].push_back({i < 8 ? 1.0 : 0.0, i < 8});
  const auto rep = aggregate(by_task);
  const std::string table = rep.to_table({{"synthetic", "all data"}});
  const bool sr = std::abs(rep.tasks[0].success_rate - 0.8) < 1e-12 && table.find(" 80.0") != std::string::npos;
  std::string row = table.substr(table.find("all data"));
  row = row.substr(0, row.find('\n'));
  while (row.find("  ") != std::string::npos) row.erase(row.find("  "), 1);
  return {sums && sr, std::to_string(rubrics.size()) + " rubrics " + (sums ? "all total 8" : "NOT all 8") +
                          "; row \"" + row + "\""};
}

Outcome c11_determinism(const Context& ctx, const PipelineOutput& first) {
  run_pipeline(ctx, ctx.work / "run2");
  const auto a = tree_hashes(first.root);
  const auto b = tree_hashes(ctx.work / "run2");
  std::string first_diff;
  for (const auto& [path, h] : a) {
    const auto it = b.find(path);
    if (it == b.end() || it->second != h) {
      first_diff = path;
      break;
    }
  }
  if (first_diff.empty() && a.size() != b.size()) first_diff = "(file set differs)";
  return {first_diff.empty(), std::to_string(a.size()) + " files compared" +
                                  (first_diff.empty() ? ", byte-identical" : ", first difference " + first_diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"h2r acceptance suite"};
  Context ctx;
  ctx.data = H2R_TEST_DATA_DIR;
  std::string only;
  bool keep = false;
  app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::Range(1, 256));
  app.add_option("--data-dir", ctx.data, "Bundled data directory");
  app.add_option("--work", ctx.work, "Scratch directory (default: a fresh temp dir)");
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  for (std::size_t pos = 0; !only.empty() && pos <= only.size();) {
    const auto comma = std::min(only.find(',', pos), only.size());
    selected.insert(std::stoi(only.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  if (ctx.work.empty()) {
    Rng rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
    ctx.work = fs::temp_directory_path() / ("h2r_acceptance_" + hex64(rng.next_u64()));
  }
  fs::create_directories(ctx.work);

  int failures = 0;
  try {
    ctx.model = HandModel::load(ctx.data / "hand" / "inspire6_approx.hand");
    std::optional<PipelineOutput> pipe;
    if (wanted(2) || wanted(3) || wanted(6) || wanted(11)) pipe = run_pipeline(ctx, ctx.work / "run1");

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"cotraining weight", [] { return c1_weights(); }},
        {"replayability", [&] { return c2_replayability(*pipe); }},
        {"slowdown", [&] { return c3_slowdown(*pipe); }},
        {"calibration chain", [] { return c4_calibration(); }},
        {"retargeting", [&] { return c5_retarget(ctx); }},
        {"normalization", [&] { return c6_normalization(*pipe, ctx.threads); }},
        {"sampler", [] { return c7_sampler(); }},
        {"mechanism experiment", [&] { return c8_mechanism(ctx.threads); }},
        {"geometry/kinematics", [&] { return c9_geometry(ctx); }},
        {"score aggregator", [&] { return c10_scoring(ctx); }},
        {"determinism", [&] { return c11_determinism(ctx, *pipe); }},
    };
    for (std::size_t i = 0; i < criteria.size(); ++i) {
      const int id = static_cast<int>(i) + 1;
      if (!wanted(id)) continue;
      const auto t0 = std::chrono::steady_clock::now();
      Outcome o;
      try {
        o = criteria[i].second();
      } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("[%s] %2d %-22s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                  o.detail.c_str(), secs);
      std::fflush(stdout);
      failures += o.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::printf("acceptance: setup failed: %s\n", e.what());
    failures = 1;
  }
  if (!keep) fs::remove_all(ctx.work);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
