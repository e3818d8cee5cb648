// h2r: command-line front end for the human-to-robot data pipeline.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "h2r/calibration.hpp"
#include "h2r/cotrain.hpp"
#include "h2r/dataset.hpp"
#include "h2r/error.hpp"
#include "h2r/evalscore.hpp"
#include "h2r/mechanism.hpp"
#include "h2r/normalize.hpp"
#include "h2r/replay.hpp"
#include "h2r/synth.hpp"
#include "h2r/transform.hpp"
#include "h2r/util.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

// Flags shared by every subcommand.
void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for randomized steps (commands without randomness ignore it)");
  cmd->add_option("--threads", c.threads, "Worker threads; results do not depend on the count")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
}

fs::path data_dir() {
  if (const char* env = std::getenv("H2R_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return H2R_DEFAULT_DATA_DIR;
}

fs::path default_model() { return data_dir() / "hand" / "inspire6_approx.hand"; }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<h2r::Episode> load_all(const h2r::Dataset& ds, int threads) {
  std::vector<h2r::Episode> out(ds.size());
  h2r::parallel_for(ds.size(), threads, [&](std::size_t i) { out[i] = ds.load(i); });
  return out;
}

void print_ingest(const h2r::IngestResult& r, const h2r::DatasetIndex& idx, const fs::path& out) {
  std::size_t frames = 0, dropped = 0;
  for (const auto& e : r.episodes) {
    frames += e.frames.size();
    dropped += e.provenance.dropped_frames;
  }
  std::cout << "ingested " << r.episodes.size() << " episodes (" << frames << " frames, " << dropped
            << " dropped frames) into " << out.string() << "\n";
  for (const auto& rej : r.rejected) std::cout << "rejected " << rej.id << ": " << rej.reason << "\n";
  std::cout << "dataset now holds " << idx.n_human << " human and " << idx.n_robot << " robot episodes\n";
}

// ---- subcommands ---------------------------------------------------------

struct CalibrateArgs {
  Common c;
  fs::path session, out;
};

int run_calibrate(const CalibrateArgs& a) {
  auto session = h2r::CalibrationSession::load(a.session);
  if (a.c.seed) session.plane_options.seed = *a.c.seed;
  const auto result = h2r::calibrate(session);
  result.save(a.out);
  std::cout << "calibration " << result.id << ": reprojection rms " << fixed(result.residual_px, 4)
            << " px (initial " << fixed(result.initial_residual_px, 4) << " px), anchor-plane distance "
            << fixed(result.anchor_plane_distance * 1000.0, 3) << " mm\n";
  for (const auto& w : result.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

struct IngestHumanArgs {
  Common c;
  fs::path dir, cal, out, model;
  bool no_retarget = false;
  double smoothness = 0.05;
  double scale = 1.0;
};

int run_ingest_human(const IngestHumanArgs& a) {
  const auto cal = h2r::CalibrationResult::load(a.cal);
  std::optional<h2r::HandModel> model;
  h2r::HumanIngestOptions opt;
  opt.threads = a.c.threads;
  if (!a.no_retarget) {
    model = h2r::HandModel::load(a.model.empty() ? default_model() : a.model);
    opt.model = &*model;
    opt.retarget.smoothness = a.smoothness;
    opt.retarget.scale = a.scale;
  }
  const auto r = h2r::ingest_human_raw(a.dir, cal, opt);
  if (r.episodes.empty()) throw h2r::ValidationError("no episode survived ingestion");
  const auto idx = h2r::write_dataset(r.episodes, a.out);
  print_ingest(r, idx, a.out);
  return 0;
}

struct IngestRobotArgs {
  Common c;
  fs::path dir, extrinsic, out;
};

int run_ingest_robot(const IngestRobotArgs& a) {
  const auto r = h2r::ingest_robot_raw(a.dir, h2r::load_extrinsic(a.extrinsic), a.c.threads);
  if (r.episodes.empty()) throw h2r::ValidationError("no episode survived ingestion");
  const auto idx = h2r::write_dataset(r.episodes, a.out);
  print_ingest(r, idx, a.out);
  return 0;
}

struct TransformArgs {
  Common c;
  fs::path dataset, out;
  h2r::ChunkSpec spec;
  bool abs_pose = false;
};

int run_transform(TransformArgs a) {
  a.spec.pose_mode = a.abs_pose ? h2r::PoseMode::kAbsolute : h2r::PoseMode::kRelative;
  const auto ds = h2r::Dataset::open(a.dataset);
  const auto idx = h2r::export_samples(ds, a.spec, a.out, a.c.threads);
  std::size_t n = 0;
  for (const auto& s : idx.shards) n += s.n_samples;
  std::cout << "wrote " << n << " samples from " << idx.shards.size() << " episodes to " << a.out.string()
            << " (t_p " << a.spec.t_p << ", t_a " << a.spec.t_a << ", " << h2r::to_string(a.spec.pose_mode)
            << " pose, human slowdown " << h2r::format_double(a.spec.slowdown) << ")\n";
  return 0;
}

struct NormalizeArgs {
  Common c;
  fs::path samples, out;
  bool per_domain = false;
};

int run_normalize(const NormalizeArgs& a) {
  const auto set = h2r::read_samples(a.samples);
  const auto mode = a.per_domain ? h2r::NormMode::kPerDomain : h2r::NormMode::kUnified;
  const auto stats = h2r::fit_stats(set.samples, mode, a.c.threads, h2r::fnv1a64(set.index.to_json()));
  stats.save(a.out);
  std::cout << "fitted " << h2r::to_string(mode) << " statistics over " << set.samples.size() << " samples ("
            << stats.unified.proprio.count << " proprio rows, " << stats.unified.action.count << " action rows) -> "
            << a.out.string() << "\n";
  for (const int d : stats.unified.action.replaced_dims) {
    std::cout << "note: action dim " << d << " has near-zero spread; its std is set to 1\n";
  }
  return 0;
}

struct ReplayArgs {
  Common c;
  fs::path dataset, limits, chunk, model, json;
  double slowdown = 2.25;
  bool no_joint_limits = false;
};

int run_replay(const ReplayArgs& a) {
  const auto limits = h2r::ReplayLimits::load(a.limits.empty() ? data_dir() / "replay_limits.json" : a.limits);
  const auto ds = h2r::Dataset::open(a.dataset);
  std::optional<h2r::HandModel> model;
  if (!a.no_joint_limits) model = h2r::HandModel::load(a.model.empty() ? default_model() : a.model);

  std::optional<h2r::SampleSet> samples;
  h2r::ChunkSpec spec;
  spec.slowdown = a.slowdown;
  if (!a.chunk.empty()) {
    samples = h2r::read_samples(a.chunk);
    spec = samples->index.spec;
  }

  const auto raw = load_all(ds, a.c.threads);
  std::vector<h2r::Episode> processed(raw.size());
  h2r::parallel_for(raw.size(), a.c.threads,
                    [&](std::size_t i) { processed[i] = h2r::process_episode(raw[i], spec); });
  const auto reports = h2r::check_episodes(processed, limits, model ? &*model : nullptr, a.c.threads);

  bool ok = true;
  Json eps = Json::array();
  for (const auto& r : reports) {
    ok = ok && r.pass();
    std::cout << (r.pass() ? "PASS " : "FAIL ") << r.episode_id << "  frames " << r.n_frames << "  max v "
              << fixed(r.max_linear_speed, 4) << " m/s  max w " << fixed(r.max_angular_speed, 4)
              << " rad/s  max joint " << fixed(r.max_joint_speed, 4) << " rad/s\n";
    Json viol = Json::array();
    for (const auto& v : r.violations) {
      std::cout << "  " << h2r::to_string(v.kind) << " at frame " << v.frame << ": " << h2r::format_double(v.value);
      if (v.limit > 0.0) std::cout << " > " << h2r::format_double(v.limit);
      std::cout << "\n";
      viol.push_back(Json{{"kind", std::string(h2r::to_string(v.kind))},
                          {"frame", v.frame},
                          {"value", v.value},
                          {"limit", v.limit}});
    }
    eps.push_back(Json{{"episode", r.episode_id},
                       {"pass", r.pass()},
                       {"max_linear_speed", r.max_linear_speed},
                       {"max_angular_speed", r.max_angular_speed},
                       {"max_joint_speed", r.max_joint_speed},
                       {"violations", viol}});
  }

  Json chunk = nullptr;
  if (samples) {
    // Shards are grouped by episode; match them to the processed episodes.
    std::map<std::string, std::vector<h2r::TrainingSample>> by_episode;
    for (const auto& s : samples->samples) by_episode[s.episode_id].push_back(s);
    double max_pos = 0.0, max_rot = 0.0, max_joint = 0.0, max_pad = 0.0;
    std::size_t rows = 0, padded = 0, bad = 0;
    for (const auto& ep : processed) {
      const auto it = by_episode.find(ep.id);
      if (it == by_episode.end()) throw h2r::ValidationError("samples contain no shard for episode " + ep.id);
      const auto rep = h2r::chunk_reconstruction_check(it->second, ep, spec.pose_mode);
      rows += rep.rows_checked;
      padded += rep.padded_rows;
      max_pos = std::max(max_pos, rep.max_position_error);
      max_rot = std::max(max_rot, rep.max_rotation_error);
      max_joint = std::max(max_joint, rep.max_joint_error);
      max_pad = std::max(max_pad, rep.max_padded_error);
      for (const auto& e : rep.over_tolerance) {
        ++bad;
        std::cout << "  chunk mismatch " << ep.id << " sample " << e.sample << " row " << e.row << ": position "
                  << h2r::format_double(e.position) << " m, rotation " << h2r::format_double(e.rotation) << " rad\n";
      }
    }
    const bool chunk_ok = bad == 0;
    ok = ok && chunk_ok;
    std::cout << (chunk_ok ? "PASS " : "FAIL ") << "chunk reconstruction (" << h2r::to_string(spec.pose_mode)
              << "): " << rows << " rows, max position " << h2r::format_double(max_pos) << " m, max rotation "
              << h2r::format_double(max_rot) << " rad; " << padded << " padded rows excluded (max position "
              << h2r::format_double(max_pad) << " m)\n";
    chunk = Json{{"mode", std::string(h2r::to_string(spec.pose_mode))},
                 {"pass", chunk_ok},
                 {"rows", rows},
                 {"padded_rows", padded},
                 {"max_position_error", max_pos},
                 {"max_rotation_error", max_rot},
                 {"max_joint_error", max_joint},
                 {"max_padded_position_error", max_pad}};
  }

  std::size_t failed = 0;
  for (const auto& r : reports) failed += r.pass() ? 0 : 1;
  std::cout << (ok ? "PASS" : "FAIL") << ": " << reports.size() - failed << "/" << reports.size()
            << " episodes within limits\n";
  if (!a.json.empty()) {
    h2r::write_text_file(a.json, Json{{"format", "h2r-replay-report/1"},
                                      {"pass", ok},
                                      {"slowdown", spec.slowdown},
                                      {"episodes", eps},
                                      {"chunk", chunk}}
                                     .dump(2) +
                                     "\n");
  }
  return ok ? 0 : 1;
}

struct WeightsArgs {
  Common c;
  fs::path dataset;
};

int run_weights(const WeightsArgs& a) {
  const auto w = h2r::compute_weights(h2r::read_index(a.dataset));
  std::cout << "human episodes  " << w.n_human << "\n"
            << "robot episodes  " << w.n_robot << "\n"
            << "alpha           " << fixed(w.alpha, 5) << " (" << h2r::format_double(w.alpha) << ")\n"
            << "robot weight    " << h2r::format_double(w.robot_weight) << "\n"
            << "human weight    " << h2r::format_double(w.human_weight) << "\n"
            << "robot share     " << h2r::format_double(w.robot_share()) << "\n"
            << "human share     " << h2r::format_double(w.human_share()) << "\n";
  return 0;
}

struct MechanismArgs {
  Common c;
  std::vector<std::string> subset;
  int seeds = 1;
  int steps = 0;
  fs::path json;
};

int run_mechanism(const MechanismArgs& a) {
  h2r::HeightTaskSpec spec;
  if (a.steps > 0) spec.train.steps = a.steps;
  const std::uint64_t base = a.c.seed.value_or(0);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < a.seeds; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  const auto subsets = a.subset.empty() ? h2r::default_mechanism_subsets(spec)
                                        : std::vector<std::vector<std::string>>{a.subset};
  const auto report = h2r::run_mechanism_suite(spec, subsets, seeds, a.c.threads);
  std::cout << report.to_table();
  if (!a.json.empty()) h2r::write_text_file(a.json, report.to_json());
  return 0;
}

struct ScoreArgs {
  Common c;
  fs::path rubrics, annotations, json;
};

int run_score(const ScoreArgs& a) {
  const fs::path rubric_dir = a.rubrics.empty() ? data_dir() / "rubrics" : a.rubrics;
  const auto rubrics = h2r::load_rubrics(rubric_dir, a.rubrics.empty());
  const auto report = h2r::score_annotations(rubrics, h2r::load_annotations(a.annotations));
  std::map<std::string, std::string> titles;
  for (const auto& r : rubrics) titles[r.task_id] = r.title;
  std::cout << report.to_table(titles);
  if (!a.json.empty()) h2r::write_text_file(a.json, report.to_json());
  return 0;
}

struct StatArgs {
  Common c;
  fs::path dataset;
};

int run_stat(const StatArgs& a) {
  const auto idx = h2r::read_index(a.dataset);
  struct Row {
    std::size_t episodes = 0, frames = 0;
  };
  std::map<std::pair<std::string, std::string>, Row> rows;
  for (const auto& e : idx.episodes) {
    auto& r = rows[{std::string(h2r::to_string(e.domain)), e.task_id}];
    ++r.episodes;
    r.frames += e.n_frames;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-6s %-28s %9s %9s %12s\n", "domain", "task", "episodes", "frames", "instructions");
  std::cout << buf;
  for (const auto& [key, r] : rows) {
    const auto t = idx.tasks.find(key.second);
    const std::size_t n_instr = t == idx.tasks.end() ? 0 : t->second.size();
    std::snprintf(buf, sizeof(buf), "%-6s %-28s %9zu %9zu %12zu\n", key.first.c_str(), key.second.c_str(), r.episodes,
                  r.frames, n_instr);
    std::cout << buf;
  }
  std::cout << "total: " << idx.n_human << " human episodes, " << idx.n_robot << " robot episodes, "
            << idx.tasks.size() << " tasks\n";
  return 0;
}

struct SynthArgs {
  Common c;
  fs::path config, out, model;
};

int run_synth(const SynthArgs& a) {
  auto cfg = h2r::SynthCorpusConfig::load(a.config.empty() ? data_dir() / "synthetic" / "corpus.json" : a.config);
  if (a.c.seed) cfg.seed = *a.c.seed;
  const auto model = h2r::HandModel::load(a.model.empty() ? default_model() : a.model);
  const auto corpus = h2r::make_synth_corpus(model, cfg);
  h2r::write_synth_corpus(corpus, model, a.out);
  std::cout << "wrote " << corpus.human.size() << " human and " << corpus.robot.size()
            << " robot raw episodes plus a calibration session to " << a.out.string() << "\n";
  return 0;
}

struct SynthIndexArgs {
  Common c;
  std::size_t human = 1705, robot = 1508;
  fs::path out;
};

int run_synth_index(const SynthIndexArgs& a) {
  const auto idx = h2r::make_counts_index(a.human, a.robot);
  h2r::write_text_file(a.out, idx.to_json());
  std::cout << "wrote index with " << idx.n_human << " human and " << idx.n_robot << " robot entries to "
            << a.out.string() << "\n";
  return 0;
}

struct ValidateArgs {
  Common c;
  fs::path dataset, model;
  bool no_joint_limits = false;
};

int run_validate(const ValidateArgs& a) {
  const auto ds = h2r::Dataset::open(a.dataset);
  std::optional<h2r::HandModel> model;
  if (!a.no_joint_limits) model = h2r::HandModel::load(a.model.empty() ? default_model() : a.model);
  const auto eps = load_all(ds, a.c.threads);
  std::size_t frames = 0;
  for (const auto& e : eps) {
    e.validate(model ? &*model : nullptr);
    frames += e.frames.size();
  }
  std::cout << "ok: " << eps.size() << " episodes, " << frames << " frames\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-to-robot manipulation data pipeline"};
  app.name("h2r");
  app.require_subcommand(1);
  int status = 0;

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Solve the camera/VR calibration chain for one session");
  c_cal->add_option("session", cal.session, "Calibration session file")->required()->check(CLI::ExistingFile);
  c_cal->add_option("-o,--out", cal.out, "Output calibration result file")->required();
  add_common(c_cal, cal.c);
  c_cal->callback([&] { status = run_calibrate(cal); });

  IngestHumanArgs ih;
  auto* c_ih = app.add_subcommand("ingest-human", "Ingest a raw human session into a dataset");
  c_ih->add_option("dir", ih.dir, "Raw human session directory")->required()->check(CLI::ExistingDirectory);
  c_ih->add_option("--cal", ih.cal, "Calibration result file")->required()->check(CLI::ExistingFile);
  c_ih->add_option("-o,--out", ih.out, "Dataset directory (created or merged)")->required();
  c_ih->add_option("--model", ih.model, "Hand model file (default: bundled model)");
  c_ih->add_flag("--no-retarget", ih.no_retarget, "Keep hand joints at zero instead of retargeting");
  c_ih->add_option("--smoothness", ih.smoothness, "Retargeting weight on frame-to-frame joint change")
      ->capture_default_str();
  c_ih->add_option("--scale", ih.scale, "Human-to-robot hand scale for task vectors")->capture_default_str();
  add_common(c_ih, ih.c);
  c_ih->callback([&] { status = run_ingest_human(ih); });

  IngestRobotArgs ir;
  auto* c_ir = app.add_subcommand("ingest-robot", "Ingest a raw robot session into a dataset");
  c_ir->add_option("dir", ir.dir, "Raw robot session directory")->required()->check(CLI::ExistingDirectory);
  c_ir->add_option("--extrinsic", ir.extrinsic, "Robot base to camera extrinsic file")
      ->required()
      ->check(CLI::ExistingFile);
  c_ir->add_option("-o,--out", ir.out, "Dataset directory (created or merged)")->required();
  add_common(c_ir, ir.c);
  c_ir->callback([&] { status = run_ingest_robot(ir); });

  TransformArgs tr;
  auto* c_tr = app.add_subcommand("transform", "Slow down human episodes and cut training samples");
  c_tr->add_option("dataset", tr.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_tr->add_option("-o,--out", tr.out, "Sample directory")->required();
  c_tr->add_option("--slowdown", tr.spec.slowdown, "Time stretch applied to human episodes")->capture_default_str();
  c_tr->add_option("--tp", tr.spec.t_p, "Proprioception history length")->capture_default_str();
  c_tr->add_option("--ta", tr.spec.t_a, "Action chunk length")->capture_default_str();
  c_tr->add_option("--fps", tr.spec.fps, "Control rate recorded with the samples")->capture_default_str();
  c_tr->add_flag("--abs-pose", tr.abs_pose, "Store absolute camera-frame action poses instead of relative ones");
  add_common(c_tr, tr.c);
  c_tr->callback([&] { status = run_transform(tr); });

  NormalizeArgs nm;
  auto* c_nm = app.add_subcommand("normalize", "Fit normalization statistics over a sample set");
  c_nm->add_option("samples", nm.samples, "Sample directory")->required()->check(CLI::ExistingDirectory);
  c_nm->add_option("-o,--out", nm.out, "Output statistics file")->required();
  c_nm->add_flag("--per-domain", nm.per_domain, "Fit separate human and robot statistics");
  add_common(c_nm, nm.c);
  c_nm->callback([&] { status = run_normalize(nm); });

  ReplayArgs rp;
  auto* c_rp = app.add_subcommand("replay-check", "Check processed episodes against workspace and speed limits");
  c_rp->add_option("dataset", rp.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_rp->add_option("--limits", rp.limits, "Limits file (default: bundled placeholder limits)")
      ->check(CLI::ExistingFile);
  c_rp->add_option("--chunk", rp.chunk, "Sample directory to verify chunk reconstruction against")
      ->check(CLI::ExistingDirectory);
  c_rp->add_option("--slowdown", rp.slowdown, "Human slowdown to apply before checking (ignored with --chunk)")
      ->capture_default_str();
  c_rp->add_option("--model", rp.model, "Hand model for joint limits (default: bundled model)");
  c_rp->add_flag("--no-joint-limits", rp.no_joint_limits, "Skip the joint limit check");
  c_rp->add_option("--json", rp.json, "Also write a machine-readable report");
  add_common(c_rp, rp.c);
  c_rp->callback([&] { status = run_replay(rp); });

  WeightsArgs cw;
  auto* c_cw = app.add_subcommand("cotrain-weights", "Print the cotraining mixture weight and per-sample weights");
  c_cw->add_option("dataset", cw.dataset, "Dataset directory or index file")->required()->check(CLI::ExistingPath);
  add_common(c_cw, cw.c);
  c_cw->callback([&] { status = run_weights(cw); });

  MechanismArgs mech;
  auto* c_me = app.add_subcommand("toy-mechanism", "Run the toy placement-height cotraining experiment");
  c_me->add_option("--subset", mech.subset, "Comma-separated task ids (default: all four standard subsets)")
      ->delimiter(',');
  c_me->add_option("--seeds", mech.seeds, "Number of consecutive seeds starting at --seed")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  c_me->add_option("--steps", mech.steps, "Training steps (default: 2000)")->check(CLI::Range(1, 1000000));
  c_me->add_option("--json", mech.json, "Also write a machine-readable report");
  add_common(c_me, mech.c);
  c_me->callback([&] { status = run_mechanism(mech); });

  ScoreArgs sc;
  auto* c_sc = app.add_subcommand("score", "Score rollout annotations with stage rubrics");
  c_sc->add_option("--rubrics", sc.rubrics, "Rubric directory (default: bundled rubrics)")
      ->check(CLI::ExistingDirectory);
  c_sc->add_option("--annotations", sc.annotations, "Annotation directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_sc->add_option("--json", sc.json, "Also write a machine-readable report");
  add_common(c_sc, sc.c);
  c_sc->callback([&] { status = run_score(sc); });

  StatArgs st;
  auto* c_st = app.add_subcommand("stat", "Print per-task episode counts");
  c_st->add_option("dataset", st.dataset, "Dataset directory or index file")->required()->check(CLI::ExistingPath);
  add_common(c_st, st.c);
  c_st->callback([&] { status = run_stat(st); });

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "Generate the synthetic raw corpus with known ground truth");
  c_sy->add_option("-o,--out", sy.out, "Output directory")->required();
  c_sy->add_option("--config", sy.config, "Corpus config (default: bundled synthetic/corpus.json)")
      ->check(CLI::ExistingFile);
  c_sy->add_option("--model", sy.model, "Hand model (default: bundled model)");
  add_common(c_sy, sy.c);
  c_sy->callback([&] { status = run_synth(sy); });

  SynthIndexArgs si;
  auto* c_si = app.add_subcommand("synth-index", "Write an index-only dataset with given episode counts");
  c_si->add_option("--human", si.human, "Human episode count")->capture_default_str();
  c_si->add_option("--robot", si.robot, "Robot episode count")->capture_default_str();
  c_si->add_option("-o,--out", si.out, "Output index file")->required();
  add_common(c_si, si.c);
  c_si->callback([&] { status = run_synth_index(si); });

  ValidateArgs va;
  auto* c_va = app.add_subcommand("validate", "Load and validate every episode of a dataset");
  c_va->add_option("dataset", va.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_va->add_option("--model", va.model, "Hand model for joint limits (default: bundled model)");
  c_va->add_flag("--no-joint-limits", va.no_joint_limits, "Skip the joint limit check");
  add_common(c_va, va.c);
  c_va->callback([&] { status = run_validate(va); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const h2r::Error& e) {
    std::cerr << "h2r: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "h2r: error: " << e.what() << "\n";
    return 1;
  }
  return status;
}
