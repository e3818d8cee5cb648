#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "h2r/dataset.hpp"
#include "h2r/error.hpp"
#include "h2r/synth.hpp"
#include "test_support.hpp"

namespace h2r {
namespace {

namespace fs = std::filesystem;
using test::bundled_model;
using test::TempDir;

void expect_same_frames(const Episode& a, const Episode& b) {
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    const auto& x = a.frames[i];
    const auto& y = b.frames[i];
    EXPECT_EQ(x.timestamp, y.timestamp);
    EXPECT_EQ(x.image_ref, y.image_ref);
    EXPECT_EQ(x.wrist_pose.position(), y.wrist_pose.position());
    EXPECT_EQ(x.wrist_pose.orientation().coeffs(), y.wrist_pose.orientation().coeffs());
    EXPECT_EQ(x.hand_joints, y.hand_joints);
    ASSERT_EQ(x.keypoints.has_value(), y.keypoints.has_value());
    if (x.keypoints) {
      for (int k = 0; k < kHandKeypoints; ++k) EXPECT_EQ((*x.keypoints)[k], (*y.keypoints)[k]);
    }
  }
}

TEST(Frames, EncodeDecodeIsBitExact) {
  for (const Domain d : {Domain::kHuman, Domain::kRobot}) {
    const Episode e = test::synth_episode("e1", d, 1);
    const auto bytes = encode_frames(e);
    const std::size_t stride = d == Domain::kHuman ? kFrameStrideKeypoints : kFrameStrideBase;
    EXPECT_EQ(bytes.size(), 32 + 8 * stride * e.frames.size());
    Episode back = e;
    back.frames.clear();
    std::vector<std::string> refs(e.frames.size());
    decode_frames(bytes, refs, back);
    expect_same_frames(e, back);
  }
}

TEST(Frames, CorruptionIsDetected) {
  const Episode e = test::synth_episode("e1", Domain::kHuman, 2);
  auto bytes = encode_frames(e);
  std::vector<std::string> refs(e.frames.size());
  Episode out = e;
  auto flipped = bytes;
  flipped[100] ^= std::byte{0x01};
  EXPECT_THROW(decode_frames(flipped, refs, out), FormatError);
  auto magic = bytes;
  magic[0] = std::byte{'X'};
  EXPECT_THROW(decode_frames(magic, refs, out), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 8);
  EXPECT_THROW(decode_frames(truncated, refs, out), FormatError);
  std::vector<std::string> short_refs(e.frames.size() - 1);
  EXPECT_THROW(decode_frames(bytes, short_refs, out), FormatError);
}

TEST(Meta, RoundTrip) {
  Episode e = test::synth_episode("meta-1", Domain::kHuman, 3);
  e.provenance.slowdown_factor = 1.0;
  e.provenance.retarget_config_hash = 0x0123456789abcdefULL;
  e.provenance.dropped_frames = 2;
  std::vector<std::string> refs;
  const Episode back = decode_meta(encode_meta(e), refs);
  EXPECT_EQ(back.id, e.id);
  EXPECT_EQ(back.domain, e.domain);
  EXPECT_EQ(back.task_id, e.task_id);
  EXPECT_EQ(back.instruction, e.instruction);
  EXPECT_EQ(back.scene_tag, e.scene_tag);
  EXPECT_EQ(back.fps, e.fps);
  EXPECT_EQ(back.image_width, 1280);
  EXPECT_EQ(back.provenance, e.provenance);
  EXPECT_EQ(refs.size(), e.frames.size());
}

TEST(Episode, ValidationRules) {
  const Episode good = test::synth_episode("ok", Domain::kHuman, 4);
  EXPECT_NO_THROW(good.validate(&bundled_model()));

  Episode e = good;
  e.id = "bad/id";
  EXPECT_THROW(e.validate(), ValidationError);
  e = good;
  e.frames.resize(1);
  EXPECT_THROW(e.validate(), ValidationError);
  e = good;
  e.frames[5].timestamp = e.frames[4].timestamp;
  EXPECT_THROW(e.validate(), ValidationError);
  e = good;
  e.frames[3].wrist_pose = e.frames[3].wrist_pose.with_frame(Frame::kVr);
  EXPECT_THROW(e.validate(), ValidationError);
  e = good;
  e.frames[2].keypoints.reset();
  EXPECT_THROW(e.validate(), ValidationError);
  e = good;
  e.frames[2].hand_joints[0] = 5.0;
  EXPECT_NO_THROW(e.validate());
  EXPECT_THROW(e.validate(&bundled_model()), ValidationError);
  e = good;
  e.fps = 0.0;
  EXPECT_THROW(e.validate(), ValidationError);
}

TEST(Dataset, WriteOpenLoadRoundTrip) {
  TempDir tmp("dataset_rt");
  const std::vector<Episode> eps{test::synth_episode("h1", Domain::kHuman, 5), test::synth_episode("r1", Domain::kRobot, 6),
                                 test::synth_episode("h0", Domain::kHuman, 7)};
  const auto idx = write_dataset(eps, tmp.path());
  EXPECT_EQ(idx.n_human, 2u);
  EXPECT_EQ(idx.n_robot, 1u);
  ASSERT_EQ(idx.episodes.size(), 3u);
  EXPECT_EQ(idx.episodes[0].id, "h0");  // sorted by id

  const auto ds = Dataset::open(tmp.path());
  ASSERT_EQ(ds.size(), 3u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Episode got = ds.load(i);
    const auto it = std::find_if(eps.begin(), eps.end(), [&](const Episode& x) { return x.id == got.id; });
    ASSERT_NE(it, eps.end());
    expect_same_frames(*it, got);
    EXPECT_EQ(got.provenance, it->provenance);
  }
  EXPECT_EQ(read_index(tmp.path()).to_json(), idx.to_json());
  EXPECT_EQ(read_index(tmp.path() / "index.json").hash(), idx.hash());
}

TEST(Dataset, MergeReplaceAndIdempotence) {
  TempDir tmp("dataset_merge");
  write_dataset({test::synth_episode("a", Domain::kHuman, 8)}, tmp.path());
  write_dataset({test::synth_episode("b", Domain::kRobot, 9)}, tmp.path());
  auto idx = read_index(tmp.path());
  EXPECT_EQ(idx.episodes.size(), 2u);

  const std::string before = read_text_file(tmp.path() / "index.json");
  write_dataset({test::synth_episode("b", Domain::kRobot, 9)}, tmp.path());
  EXPECT_EQ(read_text_file(tmp.path() / "index.json"), before);

  write_dataset({test::synth_episode("b", Domain::kRobot, 10, 31)}, tmp.path());
  idx = read_index(tmp.path());
  EXPECT_EQ(idx.episodes.size(), 2u);
  EXPECT_EQ(idx.episodes[1].n_frames, 31u);

  EXPECT_THROW(write_dataset({test::synth_episode("c", Domain::kHuman, 1), test::synth_episode("c", Domain::kHuman, 2)}, tmp.path()),
               ValidationError);
}

TEST(Dataset, DetectsTamperedFrames) {
  TempDir tmp("dataset_tamper");
  write_dataset({test::synth_episode("a", Domain::kHuman, 11)}, tmp.path());
  const fs::path bin = tmp.path() / "episodes" / "a" / "frames.bin";
  auto bytes = read_binary_file(bin);
  bytes.back() ^= std::byte{0x40};
  write_binary_file(bin, bytes);
  const auto ds = Dataset::open(tmp.path());
  EXPECT_THROW(ds.load(0), FormatError);
}

TEST(DatasetIndex, CountsAreChecked) {
  auto idx = make_counts_index(3, 2);
  EXPECT_EQ(idx.n_human, 3u);
  EXPECT_EQ(idx.n_robot, 2u);
  EXPECT_EQ(DatasetIndex::from_json(idx.to_json()).to_json(), idx.to_json());
  idx.n_human = 4;
  EXPECT_THROW(DatasetIndex::from_json(idx.to_json()), ValidationError);
  idx.recount();
  idx.episodes[1].id = idx.episodes[0].id;
  EXPECT_THROW(idx.check_counts(), ValidationError);
}

TEST(DatasetIndex, BundledCountsIndex) {
  const auto idx = read_index(test::data_dir() / "corpus" / "counts_index.json");
  EXPECT_EQ(idx.n_human, 1705u);
  EXPECT_EQ(idx.n_robot, 1508u);
}

TEST(Extrinsic, RoundTrip) {
  TempDir tmp("extrinsic");
  Rng rng(12);
  const Pose p = test::random_pose(rng, Frame::kCamera);
  save_extrinsic(p, tmp.path() / "x.json");
  const Pose q = load_extrinsic(tmp.path() / "x.json");
  EXPECT_EQ(p.position(), q.position());
  EXPECT_EQ(p.orientation().coeffs(), q.orientation().coeffs());
}

// ---- raw ingestion --------------------------------------------------------

struct SmallCorpus {
  TempDir dir{"ingest"};
  SynthCorpus corpus;
  SmallCorpus() {
    SynthCorpusConfig cfg;
    cfg.human_episodes = 3;
    cfg.robot_episodes = 2;
    cfg.frames_min = 21;
    cfg.frames_max = 29;
    corpus = make_synth_corpus(bundled_model(), cfg);
    write_synth_corpus(corpus, bundled_model(), dir.path());
  }
  CalibrationResult true_cal() const {
    return CalibrationResult::from_parts("truth", corpus.calibration.t_cam, corpus.calibration.t_vr);
  }
  fs::path frames(const std::string& id) const { return dir.path() / "human" / "frames" / (id + ".txt"); }
};

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text_file(p, text);
}

// Replaces every numeric field of a frame line after the image name.
std::string untracked(const std::string& line) {
  std::istringstream ls(line);
  std::string t, img, out;
  ls >> t >> img;
  out = t + " " + img;
  for (std::string tok; ls >> tok;) out += " nan";
  return out;
}

TEST(Ingest, HumanSessionWithTrueCalibration) {
  SmallCorpus c;
  HumanIngestOptions opt;
  opt.model = &bundled_model();
  opt.retarget.smoothness = 0.0;
  const auto r = ingest_human_raw(c.dir.path() / "human", c.true_cal(), opt);
  ASSERT_EQ(r.episodes.size(), 3u);
  EXPECT_TRUE(r.rejected.empty());
  for (std::size_t e = 0; e < 3; ++e) {
    const auto& ep = r.episodes[e];
    const auto& truth = c.corpus.human[e].truth;
    ASSERT_EQ(ep.frames.size(), truth.wrist.size());
    EXPECT_EQ(ep.domain, Domain::kHuman);
    EXPECT_EQ(ep.provenance.retarget_config_hash, opt.retarget.hash());
    EXPECT_EQ(ep.frames[0].image_ref, "images/f0000.pgm");
    for (std::size_t i = 0; i < truth.wrist.size(); ++i) {
      EXPECT_LT((ep.frames[i].wrist_pose.position() - truth.wrist[i].position()).norm(), 1e-9);
      EXPECT_LT(angle_between(ep.frames[i].wrist_pose.orientation(), truth.wrist[i].orientation()), 1e-9);
      EXPECT_LT((ep.frames[i].hand_joints - truth.joints[i]).cwiseAbs().maxCoeff(), 1e-4);
    }
  }
  // Images travel into the dataset.
  TempDir out("ingest_out");
  write_dataset(r.episodes, out.path());
  EXPECT_TRUE(fs::exists(out.path() / "episodes" / "h0000" / "images" / "f0003.pgm"));
}

TEST(Ingest, WithoutModelJointsStayZero) {
  SmallCorpus c;
  const auto r = ingest_human_raw(c.dir.path() / "human", c.true_cal());
  ASSERT_FALSE(r.episodes.empty());
  EXPECT_EQ(r.episodes[0].frames[3].hand_joints, JointState::Zero());
  EXPECT_EQ(r.episodes[0].provenance.retarget_config_hash, 0u);
}

TEST(Ingest, UntrackedRowsAreDroppedOrRejectEpisode) {
  SmallCorpus c;
  // h0000: one row lost. h0001: more than 20% lost.
  auto lines = read_lines(c.frames("h0000"));
  lines[5] = untracked(lines[5]);
  write_lines(c.frames("h0000"), lines);
  lines = read_lines(c.frames("h0001"));
  const std::size_t rows = lines.size() - 1;  // first line is a comment
  for (std::size_t i = 1; i <= rows / 4 + 1; ++i) lines[i] = untracked(lines[i]);
  write_lines(c.frames("h0001"), lines);

  const auto r = ingest_human_raw(c.dir.path() / "human", c.true_cal());
  ASSERT_EQ(r.episodes.size(), 2u);
  EXPECT_EQ(r.episodes[0].id, "h0000");
  EXPECT_EQ(r.episodes[0].provenance.dropped_frames, 1u);
  EXPECT_EQ(r.episodes[0].frames.size(), c.corpus.human[0].truth.wrist.size() - 1);
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].id, "h0001");
}

TEST(Ingest, NonMonotonicTimestampsNameTheRow) {
  SmallCorpus c;
  auto lines = read_lines(c.frames("h0002"));
  std::istringstream ls(lines[8]);
  std::string t;
  ls >> t;
  lines[8].replace(0, t.size(), "0");
  write_lines(c.frames("h0002"), lines);
  try {
    ingest_human_raw(c.dir.path() / "human", c.true_cal());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 7"), std::string::npos) << e.what();
  }
}

TEST(Ingest, MalformedRowsAreFormatErrors) {
  SmallCorpus c;
  auto lines = read_lines(c.frames("h0000"));
  lines[3] += " 1.0";
  write_lines(c.frames("h0000"), lines);
  EXPECT_THROW(ingest_human_raw(c.dir.path() / "human", c.true_cal()), FormatError);
  EXPECT_THROW(ingest_human_raw(c.dir.path() / "robot", c.true_cal()), FormatError);  // wrong session kind
}

TEST(Ingest, RobotSessionMapsBaseToCamera) {
  SmallCorpus c;
  const auto r = ingest_robot_raw(c.dir.path() / "robot", load_extrinsic(c.dir.path() / "robot" / "extrinsic.json"));
  ASSERT_EQ(r.episodes.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    const auto& truth = c.corpus.robot[e].truth;
    const auto& ep = r.episodes[e];
    EXPECT_EQ(ep.domain, Domain::kRobot);
    EXPECT_FALSE(ep.has_keypoints());
    for (std::size_t i = 0; i < truth.wrist.size(); ++i) {
      EXPECT_LT((ep.frames[i].wrist_pose.position() - truth.wrist[i].position()).norm(), 1e-12);
      EXPECT_LT((ep.frames[i].hand_joints - truth.joints[i]).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(Ingest, ThreadCountDoesNotChangeOutput) {
  SmallCorpus c;
  HumanIngestOptions a;
  a.model = &bundled_model();
  HumanIngestOptions b = a;
  b.threads = 4;
  const auto x = ingest_human_raw(c.dir.path() / "human", c.true_cal(), a);
  const auto y = ingest_human_raw(c.dir.path() / "human", c.true_cal(), b);
  ASSERT_EQ(x.episodes.size(), y.episodes.size());
  for (std::size_t i = 0; i < x.episodes.size(); ++i) EXPECT_EQ(encode_frames(x.episodes[i]), encode_frames(y.episodes[i]));
}

}  // namespace
}  // namespace h2r
