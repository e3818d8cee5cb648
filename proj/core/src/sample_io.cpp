#include <algorithm>
#include <optional>

#include "h2r/error.hpp"
#include "h2r/transform.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

namespace fs = std::filesystem;
using detail::Json;

constexpr std::string_view kSamplesMagic = "H2RSMP1";
constexpr std::size_t kMagicBytes = 8;

std::string padded_magic() {
  std::string m(kSamplesMagic);
  m.resize(kMagicBytes, '\0');
  return m;
}

}  // namespace

std::vector<std::byte> encode_samples(const std::vector<TrainingSample>& samples, const ChunkSpec& spec) {
  spec.validate();
  ByteWriter body;
  for (const auto& s : samples) {
    if (s.proprio.rows() != spec.t_p || s.action.rows() != spec.t_a ||
        s.pad_mask.size() != static_cast<std::size_t>(spec.t_a)) {
      throw InvalidArgument("encode_samples: sample shape differs from the chunk spec");
    }
    if (s.pose_mode != spec.pose_mode) throw InvalidArgument("encode_samples: pose mode differs from spec");
    body.put_string(s.episode_id);
    body.put_u32(s.t);
    body.put_string(s.image_ref);
    body.put_string(s.task_id);
    body.put_u8(s.domain == Domain::kHuman ? 0 : 1);
    body.put_string(s.instruction);
    for (Eigen::Index i = 0; i < s.proprio.size(); ++i) body.put_f64(s.proprio.data()[i]);
    for (Eigen::Index i = 0; i < s.action.size(); ++i) body.put_f64(s.action.data()[i]);
    for (const auto m : s.pad_mask) body.put_u8(m);
  }
  ByteWriter out;
  out.put_raw(padded_magic());
  out.put_u32(static_cast<std::uint32_t>(spec.t_p));
  out.put_u32(static_cast<std::uint32_t>(spec.t_a));
  out.put_u32(kStateDim);
  out.put_u32(spec.pose_mode == PoseMode::kRelative ? 0u : 1u);
  out.put_f64(spec.fps);
  out.put_f64(spec.slowdown);
  out.put_u64(samples.size());
  out.put_u64(fnv1a64(body.bytes()));
  out.put_bytes(body.bytes());
  return out.take();
}

std::vector<TrainingSample> decode_samples(std::span<const std::byte> bytes, ChunkSpec* spec_out) {
  ByteReader r(bytes);
  const auto magic = r.get_bytes(kMagicBytes);
  const std::string expected = padded_magic();
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::byte*>(expected.data()))) {
    throw FormatError("sample shard: bad magic or unsupported version");
  }
  ChunkSpec spec;
  spec.t_p = static_cast<int>(r.get_u32());
  spec.t_a = static_cast<int>(r.get_u32());
  if (r.get_u32() != kStateDim) throw FormatError("sample shard: unexpected state dimension");
  const auto mode = r.get_u32();
  if (mode > 1) throw FormatError("sample shard: unknown pose mode");
  spec.pose_mode = mode == 0 ? PoseMode::kRelative : PoseMode::kAbsolute;
  spec.fps = r.get_f64();
  spec.slowdown = r.get_f64();
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("sample shard: ") + e.what());
  }
  const std::uint64_t n = r.get_u64();
  const std::uint64_t checksum = r.get_u64();
  if (fnv1a64(bytes.subspan(r.position())) != checksum) throw FormatError("sample shard: checksum mismatch");

  std::vector<TrainingSample> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    TrainingSample s;
    s.episode_id = r.get_string();
    s.t = r.get_u32();
    s.image_ref = r.get_string();
    s.task_id = r.get_string();
    const auto d = r.get_u8();
    if (d > 1) throw FormatError("sample shard: bad domain byte");
    s.domain = d == 0 ? Domain::kHuman : Domain::kRobot;
    s.instruction = r.get_string();
    s.pose_mode = spec.pose_mode;
    s.proprio.resize(spec.t_p, kStateDim);
    for (Eigen::Index k = 0; k < s.proprio.size(); ++k) s.proprio.data()[k] = r.get_f64();
    s.action.resize(spec.t_a, kStateDim);
    for (Eigen::Index k = 0; k < s.action.size(); ++k) s.action.data()[k] = r.get_f64();
    s.pad_mask.resize(static_cast<std::size_t>(spec.t_a));
    for (auto& m : s.pad_mask) m = r.get_u8();
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError("sample shard: trailing bytes");
  if (spec_out != nullptr) *spec_out = spec;
  return out;
}

std::string SampleIndex::to_json() const {
  Json shard_list = Json::array();
  for (const auto& s : shards) {
    shard_list.push_back(Json{{"file", s.file},
                              {"episode", s.episode_id},
                              {"domain", std::string(to_string(s.domain))},
                              {"n_samples", s.n_samples},
                              {"checksum", hex64(s.checksum)}});
  }
  Json crop_list = Json::object();
  for (const auto& [id, c] : crops) {
    crop_list[id] = Json{{"source", Json::array({c.src_width, c.src_height})},
                         {"origin", Json::array({c.crop_x, c.crop_y})}};
  }
  const Json j{{"format", "h2r-samples/1"},
               {"t_p", spec.t_p},
               {"t_a", spec.t_a},
               {"fps", spec.fps},
               {"pose_mode", std::string(to_string(spec.pose_mode))},
               {"slowdown", spec.slowdown},
               {"relative_pose_convention", "base_inverse_target"},
               {"state_layout", "pos[3] rot6d[6] joints[6]"},
               {"source_index_hash", hex64(source_index_hash)},
               {"image_transform",
                Json{{"crop", Json::array({640, 480})},
                     {"resize", Json::array({224, 224})},
                     {"interpolation", "bilinear"},
                     {"align_corners", false}}},
               {"crops", crop_list},
               {"shards", shard_list}};
  return detail::dump_json(j);
}

SampleIndex SampleIndex::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "sample index");
  try {
    if (j.at("format").get<std::string>() != "h2r-samples/1") {
      throw FormatError("sample index: unsupported format");
    }
    SampleIndex idx;
    idx.spec.t_p = j.at("t_p").get<int>();
    idx.spec.t_a = j.at("t_a").get<int>();
    idx.spec.fps = j.at("fps").get<double>();
    idx.spec.pose_mode = pose_mode_from_string(j.at("pose_mode").get<std::string>());
    idx.spec.slowdown = j.at("slowdown").get<double>();
    idx.spec.validate();
    idx.source_index_hash = parse_hex64(j.at("source_index_hash").get<std::string>());
    for (const auto& [id, c] : j.at("crops").items()) {
      CropResize cr = crop_resize_spec(c.at("source").at(0).get<int>(), c.at("source").at(1).get<int>());
      idx.crops.emplace_back(id, cr);
    }
    for (const auto& s : j.at("shards")) {
      idx.shards.push_back({s.at("file").get<std::string>(), s.at("episode").get<std::string>(),
                            domain_from_string(s.at("domain").get<std::string>()),
                            s.at("n_samples").get<std::size_t>(),
                            parse_hex64(s.at("checksum").get<std::string>())});
    }
    return idx;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sample index: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("sample index: ") + e.what());
  }
}

SampleIndex export_samples(const Dataset& dataset, const ChunkSpec& spec, const fs::path& out_dir, int threads) {
  spec.validate();
  const std::size_t n = dataset.size();
  std::vector<SampleShard> shards(n);
  std::vector<std::optional<CropResize>> crops(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const Episode raw = dataset.load(i);
    const Episode ep = process_episode(raw, spec);
    const auto samples = make_samples(ep, spec);
    const auto bytes = encode_samples(samples, spec);
    const std::string file = "shards/" + ep.id + ".h2rs";
    write_binary_file(out_dir / file, bytes);
    shards[i] = {file, ep.id, ep.domain, samples.size(), fnv1a64(bytes)};
    if (ep.image_width > 0 && ep.image_height > 0) crops[i] = crop_resize_spec(ep.image_width, ep.image_height);
  });
  SampleIndex idx;
  idx.spec = spec;
  idx.shards = std::move(shards);
  idx.source_index_hash = dataset.index().hash();
  for (std::size_t i = 0; i < n; ++i) {
    if (crops[i]) idx.crops.emplace_back(idx.shards[i].episode_id, *crops[i]);
  }
  write_text_file(out_dir / "index.json", idx.to_json());
  return idx;
}

SampleSet read_samples(const fs::path& dir) {
  SampleSet set;
  set.index = SampleIndex::from_json(read_text_file(dir / "index.json"));
  for (const auto& shard : set.index.shards) {
    const auto bytes = read_binary_file(dir / shard.file);
    if (fnv1a64(bytes) != shard.checksum) throw FormatError("sample shard " + shard.file + ": checksum mismatch");
    ChunkSpec spec;
    auto samples = decode_samples(bytes, &spec);
    if (samples.size() != shard.n_samples || spec.t_p != set.index.spec.t_p || spec.t_a != set.index.spec.t_a ||
        spec.pose_mode != set.index.spec.pose_mode) {
      throw FormatError("sample shard " + shard.file + ": disagrees with the sample index");
    }
    for (auto& s : samples) set.samples.push_back(std::move(s));
  }
  return set;
}

}  // namespace h2r
