#include "h2r/normalize.hpp"

#include <algorithm>
#include <cmath>

#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

using detail::Json;

constexpr std::size_t kBlock = 256;

struct Accumulators {
  RunningStats proprio;
  RunningStats action;

  void merge(const Accumulators& o) {
    proprio.merge(o.proprio);
    action.merge(o.action);
  }
};

StreamStats finish(const RunningStats& acc, double epsilon) {
  StreamStats s;
  s.count = acc.count();
  s.mean = acc.mean();
  s.std = acc.variance().cwiseSqrt();
  for (int d = 0; d < kStateDim; ++d) {
    if (!(s.std(d) >= epsilon)) {
      s.std(d) = 1.0;
      s.replaced_dims.push_back(d);
    }
  }
  return s;
}

Json stream_to_json(const StreamStats& s) {
  Json mean = Json::array(), std = Json::array();
  for (int d = 0; d < kStateDim; ++d) {
    mean.push_back(s.mean(d));
    std.push_back(s.std(d));
  }
  return Json{{"count", s.count}, {"mean", mean}, {"std", std}, {"replaced_dims", s.replaced_dims}};
}

StreamStats stream_from_json(const Json& j) {
  StreamStats s;
  s.count = j.at("count").get<std::uint64_t>();
  const auto& mean = j.at("mean");
  const auto& std = j.at("std");
  if (mean.size() != kStateDim || std.size() != kStateDim) throw FormatError("norm stats: expected 15 dims");
  for (int d = 0; d < kStateDim; ++d) {
    s.mean(d) = mean[static_cast<std::size_t>(d)].get<double>();
    s.std(d) = std[static_cast<std::size_t>(d)].get<double>();
    if (!(s.std(d) > 0.0)) throw FormatError("norm stats: std entries must be positive");
  }
  s.replaced_dims = j.at("replaced_dims").get<std::vector<int>>();
  return s;
}

Json domain_to_json(const DomainStats& d) {
  return Json{{"proprio", stream_to_json(d.proprio)}, {"action", stream_to_json(d.action)}};
}

DomainStats domain_from_json(const Json& j) {
  return {stream_from_json(j.at("proprio")), stream_from_json(j.at("action"))};
}

}  // namespace

std::string_view to_string(NormMode mode) { return mode == NormMode::kUnified ? "unified" : "per_domain"; }

NormMode norm_mode_from_string(std::string_view name) {
  if (name == "unified") return NormMode::kUnified;
  if (name == "per_domain") return NormMode::kPerDomain;
  throw InvalidArgument("unknown normalization mode '" + std::string(name) + "'");
}

void RunningStats::add(const StateRow& x) {
  ++n_;
  const StateRow delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta.cwiseProduct(x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const StateRow delta = o.mean_ - mean_;
  mean_ += delta * (nb / n);
  m2_ += o.m2_ + delta.cwiseProduct(delta) * (na * nb / n);
  n_ += o.n_;
}

StateRow RunningStats::variance() const {
  if (n_ == 0) return StateRow::Zero();
  return (m2_ / static_cast<double>(n_)).cwiseMax(0.0);
}

const DomainStats& NormStats::select(Domain domain) const {
  if (mode == NormMode::kUnified) return unified;
  const auto& d = domain == Domain::kHuman ? human : robot;
  if (!d) throw InvalidArgument("norm stats: per-domain stats missing for " + std::string(to_string(domain)));
  return *d;
}

std::string NormStats::to_json() const {
  Json j{{"format", "h2r-normstats/1"},
         {"mode", std::string(to_string(mode))},
         {"std_convention", "population"},
         {"epsilon", epsilon},
         {"epsilon_policy", "std below epsilon replaced by 1"},
         {"source_hash", hex64(source_hash)},
         {"unified", domain_to_json(unified)}};
  if (human) j["human"] = domain_to_json(*human);
  if (robot) j["robot"] = domain_to_json(*robot);
  return detail::dump_json(j);
}

NormStats NormStats::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "norm stats");
  try {
    if (j.at("format").get<std::string>() != "h2r-normstats/1") throw FormatError("norm stats: unsupported format");
    NormStats s;
    s.mode = norm_mode_from_string(j.at("mode").get<std::string>());
    s.epsilon = j.at("epsilon").get<double>();
    s.source_hash = parse_hex64(j.at("source_hash").get<std::string>());
    s.unified = domain_from_json(j.at("unified"));
    if (j.contains("human")) s.human = domain_from_json(j.at("human"));
    if (j.contains("robot")) s.robot = domain_from_json(j.at("robot"));
    if ((s.mode == NormMode::kPerDomain) != (s.human.has_value() && s.robot.has_value())) {
      throw FormatError("norm stats: per-domain sections must be present exactly in per_domain mode");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("norm stats: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("norm stats: ") + e.what());
  }
}

void NormStats::save(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

NormStats NormStats::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

NormStats fit_stats(std::span<const TrainingSample> samples, NormMode mode, int threads, std::uint64_t source_hash) {
  if (samples.empty()) throw InvalidArgument("fit_stats: no samples");
  if (samples.size() < 2) throw InvalidArgument("fit_stats: need at least 2 samples");

  const std::size_t n_blocks = (samples.size() + kBlock - 1) / kBlock;
  // Per block: [unified, human, robot].
  std::vector<std::array<Accumulators, 3>> blocks(n_blocks);
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    const std::size_t end = std::min(samples.size(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const auto& s = samples[i];
      if (s.proprio.cols() != kStateDim || s.action.cols() != kStateDim) {
        throw InvalidArgument("fit_stats: sample rows must have 15 columns");
      }
      auto& dom = blocks[b][s.domain == Domain::kHuman ? 1 : 2];
      for (Eigen::Index r = 0; r < s.proprio.rows(); ++r) {
        blocks[b][0].proprio.add(s.proprio.row(r));
        dom.proprio.add(s.proprio.row(r));
      }
      for (Eigen::Index r = 0; r < s.action.rows(); ++r) {
        blocks[b][0].action.add(s.action.row(r));
        dom.action.add(s.action.row(r));
      }
    }
  });
  std::array<Accumulators, 3> total;
  for (const auto& b : blocks) {
    for (int k = 0; k < 3; ++k) total[k].merge(b[k]);
  }

  NormStats stats;
  stats.mode = mode;
  stats.source_hash = source_hash;
  auto make = [&](const Accumulators& a) {
    return DomainStats{finish(a.proprio, stats.epsilon), finish(a.action, stats.epsilon)};
  };
  stats.unified = make(total[0]);
  if (mode == NormMode::kPerDomain) {
    if (total[1].proprio.count() == 0 || total[2].proprio.count() == 0) {
      throw InvalidArgument("fit_stats: per_domain mode needs samples from both domains");
    }
    stats.human = make(total[1]);
    stats.robot = make(total[2]);
  }
  return stats;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& rows, const NormStats& stats, Stream stream, Domain domain) {
  if (rows.cols() != kStateDim) {
    throw InvalidArgument("normalize: expected 15 columns, got " + std::to_string(rows.cols()));
  }
  const auto& s = stats.select(domain).stream(stream);
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = (rows.row(r) - s.mean).cwiseQuotient(s.std);
  }
  return out;
}

Eigen::MatrixXd denormalize_rows(const Eigen::MatrixXd& rows, const NormStats& stats, Stream stream,
                                 Domain domain) {
  if (rows.cols() != kStateDim) {
    throw InvalidArgument("denormalize: expected 15 columns, got " + std::to_string(rows.cols()));
  }
  const auto& s = stats.select(domain).stream(stream);
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = rows.row(r).cwiseProduct(s.std) + s.mean;
  }
  return out;
}

TrainingSample normalize(const TrainingSample& sample, const NormStats& stats, Domain domain) {
  TrainingSample out = sample;
  out.proprio = normalize_rows(sample.proprio, stats, Stream::kProprio, domain);
  out.action = normalize_rows(sample.action, stats, Stream::kAction, domain);
  return out;
}

TrainingSample denormalize(const TrainingSample& sample, const NormStats& stats, Domain domain) {
  TrainingSample out = sample;
  out.proprio = denormalize_rows(sample.proprio, stats, Stream::kProprio, domain);
  out.action = denormalize_rows(sample.action, stats, Stream::kAction, domain);
  return out;
}

}  // namespace h2r
