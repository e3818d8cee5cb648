#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "h2r/transform.hpp"

namespace h2r {

enum class NormMode { kUnified, kPerDomain };

std::string_view to_string(NormMode mode);
NormMode norm_mode_from_string(std::string_view name);

enum class Stream { kProprio, kAction };

using StateRow = Eigen::Matrix<double, 1, kStateDim>;

// Single-pass mean/variance (Welford) with Chan's pairwise merge.
class RunningStats {
 public:
  void add(const StateRow& x);
  void merge(const RunningStats& other);
  std::uint64_t count() const { return n_; }
  const StateRow& mean() const { return mean_; }
  // Population variance (divide by N).
  StateRow variance() const;

 private:
  std::uint64_t n_ = 0;
  StateRow mean_ = StateRow::Zero();
  StateRow m2_ = StateRow::Zero();
};

struct StreamStats {
  StateRow mean = StateRow::Zero();
  StateRow std = StateRow::Ones();
  std::uint64_t count = 0;
  std::vector<int> replaced_dims;  // std below epsilon, set to 1
};

struct DomainStats {
  StreamStats proprio;
  StreamStats action;

  const StreamStats& stream(Stream s) const { return s == Stream::kProprio ? proprio : action; }
};

struct NormStats {
  NormMode mode = NormMode::kUnified;
  double epsilon = 1e-6;
  DomainStats unified;
  // Present iff mode == kPerDomain.
  std::optional<DomainStats> human;
  std::optional<DomainStats> robot;
  std::uint64_t source_hash = 0;

  // Stats applied to data from `domain`; unified mode ignores the domain.
  const DomainStats& select(Domain domain) const;

  std::string to_json() const;
  static NormStats from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static NormStats load(const std::filesystem::path& path);
};

// Statistics over every proprio row and every action row (padded rows
// included). Samples are accumulated in fixed blocks merged in order, so
// the result does not depend on `threads`.
NormStats fit_stats(std::span<const TrainingSample> samples, NormMode mode, int threads = 1,
                    std::uint64_t source_hash = 0);

// (x - mean) / std row-wise. Throws InvalidArgument when cols != 15.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& rows, const NormStats& stats, Stream stream,
                               Domain domain);
Eigen::MatrixXd denormalize_rows(const Eigen::MatrixXd& rows, const NormStats& stats, Stream stream,
                                 Domain domain);

TrainingSample normalize(const TrainingSample& sample, const NormStats& stats, Domain domain);
TrainingSample denormalize(const TrainingSample& sample, const NormStats& stats, Domain domain);

}  // namespace h2r
