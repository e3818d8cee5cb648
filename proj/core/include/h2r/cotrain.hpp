#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "h2r/dataset.hpp"
#include "h2r/util.hpp"

namespace h2r {

struct CotrainWeights {
  std::size_t n_human = 0;
  std::size_t n_robot = 0;
  double alpha = 0.5;         // n_human / (n_human + n_robot)
  double robot_weight = 1.0;  // per-sample, mean weight over the dataset is 1
  double human_weight = 1.0;

  double weight(Domain d) const { return d == Domain::kRobot ? robot_weight : human_weight; }
  // Mean per-sample weight contributed by each domain: alpha and 1 - alpha.
  double robot_share() const;
  double human_share() const;
};

// Throws InvalidArgument when either count is zero.
CotrainWeights compute_weights(std::size_t n_human, std::size_t n_robot);
CotrainWeights compute_weights(const DatasetIndex& index);

// Draws the robot domain with probability alpha, then an item uniformly
// within the chosen domain.
class DomainSampler {
 public:
  DomainSampler(std::span<const Domain> items, const CotrainWeights& weights);

  std::size_t draw(Rng& rng) const;
  std::vector<std::size_t> batch(std::size_t size, Rng& rng) const;
  // Probability that a single draw returns item i.
  double probability(std::size_t i) const;

 private:
  std::vector<std::size_t> human_;
  std::vector<std::size_t> robot_;
  std::size_t n_items_ = 0;
  double alpha_ = 0.5;
};

std::vector<std::size_t> sample_batch(std::span<const Domain> items, const CotrainWeights& weights,
                                      std::size_t batch_size, std::uint64_t seed);

// alpha · mean robot loss + (1 - alpha) · mean human loss.
double cotrain_objective(std::span<const double> losses, std::span<const Domain> domains,
                         const CotrainWeights& weights);

enum class CotrainMode {
  kSampling,       // domain-balanced sampler, unit loss weights
  kLossWeighting,  // uniform sampler, per-sample loss weights
};

// Expected mini-batch loss under `mode`, in closed form. Both modes equal
// cotrain_objective.
double expected_batch_loss(std::span<const double> losses, std::span<const Domain> domains,
                           const CotrainWeights& weights, CotrainMode mode);

}  // namespace h2r
