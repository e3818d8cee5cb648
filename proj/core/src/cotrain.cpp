#include "h2r/cotrain.hpp"

#include <algorithm>

#include "h2r/error.hpp"

namespace h2r {

double CotrainWeights::robot_share() const {
  return robot_weight * static_cast<double>(n_robot) / static_cast<double>(n_human + n_robot);
}

double CotrainWeights::human_share() const {
  return human_weight * static_cast<double>(n_human) / static_cast<double>(n_human + n_robot);
}

CotrainWeights compute_weights(std::size_t n_human, std::size_t n_robot) {
  if (n_human == 0 || n_robot == 0) {
    throw InvalidArgument("cotrain weights: both domains need at least one episode (human " +
                          std::to_string(n_human) + ", robot " + std::to_string(n_robot) + ")");
  }
  CotrainWeights w;
  w.n_human = n_human;
  w.n_robot = n_robot;
  const double h = static_cast<double>(n_human);
  const double r = static_cast<double>(n_robot);
  const double total = h + r;
  w.alpha = h / total;
  w.robot_weight = w.alpha / r * total;
  w.human_weight = (1.0 - w.alpha) / h * total;
  return w;
}

CotrainWeights compute_weights(const DatasetIndex& index) {
  index.check_counts();
  return compute_weights(index.n_human, index.n_robot);
}

DomainSampler::DomainSampler(std::span<const Domain> items, const CotrainWeights& weights)
    : n_items_(items.size()), alpha_(weights.alpha) {
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw InvalidArgument("sampler: alpha must lie strictly inside (0, 1)");
  for (std::size_t i = 0; i < items.size(); ++i) (items[i] == Domain::kHuman ? human_ : robot_).push_back(i);
  if (human_.empty() || robot_.empty()) throw InvalidArgument("sampler: both domains need items");
}

std::size_t DomainSampler::draw(Rng& rng) const {
  const auto& pool = rng.uniform() < alpha_ ? robot_ : human_;
  return pool[rng.index(pool.size())];
}

std::vector<std::size_t> DomainSampler::batch(std::size_t size, Rng& rng) const {
  std::vector<std::size_t> out(size);
  for (auto& i : out) i = draw(rng);
  return out;
}

double DomainSampler::probability(std::size_t i) const {
  if (i >= n_items_) throw InvalidArgument("sampler: item out of range");
  const bool robot = std::binary_search(robot_.begin(), robot_.end(), i);
  return robot ? alpha_ / static_cast<double>(robot_.size())
               : (1.0 - alpha_) / static_cast<double>(human_.size());
}

std::vector<std::size_t> sample_batch(std::span<const Domain> items, const CotrainWeights& weights,
                                      std::size_t batch_size, std::uint64_t seed) {
  DomainSampler sampler(items, weights);
  Rng rng(seed);
  return sampler.batch(batch_size, rng);
}

double cotrain_objective(std::span<const double> losses, std::span<const Domain> domains,
                         const CotrainWeights& weights) {
  if (losses.size() != domains.size()) throw InvalidArgument("cotrain objective: size mismatch");
  double sum_h = 0.0, sum_r = 0.0;
  std::size_t n_h = 0, n_r = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (domains[i] == Domain::kHuman) {
      sum_h += losses[i];
      ++n_h;
    } else {
      sum_r += losses[i];
      ++n_r;
    }
  }
  if (n_h == 0 || n_r == 0) throw InvalidArgument("cotrain objective: both domains must be present");
  return weights.alpha * sum_r / static_cast<double>(n_r) +
         (1.0 - weights.alpha) * sum_h / static_cast<double>(n_h);
}

double expected_batch_loss(std::span<const double> losses, std::span<const Domain> domains,
                           const CotrainWeights& weights, CotrainMode mode) {
  if (losses.size() != domains.size() || losses.empty()) throw InvalidArgument("expected loss: size mismatch");
  double out = 0.0;
  if (mode == CotrainMode::kSampling) {
    DomainSampler sampler(domains, weights);
    for (std::size_t i = 0; i < losses.size(); ++i) out += sampler.probability(i) * losses[i];
  } else {
    // Weights are scaled against this set's own domain sizes.
    std::size_t n_h = 0;
    for (const auto d : domains) n_h += d == Domain::kHuman ? 1 : 0;
    const std::size_t n_r = domains.size() - n_h;
    if (n_h == 0 || n_r == 0) throw InvalidArgument("expected loss: both domains must be present");
    const double n = static_cast<double>(domains.size());
    const double w_r = weights.alpha * n / static_cast<double>(n_r);
    const double w_h = (1.0 - weights.alpha) * n / static_cast<double>(n_h);
    for (std::size_t i = 0; i < losses.size(); ++i) out += (domains[i] == Domain::kRobot ? w_r : w_h) * losses[i];
    out /= static_cast<double>(losses.size());
  }
  return out;
}

}  // namespace h2r
