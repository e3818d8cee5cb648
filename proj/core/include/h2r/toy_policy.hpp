#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "h2r/cotrain.hpp"

namespace h2r {

// Fully connected tanh network with a linear output layer. Rows of the
// input matrix are samples.
class ToyPolicy {
 public:
  // Xavier-uniform weights, zero biases.
  ToyPolicy(std::vector<int> layers, std::uint64_t seed);

  const std::vector<int>& layers() const { return layers_; }
  std::size_t parameter_count() const;
  // Flattened as W0 (row-major), b0, W1, b1, ...
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& params);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  // Weighted MSE: (1/B) Σ_b w_b · mean_o (f(x_b)_o - y_bo)².
  double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w) const;
  // Same loss; `grad` receives dL/dparams in parameters() order.
  double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                           Eigen::VectorXd& grad) const;

 private:
  std::vector<int> layers_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

struct RegressionSet {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  std::vector<Domain> domains;

  void validate() const;
  bool has_both_domains() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int steps = 5000;
  int batch_size = 64;
  std::uint64_t seed = 0;
  CotrainMode mode = CotrainMode::kSampling;
  int log_every = 100;
  double divergence_threshold = 1e6;
};

struct TrainResult {
  std::vector<double> loss_curve;  // batch loss every log_every steps
  double final_loss = 0.0;         // weighted objective over the whole set
  bool single_domain = false;
};

// Mini-batch training with Adam. With `weights` and both domains present
// the batches follow `config.mode`; otherwise batches are uniform and
// unweighted (single-domain training). Throws Error naming the step when
// the batch loss exceeds the divergence threshold or turns non-finite.
TrainResult train_toy(ToyPolicy& policy, const RegressionSet& data, const std::optional<CotrainWeights>& weights,
                      const TrainConfig& config);

}  // namespace h2r
