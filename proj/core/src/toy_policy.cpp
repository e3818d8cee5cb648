#include "h2r/toy_policy.hpp"

#include <cmath>

#include "h2r/error.hpp"
#include "h2r/util.hpp"

namespace h2r {

ToyPolicy::ToyPolicy(std::vector<int> layers, std::uint64_t seed) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw InvalidArgument("toy policy: need at least input and output sizes");
  for (const int n : layers_) {
    if (n < 1) throw InvalidArgument("toy policy: layer sizes must be positive");
  }
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const int in = layers_[l];
    const int out = layers_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(out));
  }
}

std::size_t ToyPolicy::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Eigen::VectorXd ToyPolicy::parameters() const {
  Eigen::VectorXd p(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) p(k++) = weights_[l](r, c);
    }
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) p(k++) = biases_[l](r);
  }
  return p;
}

void ToyPolicy::set_parameters(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != parameter_count()) {
    throw InvalidArgument("toy policy: parameter vector has the wrong size");
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = p(k++);
    }
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = p(k++);
  }
}

Eigen::MatrixXd ToyPolicy::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != layers_.front()) throw InvalidArgument("toy policy: input has the wrong width");
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = a * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    a = l + 1 < weights_.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return a;
}

double ToyPolicy::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w) const {
  if (y.rows() != x.rows() || y.cols() != layers_.back() || w.size() != x.rows()) {
    throw InvalidArgument("toy policy: loss inputs have inconsistent shapes");
  }
  const Eigen::MatrixXd err = forward(x) - y;
  const Eigen::VectorXd per = err.array().square().rowwise().mean();
  return w.dot(per) / static_cast<double>(x.rows());
}

double ToyPolicy::loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                                    Eigen::VectorXd& grad) const {
  if (x.cols() != layers_.front() || y.rows() != x.rows() || y.cols() != layers_.back() || w.size() != x.rows()) {
    throw InvalidArgument("toy policy: gradient inputs have inconsistent shapes");
  }
  const std::size_t n_layers = weights_.size();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = acts.back() * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    acts.push_back(l + 1 < n_layers ? Eigen::MatrixXd(z.array().tanh()) : z);
  }
  const double b = static_cast<double>(x.rows());
  const double o = static_cast<double>(y.cols());
  const Eigen::MatrixXd err = acts.back() - y;
  const Eigen::VectorXd per = err.array().square().rowwise().mean();
  const double value = w.dot(per) / b;

  Eigen::MatrixXd delta = (2.0 / (b * o)) * (w.asDiagonal() * err);
  std::vector<Eigen::MatrixXd> gw(n_layers);
  std::vector<Eigen::VectorXd> gb(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    gw[l] = delta.transpose() * acts[l];
    gb[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * weights_[l]).array() * (1.0 - acts[l].array().square());
    }
  }
  grad.resize(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (Eigen::Index r = 0; r < gw[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < gw[l].cols(); ++c) grad(k++) = gw[l](r, c);
    }
    for (Eigen::Index r = 0; r < gb[l].size(); ++r) grad(k++) = gb[l](r);
  }
  return value;
}

void RegressionSet::validate() const {
  if (x.rows() == 0) throw InvalidArgument("regression set: empty");
  if (y.rows() != x.rows() || static_cast<Eigen::Index>(domains.size()) != x.rows()) {
    throw InvalidArgument("regression set: row counts differ");
  }
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("regression set: non-finite values");
}

bool RegressionSet::has_both_domains() const {
  bool h = false, r = false;
  for (const auto d : domains) (d == Domain::kHuman ? h : r) = true;
  return h && r;
}

TrainResult train_toy(ToyPolicy& policy, const RegressionSet& data, const std::optional<CotrainWeights>& weights,
                      const TrainConfig& config) {
  data.validate();
  if (config.steps < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0)) {
    throw InvalidArgument("train_toy: steps, batch size and learning rate must be positive");
  }
  if (data.x.cols() != policy.layers().front() || data.y.cols() != policy.layers().back()) {
    throw InvalidArgument("train_toy: data dimensions do not match the policy");
  }
  TrainResult result;
  const bool weighted = weights.has_value() && data.has_both_domains();
  result.single_domain = !weighted;

  const auto n = static_cast<std::size_t>(data.x.rows());
  std::optional<DomainSampler> sampler;
  double w_robot = 1.0, w_human = 1.0;
  if (weighted) {
    if (config.mode == CotrainMode::kSampling) {
      sampler.emplace(data.domains, *weights);
    } else {
      std::size_t n_h = 0;
      for (const auto d : data.domains) n_h += d == Domain::kHuman ? 1 : 0;
      w_robot = weights->alpha * static_cast<double>(n) / static_cast<double>(n - n_h);
      w_human = (1.0 - weights->alpha) * static_cast<double>(n) / static_cast<double>(n_h);
    }
  }

  Rng rng(config.seed);
  Eigen::VectorXd params = policy.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const auto bsz = static_cast<Eigen::Index>(config.batch_size);
  Eigen::MatrixXd bx(bsz, data.x.cols()), by(bsz, data.y.cols());
  Eigen::VectorXd bw(bsz);
  Eigen::VectorXd grad;

  for (int step = 1; step <= config.steps; ++step) {
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const std::size_t i = sampler ? sampler->draw(rng) : rng.index(n);
      const auto row = static_cast<Eigen::Index>(i);
      bx.row(b) = data.x.row(row);
      by.row(b) = data.y.row(row);
      bw(b) = !weighted || sampler ? 1.0 : (data.domains[i] == Domain::kRobot ? w_robot : w_human);
    }
    const double loss = policy.loss_and_gradient(bx, by, bw, grad);
    if (!std::isfinite(loss) || loss > config.divergence_threshold) {
      throw Error("train_toy: training diverged at step " + std::to_string(step) + " (batch loss " +
                  format_double(loss) + ")");
    }
    if (config.log_every > 0 && (step % config.log_every == 0 || step == 1)) result.loss_curve.push_back(loss);
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(kBeta1, step);
    const double c2 = 1.0 - std::pow(kBeta2, step);
    params.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    policy.set_parameters(params);
  }

  const Eigen::MatrixXd err = policy.forward(data.x) - data.y;
  const Eigen::VectorXd per = err.array().square().rowwise().mean();
  if (weighted) {
    std::vector<double> losses(per.data(), per.data() + per.size());
    result.final_loss = cotrain_objective(losses, data.domains, *weights);
  } else {
    result.final_loss = per.mean();
  }
  return result;
}

}  // namespace h2r
