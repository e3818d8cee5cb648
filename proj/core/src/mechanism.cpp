#include "h2r/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>

#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

using detail::Json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  return r.next_u64();
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace

void HeightTaskSpec::validate() const {
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (!(t.height_cm > 0.0)) throw InvalidArgument("height task " + t.id + ": height must be positive");
    if (!ids.insert(t.id).second) throw InvalidArgument("height task ids must be unique ('" + t.id + "')");
  }
  task(eval_task);
  if (samples_per_task < 1) throw InvalidArgument("height spec: samples_per_task must be >= 1");
  if (!(cue_scale_cm > 0.0)) throw InvalidArgument("height spec: cue_scale_cm must be > 0");
}

const HeightTask& HeightTaskSpec::task(const std::string& id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return t;
  }
  throw InvalidArgument("unknown height task '" + id + "'");
}

MechanismRun run_mechanism_experiment(const HeightTaskSpec& spec, const std::vector<std::string>& subset,
                                      std::uint64_t seed) {
  spec.validate();
  if (subset.empty()) throw InvalidArgument("mechanism: empty task subset");
  std::set<std::string> seen;
  for (const auto& id : subset) {
    spec.task(id);
    if (!seen.insert(id).second) throw InvalidArgument("mechanism: task '" + id + "' listed twice");
  }

  const auto n_tasks = static_cast<Eigen::Index>(spec.tasks.size());
  const Eigen::Index dim = n_tasks + 2;
  auto task_slot = [&](const std::string& id) {
    for (Eigen::Index k = 0; k < n_tasks; ++k) {
      if (spec.tasks[static_cast<std::size_t>(k)].id == id) return k;
    }
    return Eigen::Index{-1};
  };

  const auto rows = static_cast<Eigen::Index>(subset.size()) * spec.samples_per_task;
  RegressionSet data;
  data.x = Eigen::MatrixXd::Zero(rows, dim);
  data.y.resize(rows, 1);
  Rng rng(derive_seed(seed, 0));
  Eigen::Index r = 0;
  for (const auto& id : subset) {
    const auto& t = spec.task(id);
    const bool human = t.domain == Domain::kHuman;
    for (int i = 0; i < spec.samples_per_task; ++i, ++r) {
      const double h = t.height_cm + rng.normal() * spec.height_jitter_cm;
      const double cue = h / spec.cue_scale_cm + rng.normal() * spec.cue_noise + (human ? spec.human_cue_offset : 0.0);
      data.x(r, 0) = human ? spec.domain_flag : -spec.domain_flag;
      data.x(r, 1 + task_slot(id)) = spec.onehot_scale;
      data.x(r, dim - 1) = cue;
      data.y(r, 0) = h + rng.normal() * spec.target_noise_cm;
      data.domains.push_back(t.domain);
    }
  }

  // Z-score the target over the training set.
  const double mean = data.y.mean();
  const double var = (data.y.array() - mean).square().mean();
  const double sd = var > 1e-12 ? std::sqrt(var) : 1.0;
  data.y = (data.y.array() - mean) / sd;

  std::vector<int> layers{static_cast<int>(dim)};
  layers.insert(layers.end(), spec.hidden.begin(), spec.hidden.end());
  layers.push_back(1);
  ToyPolicy policy(layers, derive_seed(seed, 1));

  std::optional<CotrainWeights> weights;
  if (data.has_both_domains()) {
    const auto n_h = static_cast<std::size_t>(std::count(data.domains.begin(), data.domains.end(), Domain::kHuman));
    weights = compute_weights(n_h, data.domains.size() - n_h);
  }
  TrainConfig cfg = spec.train;
  cfg.seed = derive_seed(seed, 2);
  const TrainResult trained = train_toy(policy, data, weights, cfg);

  const auto& eval = spec.task(spec.eval_task);
  Eigen::MatrixXd query = Eigen::MatrixXd::Zero(1, dim);
  query(0, 0) = -spec.domain_flag;
  query(0, 1 + task_slot(eval.id)) = spec.onehot_scale;
  query(0, dim - 1) = eval.height_cm / spec.cue_scale_cm;

  MechanismRun run;
  run.subset = subset;
  run.seed = seed;
  run.prediction_cm = policy.forward(query)(0, 0) * sd + mean;
  run.abs_error_cm = std::abs(run.prediction_cm - eval.height_cm);
  run.final_loss = trained.final_loss;
  return run;
}

std::vector<std::vector<std::string>> default_mechanism_subsets(const HeightTaskSpec& spec) {
  spec.validate();
  std::vector<std::string> robot;
  for (const auto& t : spec.tasks) {
    if (t.domain == Domain::kRobot) robot.push_back(t.id);
  }
  std::vector<std::vector<std::string>> out{{spec.eval_task}};
  for (const auto& id : robot) out.push_back({spec.eval_task, id});
  if (robot.size() > 1) {
    std::vector<std::string> all{spec.eval_task};
    all.insert(all.end(), robot.begin(), robot.end());
    out.push_back(all);
  }
  return out;
}

MechanismReport run_mechanism_suite(const HeightTaskSpec& spec, const std::vector<std::vector<std::string>>& subsets,
                                    const std::vector<std::uint64_t>& seeds, int threads) {
  if (seeds.empty()) throw InvalidArgument("mechanism: no seeds");
  const std::size_t n = subsets.size() * seeds.size();
  std::vector<MechanismRun> runs(n);
  parallel_for(n, threads, [&](std::size_t k) {
    runs[k] = run_mechanism_experiment(spec, subsets[k / seeds.size()], seeds[k % seeds.size()]);
  });
  MechanismReport report;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    MechanismRow row;
    row.subset = subsets[s];
    for (std::size_t i = 0; i < seeds.size(); ++i) row.runs.push_back(runs[s * seeds.size() + i]);
    for (const auto& run : row.runs) {
      row.mean_abs_error_cm += run.abs_error_cm;
      row.mean_prediction_cm += run.prediction_cm;
    }
    row.mean_abs_error_cm /= static_cast<double>(row.runs.size());
    row.mean_prediction_cm /= static_cast<double>(row.runs.size());
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string MechanismReport::to_table() const {
  std::ostringstream out;
  out << "subset                              seeds  mean_pred_cm  mean_abs_err_cm\n";
  for (const auto& row : rows) {
    std::string name = join(row.subset, " + ");
    if (name.size() < 36) name.resize(36, ' ');
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%5zu  %12.3f  %15.3f", row.runs.size(), row.mean_prediction_cm,
                  row.mean_abs_error_cm);
    out << name << buf << "\n";
  }
  return out.str();
}

std::string MechanismReport::to_json() const {
  Json list = Json::array();
  for (const auto& row : rows) {
    Json runs = Json::array();
    for (const auto& r : row.runs) {
      runs.push_back(Json{{"seed", r.seed},
                          {"prediction_cm", r.prediction_cm},
                          {"abs_error_cm", r.abs_error_cm},
                          {"final_loss", r.final_loss}});
    }
    list.push_back(Json{{"subset", row.subset},
                        {"mean_prediction_cm", row.mean_prediction_cm},
                        {"mean_abs_error_cm", row.mean_abs_error_cm},
                        {"runs", runs}});
  }
  return detail::dump_json(Json{{"format", "h2r-mechanism/1"}, {"rows", list}});
}

}  // namespace h2r
