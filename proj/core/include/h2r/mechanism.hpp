#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "h2r/toy_policy.hpp"

namespace h2r {

struct HeightTask {
  std::string id;
  Domain domain = Domain::kHuman;
  double height_cm = 0.0;
};

// Synthetic placement-height tasks. Features per sample:
// [domain flag, task one-hot (scaled), scene cue]; target: placement height.
struct HeightTaskSpec {
  std::vector<HeightTask> tasks{{"H-bucket", Domain::kHuman, 15.3},
                                {"R-pad", Domain::kRobot, 0.3},
                                {"R-platform", Domain::kRobot, 20.7}};
  std::string eval_task = "H-bucket";
  double domain_flag = 3.0;          // +flag for human rows, -flag for robot rows
  double onehot_scale = 0.0;         // task identity is carried by the scene cue
  double cue_scale_cm = 20.7;        // cue = height / cue_scale_cm
  double cue_noise = 0.01;
  double human_cue_offset = 2.0;     // observation gap between embodiments
  double height_jitter_cm = 0.5;     // scene-to-scene variation of each task height
  double target_noise_cm = 0.1;
  int samples_per_task = 100;
  std::vector<int> hidden{64, 64};
  TrainConfig train{1e-3, 2000, 64, 0, CotrainMode::kSampling, 100, 1e6};

  void validate() const;
  const HeightTask& task(const std::string& id) const;
};

struct MechanismRun {
  std::vector<std::string> subset;
  std::uint64_t seed = 0;
  double prediction_cm = 0.0;  // robot-domain prediction for the eval task
  double abs_error_cm = 0.0;
  double final_loss = 0.0;
};

// Generates the subset's data, trains a ToyPolicy with weighted cotraining
// (single-domain training when only one domain is present) and queries it
// with the robot flag and the eval task's cue. Throws InvalidArgument for
// unknown task ids.
MechanismRun run_mechanism_experiment(const HeightTaskSpec& spec, const std::vector<std::string>& subset,
                                      std::uint64_t seed);

struct MechanismRow {
  std::vector<std::string> subset;
  std::vector<MechanismRun> runs;  // one per seed
  double mean_abs_error_cm = 0.0;
  double mean_prediction_cm = 0.0;
};

struct MechanismReport {
  std::vector<MechanismRow> rows;
  std::string to_table() const;
  std::string to_json() const;
};

// The four subsets {eval}, {eval + R-pad}, {eval + R-platform},
// {eval + R-pad + R-platform}.
std::vector<std::vector<std::string>> default_mechanism_subsets(const HeightTaskSpec& spec);

MechanismReport run_mechanism_suite(const HeightTaskSpec& spec, const std::vector<std::vector<std::string>>& subsets,
                                    const std::vector<std::uint64_t>& seeds, int threads = 1);

}  // namespace h2r
