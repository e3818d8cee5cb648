#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace h2r {

struct RubricStage {
  std::string name;
  int points = 0;
};

struct RubricSpec {
  std::string task_id;
  std::string title;
  std::vector<RubricStage> stages;
  int max_points = 8;

  // Positive points, unique names, stage points summing to max_points.
  void validate() const;
  static RubricSpec from_json(const std::string& text);
  std::string to_json() const;
};

inline constexpr int kBundledRubricPoints = 8;

// Every *.json file in `dir`, sorted by task id. With `bundled` set, each
// rubric must also total exactly 8 points.
std::vector<RubricSpec> load_rubrics(const std::filesystem::path& dir, bool bundled = false);

struct RolloutAnnotation {
  std::string task_id;
  std::map<std::string, bool> achieved;  // stage name -> reached
  bool success = false;
};

// Achieved points / max_points. Throws InvalidArgument for a task mismatch,
// an unknown stage name or a rubric stage missing from the annotation.
double score_rollout(const RubricSpec& rubric, const RolloutAnnotation& annotation);

// Annotation files hold the rollouts of one task each.
std::vector<RolloutAnnotation> load_annotations(const std::filesystem::path& dir);

struct RolloutResult {
  double score = 0.0;
  bool success = false;
};

struct TaskAggregate {
  std::string task_id;
  std::size_t rollouts = 0;
  double mean_score = 0.0;
  double success_rate = 0.0;  // fraction in [0, 1]
};

struct AggregateReport {
  std::vector<TaskAggregate> tasks;  // sorted by task id
  double overall_score = 0.0;        // unweighted mean over tasks
  double overall_success_rate = 0.0;

  std::string to_table(const std::map<std::string, std::string>& titles = {}) const;
  std::string to_json() const;
};

AggregateReport aggregate(const std::map<std::string, std::vector<RolloutResult>>& by_task);

// Scores every annotation against its rubric and aggregates per task.
AggregateReport score_annotations(const std::vector<RubricSpec>& rubrics,
                                  const std::vector<RolloutAnnotation>& annotations);

}  // namespace h2r
