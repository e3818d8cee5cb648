#include "h2r/evalscore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "h2r/error.hpp"
#include "h2r/util.hpp"
#include "json_io.hpp"

namespace h2r {
namespace {

namespace fs = std::filesystem;
using detail::Json;

std::vector<fs::path> json_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

void RubricSpec::validate() const {
  if (task_id.empty()) throw ValidationError("rubric: empty task id");
  if (stages.empty()) throw ValidationError("rubric " + task_id + ": no stages");
  std::set<std::string> names;
  int sum = 0;
  for (const auto& s : stages) {
    if (s.points <= 0) throw ValidationError("rubric " + task_id + ": stage '" + s.name + "' needs positive points");
    if (!names.insert(s.name).second) throw ValidationError("rubric " + task_id + ": duplicate stage '" + s.name + "'");
    sum += s.points;
  }
  if (sum != max_points) {
    throw ValidationError("rubric " + task_id + ": stage points sum to " + std::to_string(sum) + ", expected " +
                          std::to_string(max_points));
  }
}

RubricSpec RubricSpec::from_json(const std::string& text) {
  const Json j = detail::parse_json(text, "rubric");
  try {
    if (j.at("format").get<std::string>() != "h2r-rubric/1") throw FormatError("rubric: unsupported format");
    RubricSpec r;
    r.task_id = j.at("task").get<std::string>();
    r.title = j.value("title", r.task_id);
    r.max_points = j.at("max_points").get<int>();
    for (const auto& s : j.at("stages")) r.stages.push_back({s.at("name").get<std::string>(), s.at("points").get<int>()});
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("rubric: ") + e.what());
  }
}

std::string RubricSpec::to_json() const {
  Json stage_list = Json::array();
  for (const auto& s : stages) stage_list.push_back(Json{{"name", s.name}, {"points", s.points}});
  return detail::dump_json(Json{{"format", "h2r-rubric/1"},
                                {"task", task_id},
                                {"title", title},
                                {"max_points", max_points},
                                {"stages", stage_list}});
}

std::vector<RubricSpec> load_rubrics(const fs::path& dir, bool bundled) {
  std::vector<RubricSpec> out;
  std::set<std::string> ids;
  for (const auto& file : json_files(dir)) {
    RubricSpec r;
    try {
      r = RubricSpec::from_json(read_text_file(file));
    } catch (const Error& e) {
      throw FormatError(file.string() + ": " + e.what());
    }
    if (bundled && r.max_points != kBundledRubricPoints) {
      throw ValidationError(file.string() + ": bundled rubrics must total " + std::to_string(kBundledRubricPoints) +
                            " points");
    }
    if (!ids.insert(r.task_id).second) throw ValidationError("duplicate rubric for task '" + r.task_id + "'");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw InvalidArgument("no rubric files in " + dir.string());
  std::sort(out.begin(), out.end(), [](const RubricSpec& a, const RubricSpec& b) { return a.task_id < b.task_id; });
  return out;
}

double score_rollout(const RubricSpec& rubric, const RolloutAnnotation& a) {
  if (a.task_id != rubric.task_id) {
    throw InvalidArgument("annotation for task '" + a.task_id + "' scored against rubric '" + rubric.task_id + "'");
  }
  for (const auto& [name, flag] : a.achieved) {
    (void)flag;
    const bool known = std::any_of(rubric.stages.begin(), rubric.stages.end(),
                                   [&](const RubricStage& s) { return s.name == name; });
    if (!known) throw InvalidArgument("task " + rubric.task_id + ": unknown stage '" + name + "'");
  }
  int points = 0;
  for (const auto& s : rubric.stages) {
    const auto it = a.achieved.find(s.name);
    if (it == a.achieved.end()) throw InvalidArgument("task " + rubric.task_id + ": stage '" + s.name + "' not annotated");
    if (it->second) points += s.points;
  }
  return static_cast<double>(points) / static_cast<double>(rubric.max_points);
}

std::vector<RolloutAnnotation> load_annotations(const fs::path& dir) {
  std::vector<RolloutAnnotation> out;
  for (const auto& file : json_files(dir)) {
    const Json j = detail::parse_json(read_text_file(file), file.string());
    try {
      if (j.at("format").get<std::string>() != "h2r-annotations/1") {
        throw FormatError(file.string() + ": unsupported format");
      }
      const auto task = j.at("task").get<std::string>();
      for (const auto& r : j.at("rollouts")) {
        RolloutAnnotation a;
        a.task_id = task;
        for (const auto& [name, flag] : r.at("stages").items()) a.achieved[name] = flag.get<bool>();
        a.success = r.at("success").get<bool>();
        out.push_back(std::move(a));
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file.string() + ": " + e.what());
    }
  }
  return out;
}

AggregateReport aggregate(const std::map<std::string, std::vector<RolloutResult>>& by_task) {
  if (by_task.empty()) throw InvalidArgument("aggregate: no tasks");
  AggregateReport report;
  for (const auto& [task, rollouts] : by_task) {
    if (rollouts.empty()) throw InvalidArgument("aggregate: task '" + task + "' has no rollouts");
    TaskAggregate t;
    t.task_id = task;
    t.rollouts = rollouts.size();
    std::size_t successes = 0;
    for (const auto& r : rollouts) {
      if (!(r.score >= 0.0 && r.score <= 1.0)) throw InvalidArgument("aggregate: score outside [0, 1]");
      t.mean_score += r.score;
      successes += r.success ? 1 : 0;
    }
    t.mean_score /= static_cast<double>(rollouts.size());
    t.success_rate = static_cast<double>(successes) / static_cast<double>(rollouts.size());
    report.overall_score += t.mean_score;
    report.overall_success_rate += t.success_rate;
    report.tasks.push_back(t);
  }
  report.overall_score /= static_cast<double>(report.tasks.size());
  report.overall_success_rate /= static_cast<double>(report.tasks.size());
  return report;
}

AggregateReport score_annotations(const std::vector<RubricSpec>& rubrics,
                                  const std::vector<RolloutAnnotation>& annotations) {
  std::map<std::string, std::vector<RolloutResult>> by_task;
  for (const auto& a : annotations) {
    const auto it = std::find_if(rubrics.begin(), rubrics.end(),
                                 [&](const RubricSpec& r) { return r.task_id == a.task_id; });
    if (it == rubrics.end()) throw InvalidArgument("no rubric for task '" + a.task_id + "'");
    by_task[a.task_id].push_back({score_rollout(*it, a), a.success});
  }
  return aggregate(by_task);
}

std::string AggregateReport::to_table(const std::map<std::string, std::string>& titles) const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %8s %6s %6s\n", "task", "rollouts", "score", "SR(%)");
  out << buf;
  for (const auto& t : tasks) {
    const auto it = titles.find(t.task_id);
    const std::string name = it != titles.end() ? it->second : t.task_id;
    std::snprintf(buf, sizeof(buf), "%-28s %8zu %6.3f %6.1f\n", name.c_str(), t.rollouts, t.mean_score,
                  100.0 * t.success_rate);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-28s %8s %6.3f %6.1f\n", "average", "", overall_score, 100.0 * overall_success_rate);
  out << buf;
  return out.str();
}

std::string AggregateReport::to_json() const {
  Json list = Json::array();
  for (const auto& t : tasks) {
    list.push_back(Json{{"task", t.task_id},
                        {"rollouts", t.rollouts},
                        {"score", t.mean_score},
                        {"success_rate", t.success_rate}});
  }
  return detail::dump_json(Json{{"format", "h2r-score/1"},
                                {"tasks", list},
                                {"overall_score", overall_score},
                                {"overall_success_rate", overall_success_rate}});
}

}  // namespace h2r
