#include "maple/eval/task.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "maple/util/fsio.hpp"

namespace maple::eval {

TaskSpec task_from_json(const nlohmann::json& doc) {
  TaskSpec spec;
  if (!doc.contains("task_id") || !doc["task_id"].is_string()) {
    throw TaskSchemaError("task_id");
  }
  spec.task_id = doc["task_id"].get<std::string>();
  if (!doc.contains("instruction") || !doc["instruction"].is_string() ||
      doc["instruction"].get<std::string>().empty()) {
    throw TaskSchemaError("instruction");
  }
  spec.instruction = doc["instruction"].get<std::string>();
  spec.type = doc.value("type", "");
  if (doc.contains("apps")) {
    if (!doc["apps"].is_array()) throw TaskSchemaError("apps");
    for (const auto& a : doc["apps"]) spec.apps.push_back(a.get<std::string>());
  }
  if (doc.contains("rubrics")) {
    if (!doc["rubrics"].is_array()) throw TaskSchemaError("rubrics");
    for (const auto& r : doc["rubrics"]) {
      Rubric rubric;
      if (r.is_string()) {
        rubric.text = r.get<std::string>();
      } else if (r.is_object()) {
        rubric.text = r.value("text", "");
        rubric.predicate = r.value("predicate", "");
      } else {
        throw TaskSchemaError("rubrics");
      }
      if (rubric.text.empty()) throw TaskSchemaError("rubrics");
      spec.rubrics.push_back(std::move(rubric));
    }
  }
  if (doc.contains("human_reference_operations")) {
    if (!doc["human_reference_operations"].is_array()) {
      throw TaskSchemaError("human_reference_operations");
    }
    for (const auto& op : doc["human_reference_operations"]) {
      spec.human_reference_operations.push_back(op.get<std::string>());
    }
  }
  spec.judge_rubric = doc.value("judge_rubric", "");
  return spec;
}

TaskSpec load_task(const std::string& path) {
  const auto doc = nlohmann::json::parse(util::read_file(path), nullptr, false);
  if (doc.is_discarded()) throw TaskSchemaError(path + " (not JSON)");
  return task_from_json(doc);
}

std::vector<TaskSpec> load_suite(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw TaskSchemaError(dir + " (not a directory)");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<TaskSpec> specs;
  std::set<std::string> ids;
  for (const auto& f : files) {
    TaskSpec spec = load_task(f);
    if (!ids.insert(spec.task_id).second) {
      throw TaskSchemaError("duplicate task_id '" + spec.task_id + "'");
    }
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) throw TaskSchemaError(dir + " (no tasks)");
  return specs;
}

}  // namespace maple::eval
