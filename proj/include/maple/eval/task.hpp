#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace maple::eval {

struct TaskSchemaError : std::runtime_error {
  explicit TaskSchemaError(const std::string& field)
      : std::runtime_error("task schema error: missing or invalid '" + field + "'"),
        field(field) {}
  std::string field;
};

struct Rubric {
  std::string text;
  std::string predicate;  // machine-checkable form; empty in live mode
};

struct TaskSpec {
  std::string task_id;
  std::string instruction;
  std::string type;
  std::vector<std::string> apps;
  std::vector<Rubric> rubrics;
  std::vector<std::string> human_reference_operations;
  std::string judge_rubric;  // optional; planner falls back to its default
};

TaskSpec task_from_json(const nlohmann::json& doc);
TaskSpec load_task(const std::string& path);

// tasks/*.json in lexicographic filename order; duplicate ids rejected.
std::vector<TaskSpec> load_suite(const std::string& dir);

}  // namespace maple::eval
