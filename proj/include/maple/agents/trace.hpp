#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/agents/types.hpp"
#include "maple/device/action.hpp"

namespace maple::agents {

// One executed action, normal or recovery phase.
struct StepRecord {
  int step = 0;  // 1-based, strictly increasing
  std::string phase;  // "normal" | "recovery"
  std::string subtask;
  std::string app;
  std::string state_before;
  std::string state_after;
  std::string beacon_after;
  std::string action_call;
  device::ActionToken token;  // (kind, target) for accuracy scoring
  std::string verdict;        // Success | NoChange | Fail
  std::string reason;
  std::string perception_before;  // digests
  std::string perception_after;
  std::string shot_before;  // screenshot refs (content digests)
  std::string shot_after;
  std::int64_t t_ms = 0;  // device clock after the action
};

struct Trace {
  std::string task_id;
  std::string status;  // success | terminated | step-budget-exhausted
  std::vector<StepRecord> steps;
  Plan plan;
  int replans = 0;
  int recovery_episodes = 0;
  int recovered = 0;
  std::vector<std::string> notes;

  std::vector<device::ActionToken> executed_tokens() const;
};

nlohmann::json step_to_json(const StepRecord& r);
StepRecord step_from_json(const nlohmann::json& j);

// One StepRecord per line.
std::string trace_to_jsonl(const Trace& trace);
nlohmann::json trace_summary(const Trace& trace);

}  // namespace maple::agents
