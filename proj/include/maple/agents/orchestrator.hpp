#pragma once

#include <map>
#include <optional>
#include <string>

#include "maple/agents/crew.hpp"
#include "maple/agents/knowledge.hpp"
#include "maple/agents/trace.hpp"
#include "maple/device/device.hpp"
#include "maple/eval/task.hpp"
#include "maple/fsm/journal.hpp"
#include "maple/perception/perception.hpp"

namespace maple::agents {

struct OrchestratorConfig {
  int step_budget = 40;
  int max_replans = 2;
  bool planner = true;  // false: the instruction itself is the single subtask
  bool mentor = true;   // false: knowledge store untouched
};

struct RunResult {
  Trace trace;
  std::map<std::string, fsm::AppFsm> fsms;
  fsm::TaskJournal journal;
  std::optional<KnowledgeBase> retained;
};

// The task loop: plan, then per action observe/perceive/describe/act/verify,
// with FSM-guided recovery on failed verdicts and replanning after repeated
// recovery failures. Errors never escape; they end the trace as `terminated`.
class Orchestrator {
 public:
  Orchestrator(AgentCrew& crew, device::DeviceBackend& device,
               perception::Perceiver& perceiver, OrchestratorConfig config = {},
               KnowledgeStore* store = nullptr);

  RunResult run(const eval::TaskSpec& task);

 private:
  AgentCrew& crew_;
  device::DeviceBackend& device_;
  perception::Perceiver& perceiver_;
  OrchestratorConfig config_;
  KnowledgeStore* store_;
};

}  // namespace maple::agents
