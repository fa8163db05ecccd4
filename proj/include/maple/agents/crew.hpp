#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maple/agents/knowledge.hpp"
#include "maple/agents/prompts.hpp"
#include "maple/agents/types.hpp"
#include "maple/fsm/fsm.hpp"
#include "maple/fsm/journal.hpp"
#include "maple/gateway/gateway.hpp"
#include "maple/perception/perception.hpp"
#include "maple/verdict.hpp"

namespace maple::agents {

// App name used when the screen shows system UI rather than an app.
inline constexpr const char* kSystemApp = "System";

struct AgentOptions {
  bool multi_plan = true;  // n-candidate fan-out + judge
  int fan_out = 5;
  bool use_conditions = true;  // pre/post-conditions in prompts and FSM nodes
  std::string default_judge_rubric =
      "goal relevance, execution efficiency, robustness, and clarity";
};

// Machine evaluation of a condition predicate; bound to the simulated world
// in sim-deterministic mode, absent in live mode.
using ConditionEval = std::function<bool(const std::string& predicate)>;

struct Decision {
  device::AtomicAction action;
  std::string element;  // tapped element content when resolved via locate
  std::string raw_reply;
};

struct RetainResult {
  KnowledgeBase delta;
  std::optional<std::string> warning;  // cue extraction failure, FSMs still kept
};

// The five reasoning agents, each a thin prompt/parse wrapper over the
// gateway. All prompts come from the template library; parse failures are
// reprompted once with a corrective suffix, then surface as typed errors.
class AgentCrew {
 public:
  AgentCrew(gateway::Gateway& gateway, const PromptLibrary& prompts,
            AgentOptions options = {});

  void set_condition_evaluator(ConditionEval eval) { cond_eval_ = std::move(eval); }
  const AgentOptions& options() const { return options_; }

  Plan plan(const std::string& instruction, const KnowledgeBase& kb,
            const std::string& judge_rubric = "", const std::string& progress = "",
            const std::string& source = "fresh");

  int judge(const std::vector<Plan>& candidates, const std::string& rubric,
            const std::string& instruction);

  fsm::UiState describe_state(const perception::PerceptionResult& p,
                              const std::string& screenshot,
                              const std::string& instruction,
                              const std::string& subtask,
                              const std::vector<std::string>& beacon_history);

  Decision decide_action(const std::string& subtask,
                         const perception::PerceptionResult& p,
                         const fsm::UiState& state, const KnowledgeBase& kb);

  Verdict verify(const fsm::UiState& prev, const std::string& expected_next_pre,
                 const perception::PerceptionResult& p_before,
                 const perception::PerceptionResult& p_after,
                 const std::string& shot_before, const std::string& shot_after,
                 const std::string& subtask, const KnowledgeBase& kb);

  RecoveryPlan build_recovery_plan(const fsm::AppFsm& fsm,
                                   const fsm::RecoveryTarget& target,
                                   const fsm::StateId& failed_at,
                                   const std::string& failure_reason,
                                   const std::string& failed_subtask);

  RetainResult retain(const std::string& instruction, const std::string& status,
                      const std::vector<std::string>& history,
                      const std::vector<std::string>& errors,
                      const std::vector<std::string>& transitions,
                      const std::map<std::string, fsm::AppFsm>& fsms,
                      const std::vector<std::string>& task_apps);

 private:
  std::string complete_text(const std::string& tag, const std::string& prompt,
                            double temperature,
                            const std::vector<std::string>& images = {});

  gateway::Gateway& gateway_;
  const PromptLibrary& prompts_;
  AgentOptions options_;
  ConditionEval cond_eval_;
};

// Rendered knowledge block for prompts; empty string for an empty base so
// prompts carry no knowledge section at all.
std::string render_knowledge(const KnowledgeBase& kb);

std::string render_elements(const perception::PerceptionResult& p);

// "- subtask: ... | rationale: ..." lines -> plan items; nullopt when no
// well-formed line exists.
std::optional<std::vector<PlanItem>> parse_plan_items(const std::string& text);

}  // namespace maple::agents
