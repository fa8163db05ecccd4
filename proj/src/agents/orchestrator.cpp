#include "maple/agents/orchestrator.hpp"

#include <sstream>

#include "maple/util/text.hpp"

namespace maple::agents {

namespace {

device::ActionToken token_for(const Decision& decision) {
  device::ActionToken token;
  token.kind = device::action_kind(decision.action);
  if (const auto* open = std::get_if<device::OpenApp>(&decision.action)) {
    token.target = util::canonical_key(open->name);
  } else if (const auto* type = std::get_if<device::Type>(&decision.action)) {
    token.target = util::canonical_key(type->text);
  } else if (std::holds_alternative<device::Tap>(decision.action)) {
    token.target = util::canonical_key(decision.element);
  }
  return token;
}

}  // namespace

Orchestrator::Orchestrator(AgentCrew& crew, device::DeviceBackend& device,
                           perception::Perceiver& perceiver, OrchestratorConfig config,
                           KnowledgeStore* store)
    : crew_(crew), device_(device), perceiver_(perceiver), config_(config), store_(store) {}

RunResult Orchestrator::run(const eval::TaskSpec& task) {
  RunResult result;
  Trace& trace = result.trace;
  trace.task_id = task.task_id;

  KnowledgeBase kb;
  if (store_ != nullptr) kb = select_for(store_->load(), task.apps);

  Plan plan;
  bool planned = false;
  if (config_.planner) {
    try {
      plan = crew_.plan(task.instruction, kb, task.judge_rubric);
      planned = true;
    } catch (const std::exception& e) {
      trace.status = "terminated";
      trace.notes.push_back(std::string("planning failed: ") + e.what());
    }
  } else {
    plan.items.push_back(PlanItem{task.instruction, "execute the instruction directly"});
    planned = true;
  }
  trace.plan = plan;

  std::size_t subtask_idx = 0;
  bool in_recovery = false;
  RecoveryPlan recovery;
  std::size_t recovery_idx = 0;
  int recovery_failures = 0;
  bool episode_open = false;
  std::size_t episode_subtask = 0;

  std::vector<std::string> beacon_history;
  auto fsm_for = [&](const std::string& app) -> fsm::AppFsm& {
    auto it = result.fsms.find(app);
    if (it == result.fsms.end()) it = result.fsms.emplace(app, fsm::AppFsm(app)).first;
    return it->second;
  };

  int step = 0;
  while (planned) {
    if (!in_recovery && subtask_idx >= plan.items.size()) {
      trace.status = "success";
      break;
    }
    if (step >= config_.step_budget) {
      trace.status = "step-budget-exhausted";
      break;
    }
    const std::string subtask =
        in_recovery ? recovery.steps[recovery_idx] : plan.items[subtask_idx].subtask;

    try {
      const auto obs_before = device_.observe();
      const auto p_before = perceiver_.perceive(obs_before.screenshot);
      fsm::UiState before = crew_.describe_state(p_before, obs_before.screenshot,
                                                 task.instruction, subtask,
                                                 beacon_history);
      before.first_seen_step = before.last_seen_step = step + 1;
      {
        auto& machine = fsm_for(before.app);
        machine.set_current_goal(subtask);
        machine.upsert_state(before);
      }
      beacon_history.push_back(before.beacon);

      const Decision decision = crew_.decide_action(subtask, p_before, before, kb);
      device_.execute(decision.action);
      ++step;

      const auto obs_after = device_.observe();
      const auto p_after = perceiver_.perceive(obs_after.screenshot);
      fsm::UiState after = crew_.describe_state(p_after, obs_after.screenshot,
                                                task.instruction, subtask,
                                                beacon_history);
      after.first_seen_step = after.last_seen_step = step;
      auto& machine_after = fsm_for(after.app);
      machine_after.upsert_state(after);
      beacon_history.push_back(after.beacon);

      const Verdict verdict =
          crew_.verify(before, before.precondition, p_before, p_after,
                       obs_before.screenshot, obs_after.screenshot, subtask, kb);

      if (before.app == after.app) {
        machine_after.record_transition(before.id, decision.action, after.id,
                                        before.precondition, before.postcondition, step);
      } else {
        result.journal.add_cross_app_edge(fsm::CrossAppEdge{
            before.app, before.id, decision.action, after.app, after.id});
      }
      if (verdict.is_success()) machine_after.mark_verified(after.id, verdict);
      result.journal.append(fsm::JournalEntry{step, after.app, after.id,
                                              decision.action, verdict,
                                              machine_after.state(after.id).verified});

      StepRecord record;
      record.step = step;
      record.phase = in_recovery ? "recovery" : "normal";
      record.subtask = subtask;
      record.app = after.app;
      record.state_before = before.id;
      record.state_after = after.id;
      record.beacon_after = after.beacon;
      record.action_call = device::action_call(decision.action);
      record.token = token_for(decision);
      record.verdict = to_string(verdict.outcome);
      record.reason = verdict.reason;
      record.perception_before = p_before.screenshot_ref;
      record.perception_after = p_after.screenshot_ref;
      record.shot_before = p_before.screenshot_ref;
      record.shot_after = p_after.screenshot_ref;
      record.t_ms = obs_after.timestamp_ms;
      trace.steps.push_back(record);

      if (verdict.is_success()) {
        recovery_failures = 0;
        if (in_recovery) {
          const bool reattempt =
              episode_open &&
              recovery.steps[recovery_idx] == plan.items[episode_subtask].subtask;
          ++recovery_idx;
          if (reattempt) {
            // The recovery step was the failed subtask itself; completing it
            // completes the subtask.
            ++trace.recovered;
            episode_open = false;
            in_recovery = false;
            subtask_idx = episode_subtask + 1;
          } else if (recovery_idx >= recovery.steps.size()) {
            in_recovery = false;  // back at the target; retry the subtask
          }
        } else {
          if (episode_open && subtask_idx == episode_subtask) {
            ++trace.recovered;
            episode_open = false;
          }
          ++subtask_idx;
        }
        continue;
      }

      // Fail or NoChange.
      if (in_recovery) {
        ++recovery_failures;
        if (recovery_failures >= 2) {
          episode_open = false;  // the episode ends unrecovered
          if (trace.replans >= config_.max_replans) {
            trace.status = "terminated";
            trace.notes.push_back("recovery and replanning exhausted: " + verdict.reason);
            break;
          }
          ++trace.replans;
          std::ostringstream progress;
          progress << "Execution progress: " << subtask_idx << " of "
                   << plan.items.size()
                   << " planned subtasks completed; repeated recovery failures on '"
                   << plan.items[episode_subtask].subtask
                   << "' (last error: " << verdict.reason
                   << "). Produce a revised plan that finishes the task from the "
                      "current screen.";
          plan = crew_.plan(task.instruction, kb, task.judge_rubric, progress.str(),
                            "revised");
          trace.plan = plan;
          trace.notes.push_back("replan " + std::to_string(trace.replans));
          subtask_idx = 0;
          in_recovery = false;
          recovery_failures = 0;
        }
        // else: retry the same recovery step
        continue;
      }

      ++trace.recovery_episodes;
      episode_open = true;
      episode_subtask = subtask_idx;
      recovery_failures = 0;
      auto& machine = fsm_for(after.app);
      const auto target = fsm::find_recovery_target(machine, result.journal, after.id);
      // Without a verified anchor the current state stands in for one, which
      // degenerates to an in-place retry.
      const fsm::RecoveryTarget anchor =
          target ? *target : fsm::RecoveryTarget{after.id, {}};
      recovery =
          crew_.build_recovery_plan(machine, anchor, after.id, verdict.reason, subtask);
      recovery_idx = 0;
      for (std::size_t i = 0; i < recovery.steps.size(); ++i) {
        if (recovery.steps[i] == recovery.current_subtask) recovery_idx = i;
      }
      in_recovery = true;
    } catch (const std::exception& e) {
      trace.status = "terminated";
      trace.notes.push_back(e.what());
      break;
    }
  }
  if (trace.status.empty()) trace.status = "terminated";

  if (config_.mentor && store_ != nullptr) {
    std::vector<std::string> history, errors, transitions;
    for (const auto& s : trace.steps) {
      history.push_back("step " + std::to_string(s.step) + ": " + s.action_call +
                        " (" + s.verdict + ")");
      if (s.verdict != "Success") {
        errors.push_back("step " + std::to_string(s.step) + " " + s.verdict + ": " +
                         s.reason);
      }
      transitions.push_back(s.app + ": " + s.state_before + " -> " + s.action_call +
                            " -> " + s.state_after);
    }
    const RetainResult retained =
        crew_.retain(task.instruction, trace.status, history, errors, transitions,
                     result.fsms, task.apps);
    if (retained.warning) trace.notes.push_back(*retained.warning);
    store_->merge(retained.delta);
    result.retained = retained.delta;
  }
  return result;
}

}  // namespace maple::agents
