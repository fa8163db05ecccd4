#include "maple/agents/trace.hpp"

#include <sstream>

namespace maple::agents {

std::vector<device::ActionToken> Trace::executed_tokens() const {
  std::vector<device::ActionToken> tokens;
  tokens.reserve(steps.size());
  for (const auto& s : steps) tokens.push_back(s.token);
  return tokens;
}

nlohmann::json step_to_json(const StepRecord& r) {
  return nlohmann::json{{"step", r.step},
                        {"phase", r.phase},
                        {"subtask", r.subtask},
                        {"app", r.app},
                        {"state_before", r.state_before},
                        {"state_after", r.state_after},
                        {"beacon_after", r.beacon_after},
                        {"action", r.action_call},
                        {"kind", r.token.kind},
                        {"target", r.token.target},
                        {"verdict", r.verdict},
                        {"reason", r.reason},
                        {"perception_before", r.perception_before},
                        {"perception_after", r.perception_after},
                        {"shot_before", r.shot_before},
                        {"shot_after", r.shot_after},
                        {"t_ms", r.t_ms}};
}

StepRecord step_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.step = j.value("step", 0);
  r.phase = j.value("phase", "");
  r.subtask = j.value("subtask", "");
  r.app = j.value("app", "");
  r.state_before = j.value("state_before", "");
  r.state_after = j.value("state_after", "");
  r.beacon_after = j.value("beacon_after", "");
  r.action_call = j.value("action", "");
  r.token.kind = j.value("kind", "");
  r.token.target = j.value("target", "");
  r.verdict = j.value("verdict", "");
  r.reason = j.value("reason", "");
  r.perception_before = j.value("perception_before", "");
  r.perception_after = j.value("perception_after", "");
  r.shot_before = j.value("shot_before", "");
  r.shot_after = j.value("shot_after", "");
  r.t_ms = j.value("t_ms", static_cast<std::int64_t>(0));
  return r;
}

std::string trace_to_jsonl(const Trace& trace) {
  std::ostringstream out;
  for (const auto& s : trace.steps) out << step_to_json(s).dump() << "\n";
  return out.str();
}

nlohmann::json trace_summary(const Trace& trace) {
  nlohmann::json plan_items = nlohmann::json::array();
  for (const auto& item : trace.plan.items) {
    plan_items.push_back({{"subtask", item.subtask}, {"rationale", item.rationale}});
  }
  nlohmann::json notes = nlohmann::json::array();
  for (const auto& n : trace.notes) notes.push_back(n);
  return nlohmann::json{{"task_id", trace.task_id},
                        {"status", trace.status},
                        {"steps", trace.steps.size()},
                        {"plan", {{"source", trace.plan.source}, {"items", plan_items}}},
                        {"replans", trace.replans},
                        {"recovery_episodes", trace.recovery_episodes},
                        {"recovered", trace.recovered},
                        {"notes", std::move(notes)}};
}

}  // namespace maple::agents
