#include "maple/agents/crew.hpp"

#include <set>
#include <sstream>

#include "maple/fsm/serialize.hpp"
#include "maple/gateway/sections.hpp"
#include "maple/util/hash.hpp"
#include "maple/util/text.hpp"

namespace maple::agents {

namespace {

constexpr const char* kFixSuffix =
    "\n\nYour previous reply did not follow the required format. Respond again, "
    "following the format exactly.";

const std::vector<std::string> kStateSections = {
    "State Description", "Predicted Next State", "App Inference", "State Beacon"};
const std::vector<std::string> kConditionSections = {
    "Post-condition of Current State", "Pre-condition of Next State"};

std::string first_line(const std::string& text) {
  const auto nl = text.find('\n');
  return util::trim(nl == std::string::npos ? text : text.substr(0, nl));
}

std::string render_plan(const Plan& plan) {
  std::ostringstream out;
  for (const auto& item : plan.items) {
    out << "- subtask: " << item.subtask << " | rationale: " << item.rationale << "\n";
  }
  return out.str();
}

std::optional<int> parse_judgment(const std::string& reply, std::size_t n) {
  for (const auto& line : util::split_lines(reply)) {
    const std::string t = util::to_lower(util::trim(line));
    const auto pos = t.find("best:");
    if (pos == std::string::npos) continue;
    const std::string rest = util::trim(t.substr(pos + 5));
    try {
      const int idx = std::stoi(rest);
      if (idx >= 1 && static_cast<std::size_t>(idx) <= n) return idx - 1;
    } catch (...) {
    }
    return std::nullopt;
  }
  return std::nullopt;
}

std::optional<Verdict> parse_verdict(const std::string& reply) {
  std::optional<Outcome> outcome;
  std::string reason;
  for (const auto& line : util::split_lines(reply)) {
    const std::string t = util::trim(line);
    const std::string lower = util::to_lower(t);
    if (lower.rfind("verdict:", 0) == 0) {
      const std::string word = util::trim(lower.substr(8));
      if (word.rfind("success", 0) == 0) outcome = Outcome::Success;
      else if (word.rfind("nochange", 0) == 0) outcome = Outcome::NoChange;
      else if (word.rfind("fail", 0) == 0) outcome = Outcome::Fail;
    } else if (lower.rfind("reason:", 0) == 0) {
      reason = util::trim(t.substr(7));
    }
  }
  if (!outcome) return std::nullopt;
  if (*outcome == Outcome::Success) return Verdict::success();
  if (reason.empty()) reason = "unspecified";
  return Verdict{*outcome, reason};
}

std::optional<RecoveryPlan> parse_recovery(const std::string& reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    return std::nullopt;
  }
  const auto doc =
      nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (doc.is_discarded()) return std::nullopt;
  RecoveryPlan plan;
  plan.thought = doc.value("thought", "");
  if (!doc.contains("plan") || !doc["plan"].is_array() || doc["plan"].empty()) {
    return std::nullopt;
  }
  for (const auto& s : doc["plan"]) {
    if (!s.is_string()) return std::nullopt;
    plan.steps.push_back(s.get<std::string>());
  }
  if (!doc.contains("current_subtask") || !doc["current_subtask"].is_string()) {
    return std::nullopt;
  }
  plan.current_subtask = doc["current_subtask"].get<std::string>();
  bool found = false;
  for (const auto& s : plan.steps) found = found || s == plan.current_subtask;
  if (!found) return std::nullopt;
  plan.goal = doc.value("goal", "");
  return plan;
}

}  // namespace

std::string render_knowledge(const KnowledgeBase& kb) {
  if (kb.empty()) return "";
  std::ostringstream out;
  out << "\nReusable knowledge from prior tasks:\n";
  for (const auto& cue : kb.cues) out << "- tip: " << cue.text << "\n";
  for (const auto& seq : kb.sequences) {
    out << "- sequence '" << seq.label << "' (when " << seq.precondition << "): ";
    for (std::size_t i = 0; i < seq.actions.size(); ++i) {
      if (i > 0) out << ", ";
      out << device::action_call(seq.actions[i]);
    }
    out << "\n";
  }
  if (!kb.fsms.empty()) {
    out << "- stored navigation maps for:";
    for (const auto& [app, doc] : kb.fsms) out << " " << app;
    out << "\n";
  }
  return out.str();
}

std::string render_elements(const perception::PerceptionResult& p) {
  if (p.elements.empty()) return "(no elements detected)\n";
  std::ostringstream out;
  for (const auto& el : p.elements) {
    out << "- " << el.content << " | " << el.kind << " | (" << el.cx << ", " << el.cy
        << ")\n";
  }
  return out.str();
}

std::optional<std::vector<PlanItem>> parse_plan_items(const std::string& text) {
  std::vector<PlanItem> items;
  for (const auto& line : util::split_lines(text)) {
    const std::string t = util::trim(line);
    if (t.rfind("- subtask:", 0) != 0) continue;
    const std::string rest = t.substr(10);
    const auto bar = rest.find("| rationale:");
    PlanItem item;
    if (bar == std::string::npos) {
      item.subtask = util::trim(rest);
    } else {
      item.subtask = util::trim(rest.substr(0, bar));
      item.rationale = util::trim(rest.substr(bar + 12));
    }
    if (!item.subtask.empty()) items.push_back(std::move(item));
  }
  if (items.empty()) return std::nullopt;
  return items;
}

AgentCrew::AgentCrew(gateway::Gateway& gateway, const PromptLibrary& prompts,
                     AgentOptions options)
    : gateway_(gateway), prompts_(prompts), options_(std::move(options)) {}

std::string AgentCrew::complete_text(const std::string& tag, const std::string& prompt,
                                     double temperature,
                                     const std::vector<std::string>& images) {
  gateway::ModelRequest req;
  req.tag = tag;
  req.temperature = temperature;
  gateway::Message msg;
  msg.role = gateway::Role::User;
  msg.parts.push_back(gateway::MessagePart::make_text(prompt));
  for (const auto& image : images) {
    msg.parts.push_back(gateway::MessagePart::make_image(image, "image/x-portable-graymap"));
  }
  req.messages.push_back(std::move(msg));
  return gateway_.complete(req).text;
}

Plan AgentCrew::plan(const std::string& instruction, const KnowledgeBase& kb,
                     const std::string& judge_rubric, const std::string& progress,
                     const std::string& source) {
  const std::string prompt = prompts_.render(
      "planner_candidate",
      {{"instruction", instruction},
       {"progress", progress.empty() ? std::string() : progress + "\n"},
       {"knowledge", render_knowledge(kb)}});
  const int n = options_.multi_plan ? options_.fan_out : 1;

  const auto gather = [&](const std::string& suffix) {
    std::vector<gateway::ModelRequest> requests;
    for (int i = 1; i <= n; ++i) {
      auto req = gateway::ModelRequest::text(
          "planner.candidate." + std::to_string(i), prompt + suffix, 0.7);
      requests.push_back(std::move(req));
    }
    std::vector<Plan> candidates;
    for (auto& slot : gateway_.complete_many(requests)) {
      if (const auto* resp = std::get_if<gateway::ModelResponse>(&slot)) {
        if (auto items = parse_plan_items(resp->text)) {
          candidates.push_back(Plan{std::move(*items), source});
        }
      }
    }
    return candidates;
  };

  std::vector<Plan> candidates = gather("");
  if (candidates.empty()) candidates = gather(kFixSuffix);
  if (candidates.empty()) throw AllCandidatesMalformedError();

  const std::string rubric =
      judge_rubric.empty() ? options_.default_judge_rubric : judge_rubric;
  const int chosen = judge(candidates, rubric, instruction);
  return candidates[static_cast<std::size_t>(chosen)];
}

int AgentCrew::judge(const std::vector<Plan>& candidates, const std::string& rubric,
                     const std::string& instruction) {
  if (candidates.empty()) throw UnparsableJudgmentError("no candidates");
  if (candidates.size() == 1) return 0;
  std::ostringstream rendered;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    rendered << "Candidate " << (i + 1) << ":\n" << render_plan(candidates[i]) << "\n";
  }
  const std::string prompt = prompts_.render("planner_judge",
                                             {{"instruction", instruction},
                                              {"rubric", rubric},
                                              {"candidates", rendered.str()}});
  std::string reply = complete_text("planner.judge", prompt, 0.0);
  auto idx = parse_judgment(reply, candidates.size());
  if (!idx) {
    reply = complete_text("planner.judge", prompt + kFixSuffix, 0.0);
    idx = parse_judgment(reply, candidates.size());
  }
  if (!idx) throw UnparsableJudgmentError(first_line(reply));
  return *idx;
}

fsm::UiState AgentCrew::describe_state(const perception::PerceptionResult& p,
                                       const std::string& screenshot,
                                       const std::string& instruction,
                                       const std::string& subtask,
                                       const std::vector<std::string>& beacon_history) {
  // Ordered-unique history so repeated describes of one screen build an
  // identical prompt (and replay key).
  std::vector<std::string> unique_history;
  std::set<std::string> seen;
  for (const auto& b : beacon_history) {
    if (seen.insert(util::canonical_key(b)).second) unique_history.push_back(b);
  }
  std::ostringstream history;
  if (unique_history.empty()) {
    history << "(none)\n";
  } else {
    for (const auto& b : unique_history) history << "- " << b << "\n";
  }

  const std::string prompt = prompts_.render(
      "state_agent",
      {{"instruction", instruction},
       {"subtask", subtask},
       {"elements", render_elements(p)},
       {"knowledge", ""},
       {"beacon_history", history.str()},
       {"conditions_request",
        options_.use_conditions ? prompts_.raw("state_agent_conditions") : ""}});

  std::vector<std::string> required = kStateSections;
  if (options_.use_conditions) {
    required.insert(required.end(), kConditionSections.begin(), kConditionSections.end());
  }

  const auto parse = [&](const std::string& reply) {
    return gateway::parse_sections(reply, required);
  };
  gateway::SectionedResponse sections;
  std::string reply = complete_text("state.describe", prompt, 0.0, {screenshot});
  try {
    sections = parse(reply);
  } catch (const gateway::MalformedResponseError&) {
    reply = complete_text("state.describe", prompt + kFixSuffix, 0.0, {screenshot});
    sections = parse(reply);
  }

  fsm::UiState state;
  state.description = util::trim(sections.require("State Description"));
  state.predicted_next = util::trim(sections.require("Predicted Next State"));
  std::string app = first_line(sections.require("App Inference"));
  if (util::iequals(app, "System Operation")) app = kSystemApp;
  state.app = app;
  state.beacon = first_line(sections.require("State Beacon"));
  if (!state.beacon.empty() && state.beacon[0] == '-') {
    state.beacon = util::trim(state.beacon.substr(1));
  }
  if (options_.use_conditions) {
    state.postcondition = util::trim(sections.require("Post-condition of Current State"));
    state.precondition = util::trim(sections.require("Pre-condition of Next State"));
  }
  state.id = fsm::state_id(state.app, state.beacon);
  return state;
}

Decision AgentCrew::decide_action(const std::string& subtask,
                                  const perception::PerceptionResult& p,
                                  const fsm::UiState& state, const KnowledgeBase& kb) {
  const std::string prompt =
      prompts_.render("actor", {{"subtask", subtask},
                                {"state", state.beacon.empty() ? state.description
                                                               : state.beacon},
                                {"elements", render_elements(p)},
                                {"knowledge", render_knowledge(kb)}});
  std::string reply = complete_text("actor.decide", prompt, 0.0);
  auto call = device::parse_action_call(reply);
  if (!call) {
    reply = complete_text("actor.decide", prompt + kFixSuffix, 0.0);
    call = device::parse_action_call(reply);
  }
  if (!call) throw NoActionParsedError(first_line(reply));

  Decision decision;
  decision.raw_reply = reply;
  if (call->tap_element) {
    const auto element = perception::locate(p, *call->tap_element);
    if (!element) throw ElementNotFoundError(*call->tap_element);
    decision.action = device::Tap{element->cx, element->cy};
    decision.element = element->content;
  } else {
    decision.action = *call->action;
    if (const auto* tap = std::get_if<device::Tap>(&decision.action)) {
      // Coordinate taps still get a target label when they hit an element.
      for (const auto& el : p.elements) {
        if (tap->x >= el.left && tap->x < el.right && tap->y >= el.top &&
            tap->y < el.bottom) {
          decision.element = el.content;
          break;
        }
      }
    }
  }
  return decision;
}

Verdict AgentCrew::verify(const fsm::UiState& prev, const std::string& expected_next_pre,
                          const perception::PerceptionResult& p_before,
                          const perception::PerceptionResult& p_after,
                          const std::string& shot_before, const std::string& shot_after,
                          const std::string& subtask, const KnowledgeBase& kb) {
  // Sim-deterministic short circuit: the world itself answers when machine
  // predicates are available.
  if (options_.use_conditions && cond_eval_ && !prev.postcondition.empty()) {
    if (cond_eval_(prev.postcondition)) return Verdict::success();
    if (p_before.screenshot_ref == p_after.screenshot_ref) {
      return Verdict::no_change("screen unchanged and the postcondition is unmet");
    }
  }

  const std::string prompt = prompts_.render(
      "reflection_verify",
      {{"subtask", subtask},
       {"prev_state", prev.beacon + ": " + prev.description},
       {"predicted", prev.predicted_next},
       {"postcondition", options_.use_conditions ? prev.postcondition : std::string("(not tracked)")},
       {"precondition", options_.use_conditions ? expected_next_pre : std::string("(not tracked)")},
       {"digest_before", p_before.screenshot_ref},
       {"digest_after", p_after.screenshot_ref},
       {"perception_before", render_elements(p_before)},
       {"perception_after", render_elements(p_after)},
       {"knowledge", render_knowledge(kb)}});
  std::string reply =
      complete_text("reflection.verify", prompt, 0.0, {shot_before, shot_after});
  auto verdict = parse_verdict(reply);
  if (!verdict) {
    reply = complete_text("reflection.verify", prompt + kFixSuffix, 0.0,
                          {shot_before, shot_after});
    verdict = parse_verdict(reply);
  }
  if (!verdict) throw UnparsableVerdictError(first_line(reply));
  return *verdict;
}

RecoveryPlan AgentCrew::build_recovery_plan(const fsm::AppFsm& fsm,
                                            const fsm::RecoveryTarget& target,
                                            const fsm::StateId& failed_at,
                                            const std::string& failure_reason,
                                            const std::string& failed_subtask) {
  if (target.target == failed_at) {
    // Already at the anchor: re-attempt the failed subtask in place, no
    // navigation and no model call.
    RecoveryPlan plan;
    plan.thought = "The failure left the screen at the recovery target; "
                   "the subtask can be re-attempted directly.";
    plan.steps = {failed_subtask};
    plan.current_subtask = failed_subtask;
    plan.target = target.target;
    plan.goal = "Re-attempt the failed subtask in place";
    return plan;
  }
  const fsm::UiState& node = fsm.state(target.target);
  std::ostringstream path;
  for (const auto& t : target.path) {
    path << "- " << device::action_call(t.action) << " leads to "
         << fsm.state(t.to).beacon << "\n";
  }
  if (target.path.empty()) path << "(no recorded path; navigate by screen content)\n";

  const std::string prompt = prompts_.render("reflection_recovery",
                                             {{"failure_reason", failure_reason},
                                              {"failed_subtask", failed_subtask},
                                              {"target", target.target},
                                              {"target_beacon", node.beacon},
                                              {"target_description", node.description},
                                              {"path", path.str()}});
  std::string reply = complete_text("reflection.recovery", prompt, 0.0);
  auto plan = parse_recovery(reply);
  if (!plan) {
    reply = complete_text("reflection.recovery", prompt + kFixSuffix, 0.0);
    plan = parse_recovery(reply);
  }
  if (!plan) throw UnparsableRecoveryError(first_line(reply));
  plan->target = target.target;
  if (plan->goal.empty()) plan->goal = "Return to " + node.beacon;
  return *plan;
}

RetainResult AgentCrew::retain(const std::string& instruction, const std::string& status,
                               const std::vector<std::string>& history,
                               const std::vector<std::string>& errors,
                               const std::vector<std::string>& transitions,
                               const std::map<std::string, fsm::AppFsm>& fsms,
                               const std::vector<std::string>& task_apps) {
  RetainResult result;
  for (const auto& [app, machine] : fsms) {
    result.delta.fsms[app] = fsm::fsm_to_json(machine);
  }

  const auto join = [](const std::vector<std::string>& lines) {
    if (lines.empty()) return std::string("(none)\n");
    std::string out;
    for (const auto& l : lines) out += "- " + l + "\n";
    return out;
  };
  const std::string prompt = prompts_.render("mentor",
                                             {{"instruction", instruction},
                                              {"status", status},
                                              {"history", join(history)},
                                              {"errors", join(errors)},
                                              {"transitions", join(transitions)}});
  std::string reply;
  try {
    reply = complete_text("mentor.retain", prompt, 0.0);
    const auto sections =
        gateway::parse_sections(reply, {"Guidance Cues", "Action Sequences"});
    for (const auto& line : util::split_lines(*sections.get("Guidance Cues"))) {
      const std::string t = util::trim(line);
      if (t.rfind("- ", 0) == 0 && t.size() > 2) {
        result.delta.cues.push_back(GuidanceCue{util::trim(t.substr(2)), task_apps});
      }
    }
    const std::string seq_body = *sections.get("Action Sequences");
    const auto arr = nlohmann::json::parse(seq_body, nullptr, false);
    if (arr.is_array()) {
      for (const auto& sdoc : arr) {
        ActionSequence seq;
        seq.label = sdoc.value("label", "");
        seq.precondition = sdoc.value("precondition", "");
        for (const auto& call : sdoc.value("actions", nlohmann::json::array())) {
          const auto parsed = device::parse_action_call(call.get<std::string>());
          if (parsed && parsed->action) seq.actions.push_back(*parsed->action);
        }
        seq.apps = task_apps;
        if (!seq.label.empty()) result.delta.sequences.push_back(std::move(seq));
      }
    }
  } catch (const std::exception& e) {
    result.warning = std::string("cue extraction skipped: ") + e.what();
  }
  return result;
}

}  // namespace maple::agents
