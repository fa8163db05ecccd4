#include "maple/sim/oracle.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "maple/util/text.hpp"

namespace maple::sim {

namespace {

constexpr const char* kLauncherBeacon = "Home Screen of the Device";

std::string prompt_line(const std::string& prompt, const std::string& label) {
  for (const auto& line : util::split_lines(prompt)) {
    const std::string t = util::trim(line);
    if (t.rfind(label, 0) == 0) return util::trim(t.substr(label.size()));
  }
  return "";
}

bool names_match(const std::string& a, const std::string& b) {
  if (util::iequals(a, b)) return true;
  return util::icontains(a, b) || util::icontains(b, a);
}

const SimElement* find_element(const std::vector<SimElement>& elements,
                               const std::string& target) {
  for (const auto& el : elements) {
    if (util::iequals(el.content, target)) return &el;
  }
  for (const auto& el : elements) {
    if (names_match(el.content, target)) return &el;
  }
  return nullptr;
}

const Rule* match_rule(const AppScript& app, const std::string& screen_id,
                       const device::ActionToken& token) {
  const auto& screen = app.screens.at(screen_id);
  for (const auto& rule : app.rules) {
    if (rule.screen != screen_id) continue;
    if (rule.trigger.kind != token.kind) continue;
    if (token.kind == "tap") {
      const auto* el = find_element(screen.elements, token.target);
      if (el == nullptr || !util::iequals(el->content, rule.trigger.element)) continue;
    } else if (token.kind == "type" && !rule.trigger.text.empty()) {
      if (!util::icontains(token.target, rule.trigger.text)) continue;
    }
    return &rule;
  }
  return nullptr;
}

std::string mutation_predicates(const Rule& rule) {
  std::string out;
  for (const auto& m : rule.mutations) {
    if (m.kind == Mutation::Kind::SetFlag) {
      out += " && flag:" + m.name;
    } else if (m.kind == Mutation::Kind::SetVar) {
      out += " && var:" + m.name + "=" + m.value;
    }
    // IncVar has no static value; it stays out of the predicate.
  }
  return out;
}

}  // namespace

gateway::ModelResponse SimOracleBackend::complete(const gateway::ModelRequest& req) {
  std::string prompt;
  for (const auto& msg : req.messages) {
    for (const auto& part : msg.parts) {
      if (part.kind == gateway::MessagePart::Kind::Text) prompt += part.text;
    }
  }
  gateway::ModelResponse resp;
  resp.text = answer(req.tag, prompt);
  resp.backend = name();
  return resp;
}

std::string SimOracleBackend::answer(const std::string& tag,
                                     const std::string& prompt) const {
  if (tag.rfind("planner.candidate", 0) == 0) return plan_reply(prompt);
  if (tag.rfind("planner.judge", 0) == 0) return "best: 1";
  if (tag.rfind("state.describe", 0) == 0) return describe_reply(prompt);
  if (tag.rfind("actor.decide", 0) == 0) return actor_reply(prompt);
  if (tag.rfind("reflection.verify", 0) == 0) return verify_reply(prompt);
  if (tag.rfind("reflection.recovery", 0) == 0) return recovery_reply(prompt);
  if (tag.rfind("mentor.retain", 0) == 0) {
    return "### Guidance Cues ###\n"
           "- Verify each screen transition before starting the next subtask.\n"
           "\n"
           "### Action Sequences ###\n"
           "[]\n";
  }
  throw gateway::TransportError("oracle has no handler for tag '" + tag + "'");
}

std::string SimOracleBackend::plan_reply(const std::string& prompt) const {
  if (task_ == nullptr || task_->human_reference_operations.empty()) {
    throw gateway::TransportError("oracle planner needs a task with reference operations");
  }
  const auto& ops = task_->human_reference_operations;
  // A revised plan resumes from the reported progress point.
  std::size_t start = 0;
  const std::string progress = prompt_line(prompt, "Execution progress:");
  if (!progress.empty()) {
    try {
      start = static_cast<std::size_t>(std::stoul(progress));
    } catch (...) {
      start = 0;
    }
    if (start >= ops.size()) start = 0;
  }
  std::ostringstream out;
  for (std::size_t i = start; i < ops.size(); ++i) {
    out << "- subtask: " << ops[i] << " | rationale: reference step " << (i + 1)
        << " of the task flow\n";
  }
  return out.str();
}

std::string SimOracleBackend::describe_reply(const std::string& prompt) const {
  const std::string subtask = prompt_line(prompt, "Current subtask:");
  const bool with_conditions =
      prompt.find("### Post-condition of Current State ###") != std::string::npos;

  std::string app, beacon, description;
  std::string post = "true", pre = "true", predicted;
  if (world_.foreground() == kLauncher) {
    app = "System Operation";
    beacon = kLauncherBeacon;
    description = "Device home screen listing the installed app icons.";
  } else {
    app = world_.foreground();
    const ScreenScript& screen = *world_.current_screen();
    beacon = screen.beacon;
    std::ostringstream d;
    d << beacon << " with " << screen.elements.size() << " visible elements.";
    description = d.str();
  }

  const device::ActionToken token = device::normalize_op(subtask);
  if (token.kind == "open_app") {
    std::string target_app = token.target;
    for (const auto& name : world_.app_names()) {
      if (names_match(name, token.target)) target_app = name;
    }
    const auto* script = world_.app_script(target_app);
    post = "foreground:" + target_app;
    predicted = script != nullptr ? script->screens.at(script->initial).beacon
                                  : "Homepage of " + target_app;
  } else if (token.kind == "home") {
    post = "foreground:launcher";
    predicted = kLauncherBeacon;
  } else if (world_.foreground() != kLauncher) {
    const auto* script = world_.app_script(world_.foreground());
    const auto* rule = match_rule(*script, world_.screen_of(world_.foreground()), token);
    if (rule != nullptr) {
      post = "screen:" + world_.foreground() + "/" + rule->next + mutation_predicates(*rule);
      predicted = script->screens.at(rule->next).beacon;
    } else if (token.kind == "wait" || token.kind == "swipe" ||
               token.kind == "switch_app") {
      post = "true";
      predicted = beacon;
    } else {
      // The subtask's action has no effect on this screen; an honest oracle
      // reports an unsatisfiable expectation so verification can fail.
      post = "flag:__unsatisfiable__";
      predicted = "The screen after completing the current subtask.";
    }
  } else {
    predicted = "The screen after completing the current subtask.";
  }
  pre = post;

  std::ostringstream out;
  out << "### State Description ###\n" << description << "\n\n";
  out << "### Predicted Next State ###\n" << predicted << "\n\n";
  out << "### App Inference ###\n" << app << "\n\n";
  out << "### State Beacon ###\n" << beacon << "\n";
  if (with_conditions) {
    out << "\n### Post-condition of Current State ###\n" << post << "\n\n";
    out << "### Pre-condition of Next State ###\n" << pre << "\n";
  }
  return out.str();
}

std::string SimOracleBackend::actor_reply(const std::string& prompt) const {
  const std::string subtask = prompt_line(prompt, "Current subtask:");
  const device::ActionToken token = device::normalize_op(subtask);
  if (token.kind == "open_app") {
    std::string target_app = token.target;
    for (const auto& name : world_.app_names()) {
      if (names_match(name, token.target)) target_app = name;
    }
    return "Open_App('" + target_app + "')";
  }
  if (token.kind == "tap") {
    const std::vector<SimElement>& elements =
        world_.foreground() == kLauncher ? world_.launcher_icons()
                                         : world_.current_screen()->elements;
    if (const auto* el = find_element(elements, token.target)) {
      return "Tap('" + el->content + "')";
    }
    return "Tap('" + token.target + "')";
  }
  if (token.kind == "type") return "Type('" + token.target + "')";
  if (token.kind == "enter") return "Enter()";
  if (token.kind == "back") return "Back()";
  if (token.kind == "home") return "Home()";
  if (token.kind == "switch_app") return "Switch_App()";
  if (token.kind == "wait") return "Wait()";
  if (token.kind == "swipe") return "Swipe(240, 600, 240, 200)";
  return "Wait()";
}

std::string SimOracleBackend::verify_reply(const std::string& prompt) const {
  const std::string post = prompt_line(prompt, "Post-condition of the current subtask:");
  if (!post.empty() && post != "(not tracked)") {
    try {
      if (eval_predicate(world_, post, {})) return "verdict: Success";
      return "verdict: Fail\nreason: the post-condition '" + post +
             "' does not hold on the new screen";
    } catch (const PredicateError&) {
      // free-text condition; fall through to the digest heuristic
    }
  }
  const std::string before = prompt_line(prompt, "Perception before (digest");
  const std::string after = prompt_line(prompt, "Perception after (digest");
  if (!before.empty() && before == after) {
    return "verdict: NoChange\nreason: the screen did not change after the action";
  }
  return "verdict: Success";
}

std::string SimOracleBackend::recovery_reply(const std::string& prompt) const {
  const std::string target_beacon = prompt_line(prompt, "Target beacon:");
  std::vector<std::string> steps;
  bool in_path = false;
  for (const auto& line : util::split_lines(prompt)) {
    const std::string t = util::trim(line);
    if (t.rfind("Known path", 0) == 0) {
      in_path = true;
      continue;
    }
    if (!in_path || t.rfind("- ", 0) != 0) continue;
    const auto cut = t.find(" leads to ");
    const std::string call = cut == std::string::npos ? t.substr(2)
                                                      : util::trim(t.substr(2, cut - 2));
    const auto parsed = device::parse_action_call(call);
    if (!parsed) continue;
    if (parsed->tap_element) {
      steps.push_back("tap '" + *parsed->tap_element + "'");
    } else if (parsed->action) {
      steps.push_back(device::describe_action(*parsed->action));
    }
  }
  if (steps.empty()) steps.push_back("press back");

  nlohmann::json doc{
      {"thought",
       "Returning to the last verified stable state gives a clean retry point; the "
       "recorded path below reaches it directly."},
      {"plan", steps},
      {"current_subtask", steps.front()},
      {"goal", "Return to " + target_beacon + " to reattempt the failed subtask."}};
  return doc.dump(2);
}

}  // namespace maple::sim
