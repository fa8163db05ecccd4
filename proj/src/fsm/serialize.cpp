#include "maple/fsm/serialize.hpp"

#include <sstream>

namespace maple::fsm {

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

nlohmann::json fsm_to_json(const AppFsm& fsm) {
  nlohmann::json j;
  j["version"] = 1;
  j["app"] = fsm.app();
  j["initial"] = fsm.initial();
  j["current_goal"] = fsm.current_goal();
  j["states"] = nlohmann::json::array();
  for (const auto& [id, s] : fsm.states()) {
    j["states"].push_back({{"id", s.id},
                           {"beacon", s.beacon},
                           {"description", s.description},
                           {"predicted_next", s.predicted_next},
                           {"precondition", s.precondition},
                           {"postcondition", s.postcondition},
                           {"verified", s.verified},
                           {"first_seen_step", s.first_seen_step},
                           {"last_seen_step", s.last_seen_step}});
  }
  j["transitions"] = nlohmann::json::array();
  for (const auto& t : fsm.transitions()) {
    j["transitions"].push_back({{"from", t.from},
                                {"action", device::action_to_json(t.action)},
                                {"to", t.to},
                                {"pre_next", t.pre_next},
                                {"post_current", t.post_current},
                                {"step", t.step}});
  }
  return j;
}

AppFsm fsm_from_json(const nlohmann::json& j) {
  const int version = j.at("version").get<int>();
  if (version != 1) {
    throw UnsupportedFormatError("fsm schema version " + std::to_string(version));
  }
  AppFsm fsm(j.at("app").get<std::string>());
  for (const auto& sj : j.at("states")) {
    UiState s;
    s.app = fsm.app();
    s.beacon = sj.at("beacon").get<std::string>();
    s.description = sj.at("description").get<std::string>();
    s.predicted_next = sj.at("predicted_next").get<std::string>();
    s.precondition = sj.at("precondition").get<std::string>();
    s.postcondition = sj.at("postcondition").get<std::string>();
    s.first_seen_step = sj.at("first_seen_step").get<int>();
    s.last_seen_step = sj.at("last_seen_step").get<int>();
    StateId id = fsm.upsert_state(s);
    if (sj.at("verified").get<bool>()) fsm.mark_verified(id, Verdict::success());
  }
  for (const auto& tj : j.at("transitions")) {
    fsm.record_transition(tj.at("from").get<std::string>(),
                          device::action_from_json(tj.at("action")),
                          tj.at("to").get<std::string>(),
                          tj.at("pre_next").get<std::string>(),
                          tj.at("post_current").get<std::string>(),
                          tj.at("step").get<int>());
  }
  if (j.contains("initial") && !j.at("initial").get<std::string>().empty()) {
    fsm.set_initial(j.at("initial").get<std::string>());
  }
  fsm.set_current_goal(j.value("current_goal", ""));
  return fsm;
}

std::string fsm_to_dot(const AppFsm& fsm) {
  std::ostringstream out;
  out << "digraph \"" << dot_escape(fsm.app()) << "\" {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=circle];\n";
  for (const auto& [id, s] : fsm.states()) {
    out << "  \"" << id << "\" [label=\"" << dot_escape(s.beacon) << "\"";
    if (s.verified) out << ", shape=doublecircle";
    if (id == fsm.initial()) out << ", style=bold";
    out << "];\n";
  }
  for (const auto& t : fsm.transitions()) {
    out << "  \"" << t.from << "\" -> \"" << t.to << "\" [label=\""
        << dot_escape(device::action_call(t.action)) << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

std::string export_fsm(const AppFsm& fsm, const std::string& format) {
  if (format == "json") return fsm_to_json(fsm).dump(2) + "\n";
  if (format == "dot") return fsm_to_dot(fsm);
  throw UnsupportedFormatError(format);
}

}  // namespace maple::fsm
