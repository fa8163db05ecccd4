#include "maple/fsm/journal.hpp"

namespace maple::fsm {

void TaskJournal::append(JournalEntry entry) {
  if (!entries_.empty() && entry.step <= entries_.back().step) {
    throw std::invalid_argument("journal step indices must strictly increase");
  }
  entries_.push_back(std::move(entry));
}

void TaskJournal::add_cross_app_edge(CrossAppEdge edge) {
  cross_app_edges_.push_back(std::move(edge));
}

nlohmann::json TaskJournal::to_json() const {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    j["entries"].push_back({{"step", e.step},
                            {"app", e.app},
                            {"state", e.state},
                            {"action", device::action_to_json(e.action)},
                            {"verdict",
                             {{"outcome", to_string(e.verdict.outcome)},
                              {"reason", e.verdict.reason}}},
                            {"verified", e.verified_snapshot}});
  }
  j["cross_app_edges"] = nlohmann::json::array();
  for (const auto& e : cross_app_edges_) {
    j["cross_app_edges"].push_back({{"from_app", e.from_app},
                                    {"from_state", e.from_state},
                                    {"action", device::action_to_json(e.action)},
                                    {"to_app", e.to_app},
                                    {"to_state", e.to_state}});
  }
  return j;
}

TaskJournal TaskJournal::from_json(const nlohmann::json& j) {
  TaskJournal out;
  for (const auto& e : j.at("entries")) {
    JournalEntry entry;
    entry.step = e.at("step").get<int>();
    entry.app = e.at("app").get<std::string>();
    entry.state = e.at("state").get<std::string>();
    entry.action = device::action_from_json(e.at("action"));
    entry.verdict.outcome = outcome_from_string(e.at("verdict").at("outcome"));
    entry.verdict.reason = e.at("verdict").at("reason").get<std::string>();
    entry.verified_snapshot = e.at("verified").get<bool>();
    out.append(std::move(entry));
  }
  for (const auto& e : j.at("cross_app_edges")) {
    CrossAppEdge edge;
    edge.from_app = e.at("from_app").get<std::string>();
    edge.from_state = e.at("from_state").get<std::string>();
    edge.action = device::action_from_json(e.at("action"));
    edge.to_app = e.at("to_app").get<std::string>();
    edge.to_state = e.at("to_state").get<std::string>();
    out.add_cross_app_edge(std::move(edge));
  }
  return out;
}

}  // namespace maple::fsm
