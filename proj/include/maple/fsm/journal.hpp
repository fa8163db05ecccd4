#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/device/action.hpp"
#include "maple/fsm/fsm.hpp"
#include "maple/verdict.hpp"

namespace maple::fsm {

// Cross-app hop: per-app FSMs cannot carry these edges.
struct CrossAppEdge {
  std::string from_app;
  StateId from_state;
  device::AtomicAction action;
  std::string to_app;
  StateId to_state;

  bool operator==(const CrossAppEdge&) const = default;
};

struct JournalEntry {
  int step = 0;
  std::string app;
  StateId state;
  device::AtomicAction action;
  Verdict verdict;
  bool verified_snapshot = false;

  bool operator==(const JournalEntry&) const = default;
};

// Ordered record of the whole task across apps; step indices strictly
// increase.
class TaskJournal {
 public:
  void append(JournalEntry entry);
  void add_cross_app_edge(CrossAppEdge edge);

  const std::vector<JournalEntry>& entries() const { return entries_; }
  const std::vector<CrossAppEdge>& cross_app_edges() const { return cross_app_edges_; }

  nlohmann::json to_json() const;
  static TaskJournal from_json(const nlohmann::json& j);

  bool operator==(const TaskJournal&) const = default;

 private:
  std::vector<JournalEntry> entries_;
  std::vector<CrossAppEdge> cross_app_edges_;
};

}  // namespace maple::fsm
