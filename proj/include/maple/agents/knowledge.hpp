#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/device/action.hpp"

namespace maple::agents {

struct GuidanceCue {
  std::string text;
  std::vector<std::string> apps;  // where the tip was learned
  bool operator==(const GuidanceCue&) const = default;
};

struct ActionSequence {
  std::string label;
  std::string precondition;
  std::vector<device::AtomicAction> actions;
  std::vector<std::string> apps;
  bool operator==(const ActionSequence&) const = default;
};

struct KnowledgeBase {
  std::vector<GuidanceCue> cues;
  std::vector<ActionSequence> sequences;
  std::map<std::string, nlohmann::json> fsms;  // app name -> stored FSM document

  bool empty() const { return cues.empty() && sequences.empty() && fsms.empty(); }
};

nlohmann::json kb_to_json(const KnowledgeBase& kb);
// Validates every stored FSM document against the AppFsm invariants.
KnowledgeBase kb_from_json(const nlohmann::json& doc);

// The subset relevant to a task: entries whose app list intersects the
// task's apps. Entries with no app annotation apply everywhere.
KnowledgeBase select_for(const KnowledgeBase& kb, const std::vector<std::string>& apps);

// File-backed store, one JSON document. Writes are serialized; absent file
// reads as an empty base.
class KnowledgeStore {
 public:
  explicit KnowledgeStore(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  KnowledgeBase load() const;
  // Dedup: cues by exact text, sequences by (label, precondition), FSMs
  // overwrite by app name.
  void merge(const KnowledgeBase& delta);
  void clear();

 private:
  std::string path_;
  mutable std::mutex mutex_;
};

}  // namespace maple::agents
