#include "maple/agents/knowledge.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "maple/fsm/serialize.hpp"
#include "maple/util/fsio.hpp"
#include "maple/util/text.hpp"

namespace maple::agents {

namespace {

using nlohmann::json;

json strings_to_json(const std::vector<std::string>& v) {
  json out = json::array();
  for (const auto& s : v) out.push_back(s);
  return out;
}

std::vector<std::string> strings_from_json(const json& arr) {
  std::vector<std::string> out;
  for (const auto& s : arr) out.push_back(s.get<std::string>());
  return out;
}

bool apps_intersect(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty()) return true;  // unannotated knowledge applies everywhere
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (util::canonical_key(x) == util::canonical_key(y)) return true;
    }
  }
  return false;
}

}  // namespace

json kb_to_json(const KnowledgeBase& kb) {
  json cues = json::array();
  for (const auto& c : kb.cues) {
    cues.push_back({{"text", c.text}, {"apps", strings_to_json(c.apps)}});
  }
  json sequences = json::array();
  for (const auto& s : kb.sequences) {
    json actions = json::array();
    for (const auto& a : s.actions) actions.push_back(device::action_to_json(a));
    sequences.push_back({{"label", s.label},
                         {"precondition", s.precondition},
                         {"actions", std::move(actions)},
                         {"apps", strings_to_json(s.apps)}});
  }
  json fsms = json::object();
  for (const auto& [app, doc] : kb.fsms) fsms[app] = doc;
  return json{{"version", 1},
              {"cues", std::move(cues)},
              {"sequences", std::move(sequences)},
              {"fsms", std::move(fsms)}};
}

KnowledgeBase kb_from_json(const json& doc) {
  KnowledgeBase kb;
  for (const auto& c : doc.value("cues", json::array())) {
    kb.cues.push_back(GuidanceCue{c.at("text").get<std::string>(),
                                  strings_from_json(c.value("apps", json::array()))});
  }
  for (const auto& s : doc.value("sequences", json::array())) {
    ActionSequence seq;
    seq.label = s.value("label", "");
    seq.precondition = s.value("precondition", "");
    for (const auto& a : s.value("actions", json::array())) {
      seq.actions.push_back(device::action_from_json(a));
    }
    seq.apps = strings_from_json(s.value("apps", json::array()));
    kb.sequences.push_back(std::move(seq));
  }
  if (doc.contains("fsms")) {
    for (const auto& [app, fdoc] : doc["fsms"].items()) {
      fsm::fsm_from_json(fdoc);  // reject documents violating FSM invariants
      kb.fsms[app] = fdoc;
    }
  }
  return kb;
}

KnowledgeBase select_for(const KnowledgeBase& kb, const std::vector<std::string>& apps) {
  KnowledgeBase out;
  for (const auto& c : kb.cues) {
    if (apps_intersect(c.apps, apps)) out.cues.push_back(c);
  }
  for (const auto& s : kb.sequences) {
    if (apps_intersect(s.apps, apps)) out.sequences.push_back(s);
  }
  for (const auto& [app, doc] : kb.fsms) {
    if (apps_intersect({app}, apps)) out.fsms[app] = doc;
  }
  return out;
}

KnowledgeBase KnowledgeStore::load() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!std::filesystem::exists(path_)) return KnowledgeBase{};
  return kb_from_json(nlohmann::json::parse(util::read_file(path_)));
}

void KnowledgeStore::merge(const KnowledgeBase& delta) {
  std::lock_guard<std::mutex> lock(mutex_);
  KnowledgeBase base;
  if (std::filesystem::exists(path_)) {
    base = kb_from_json(nlohmann::json::parse(util::read_file(path_)));
  }
  std::set<std::string> cue_texts;
  for (const auto& c : base.cues) cue_texts.insert(c.text);
  for (const auto& c : delta.cues) {
    if (cue_texts.insert(c.text).second) base.cues.push_back(c);
  }
  std::set<std::pair<std::string, std::string>> seq_keys;
  for (const auto& s : base.sequences) seq_keys.emplace(s.label, s.precondition);
  for (const auto& s : delta.sequences) {
    if (seq_keys.emplace(s.label, s.precondition).second) base.sequences.push_back(s);
  }
  for (const auto& [app, doc] : delta.fsms) base.fsms[app] = doc;
  util::write_file(path_, kb_to_json(base).dump(2) + "\n");
}

void KnowledgeStore::clear() {
  std::lock_guard<std::mutex> lock(mutex_);
  util::write_file(path_, kb_to_json(KnowledgeBase{}).dump(2) + "\n");
}

}  // namespace maple::agents
