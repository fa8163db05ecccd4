#include "maple/fsm/fsm.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>

#include "maple/fsm/journal.hpp"
#include "maple/util/hash.hpp"
#include "maple/util/text.hpp"

namespace maple::fsm {

namespace util = maple::util;

StateId state_id(const std::string& app, const std::string& beacon) {
  const std::string a = util::canonical_key(app);
  const std::string b = util::canonical_key(beacon);
  if (a.empty() || b.empty()) throw EmptyKeyError();
  // 0x1f separator keeps ("ab","c") and ("a","bc") distinct.
  return util::digest_hex(a + '\x1f' + b);
}

bool is_state_id(const std::string& s) {
  if (s.size() != 32) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

StateId AppFsm::upsert_state(const UiState& node) {
  if (!util::iequals(node.app, app_)) {
    throw AppMismatchError(node.app + " vs fsm " + app_);
  }
  const std::string key = util::canonical_key(node.beacon);
  const StateId id = state_id(app_, node.beacon);

  auto idx = beacon_index_.find(key);
  if (idx != beacon_index_.end()) {
    UiState& existing = states_.at(idx->second);
    existing.description = node.description;
    existing.predicted_next = node.predicted_next;
    existing.precondition = node.precondition;
    existing.postcondition = node.postcondition;
    existing.last_seen_step = std::max(existing.last_seen_step, node.last_seen_step);
    return idx->second;
  }

  UiState fresh = node;
  fresh.id = id;
  states_.emplace(id, std::move(fresh));
  beacon_index_.emplace(key, id);
  if (initial_.empty()) initial_ = id;
  return id;
}

void AppFsm::record_transition(const StateId& from, const device::AtomicAction& action,
                               const StateId& to, const std::string& pre_next,
                               const std::string& post_current, int step) {
  if (!contains(from)) throw UnknownStateError(from);
  if (!contains(to)) throw UnknownStateError(to);
  for (const auto& t : transitions_) {
    if (t.from == from && t.to == to && t.action == action) return;
  }
  transitions_.push_back(Transition{from, action, to, pre_next, post_current, step});
}

void AppFsm::mark_verified(const StateId& id, const Verdict& verdict) {
  if (!contains(id)) throw UnknownStateError(id);
  if (verdict.is_success()) states_.at(id).verified = true;
}

const UiState& AppFsm::state(const StateId& id) const {
  auto it = states_.find(id);
  if (it == states_.end()) throw UnknownStateError(id);
  return it->second;
}

UiState& AppFsm::state_mut(const StateId& id) {
  auto it = states_.find(id);
  if (it == states_.end()) throw UnknownStateError(id);
  return it->second;
}

std::optional<StateId> AppFsm::find_by_beacon(const std::string& beacon) const {
  auto it = beacon_index_.find(util::canonical_key(beacon));
  if (it == beacon_index_.end()) return std::nullopt;
  return it->second;
}

void AppFsm::set_initial(const StateId& id) {
  if (!contains(id)) throw UnknownStateError(id);
  initial_ = id;
}

size_t AppFsm::out_degree(const StateId& from) const {
  return static_cast<size_t>(
      std::count_if(transitions_.begin(), transitions_.end(),
                    [&](const Transition& t) { return t.from == from; }));
}

std::optional<RecoveryTarget> find_recovery_target(const AppFsm& fsm,
                                                   const TaskJournal& journal,
                                                   const StateId& failed_at) {
  (void)journal;  // recency is tracked on the nodes themselves
  if (!fsm.contains(failed_at)) throw UnknownStateError(failed_at);

  // BFS over recorded edges from the failure point; unreachable states keep
  // distance infinity but stay eligible (the model plans navigation anyway).
  constexpr int kInf = std::numeric_limits<int>::max();
  std::map<StateId, int> dist;
  std::map<StateId, const Transition*> via;
  dist[failed_at] = 0;
  std::deque<StateId> queue{failed_at};
  while (!queue.empty()) {
    StateId cur = queue.front();
    queue.pop_front();
    for (const auto& t : fsm.transitions()) {
      if (t.from != cur) continue;
      if (dist.count(t.to)) continue;
      dist[t.to] = dist[cur] + 1;
      via[t.to] = &t;
      queue.push_back(t.to);
    }
  }

  const UiState* best = nullptr;
  int best_dist = kInf;
  for (const auto& [id, node] : fsm.states()) {
    if (!node.verified) continue;
    auto d = dist.count(id) ? dist.at(id) : kInf;
    if (!best) {
      best = &node;
      best_dist = d;
      continue;
    }
    if (node.last_seen_step != best->last_seen_step) {
      if (node.last_seen_step > best->last_seen_step) {
        best = &node;
        best_dist = d;
      }
      continue;
    }
    if (d != best_dist) {
      if (d < best_dist) {
        best = &node;
        best_dist = d;
      }
      continue;
    }
    if (id < best->id) {
      best = &node;
      best_dist = d;
    }
  }
  if (!best) return std::nullopt;

  RecoveryTarget out;
  out.target = best->id;
  if (best_dist != kInf && best->id != failed_at) {
    std::vector<Transition> path;
    StateId cur = best->id;
    while (cur != failed_at) {
      const Transition* t = via.at(cur);
      path.push_back(*t);
      cur = t->from;
    }
    std::reverse(path.begin(), path.end());
    out.path = std::move(path);
  }
  return out;
}

}  // namespace maple::fsm
