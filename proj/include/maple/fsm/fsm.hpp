#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maple/device/action.hpp"
#include "maple/verdict.hpp"

namespace maple::fsm {

struct EmptyKeyError : std::runtime_error {
  EmptyKeyError() : std::runtime_error("state_id: app or beacon empty after canonicalization") {}
};
struct AppMismatchError : std::runtime_error {
  explicit AppMismatchError(const std::string& detail)
      : std::runtime_error("app mismatch: " + detail) {}
};
struct UnknownStateError : std::runtime_error {
  explicit UnknownStateError(const std::string& id)
      : std::runtime_error("unknown state: " + id) {}
};
struct UnsupportedFormatError : std::runtime_error {
  explicit UnsupportedFormatError(const std::string& f)
      : std::runtime_error("unsupported export format: " + f) {}
};

// 32-char lowercase hex identifier, a pure function of (app, canonical beacon).
using StateId = std::string;

// Deterministic id for a screen. The beacon is canonicalized (trimmed,
// whitespace collapsed, case-folded) before hashing so that cosmetic
// variations of the same beacon collapse to one state. Throws EmptyKeyError.
StateId state_id(const std::string& app, const std::string& beacon);

bool is_state_id(const std::string& s);

// One FSM node: a UI screen with its natural-language description, the
// predicted next screen, and entry/exit conditions.
struct UiState {
  StateId id;
  std::string app;
  std::string beacon;          // display form; identity uses the canonical form
  std::string description;     // current-screen summary
  std::string predicted_next;  // expected screen after the active subgoal
  std::string precondition;    // holds before entering this state
  std::string postcondition;   // holds after achieving this state
  bool verified = false;
  int first_seen_step = 0;
  int last_seen_step = 0;

  bool operator==(const UiState&) const = default;
};

// Edge (from --action--> to) annotated with the next state's precondition and
// the current state's postcondition, as predicted at recording time.
struct Transition {
  StateId from;
  device::AtomicAction action;
  StateId to;
  std::string pre_next;
  std::string post_current;
  int step = 0;

  bool operator==(const Transition&) const = default;
};

// Per-app state graph, grown incrementally during execution. Cross-app hops
// are not recorded here; they live in the task journal.
class AppFsm {
 public:
  AppFsm() = default;
  explicit AppFsm(std::string app) : app_(std::move(app)) {}

  const std::string& app() const { return app_; }
  void set_app(std::string app) { app_ = std::move(app); }

  // Beacon-keyed insert-or-refresh. An existing beacon keeps its node (and
  // verified flag) and takes the newer description, prediction, conditions and
  // last_seen_step; a new beacon becomes a fresh node. First inserted node
  // becomes the initial state. Returns the canonical id.
  StateId upsert_state(const UiState& node);

  // Records an edge. Both endpoints must exist; an identical
  // (from, action, to) triple is a no-op.
  void record_transition(const StateId& from, const device::AtomicAction& action,
                         const StateId& to, const std::string& pre_next,
                         const std::string& post_current, int step = 0);

  // Success marks the state verified; the flag is monotone, so NoChange/Fail
  // never clear it.
  void mark_verified(const StateId& id, const Verdict& verdict);

  bool contains(const StateId& id) const { return states_.count(id) > 0; }
  const UiState& state(const StateId& id) const;
  UiState& state_mut(const StateId& id);
  std::optional<StateId> find_by_beacon(const std::string& beacon) const;

  const std::map<StateId, UiState>& states() const { return states_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const StateId& initial() const { return initial_; }
  void set_initial(const StateId& id);
  const std::string& current_goal() const { return current_goal_; }
  void set_current_goal(std::string goal) { current_goal_ = std::move(goal); }

  size_t out_degree(const StateId& from) const;

  bool operator==(const AppFsm&) const = default;

 private:
  std::string app_;
  std::map<StateId, UiState> states_;
  std::vector<Transition> transitions_;
  std::map<std::string, StateId> beacon_index_;  // canonical beacon -> id
  StateId initial_;
  std::string current_goal_;
};

class TaskJournal;

// Recovery target search: the most recent verified state, tie-broken by
// shortest recorded path from `failed_at`, then lexicographic id. The path is
// the BFS-shortest chain of recorded transitions when one exists, otherwise
// empty (navigation back is planned separately).
struct RecoveryTarget {
  StateId target;
  std::vector<Transition> path;
};

std::optional<RecoveryTarget> find_recovery_target(const AppFsm& fsm,
                                                   const TaskJournal& journal,
                                                   const StateId& failed_at);

}  // namespace maple::fsm
