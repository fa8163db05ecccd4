#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/device/action.hpp"

namespace maple::sim {

struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& path)
      : std::runtime_error("world schema error at " + path), path(path) {}
  std::string path;
};
struct DanglingScreenError : std::runtime_error {
  explicit DanglingScreenError(const std::string& ref)
      : std::runtime_error("rule references missing screen " + ref), ref(ref) {}
  std::string ref;
};
struct PredicateError : std::runtime_error {
  explicit PredicateError(const std::string& detail)
      : std::runtime_error("bad predicate: " + detail) {}
};

struct Bounds {
  int left = 0, top = 0, right = 0, bottom = 0;
  int cx() const { return (left + right) / 2; }
  int cy() const { return (top + bottom) / 2; }
};

struct SimElement {
  std::string kind;  // "text" | "icon"
  std::string content;
  Bounds bounds;
};

struct Trigger {
  std::string kind;     // action kind tag
  std::string element;  // tap: element content the tap must land on
  std::string text;     // type: optional substring the typed text must contain
};

struct Mutation {
  enum class Kind { SetVar, IncVar, SetFlag } kind = Kind::SetFlag;
  std::string name;
  std::string value;
};

struct Rule {
  std::string screen;
  Trigger trigger;
  std::string next;
  std::vector<Mutation> mutations;
  std::optional<std::string> misroute_to;
};

struct ScreenScript {
  std::string id;
  std::string beacon;
  std::string entry;  // machine-checkable entry predicate
  std::vector<SimElement> elements;
};

struct AppScript {
  std::string name;
  std::string initial;
  std::map<std::string, ScreenScript> screens;
  std::vector<Rule> rules;
};

struct FaultPolicy {
  std::uint64_t seed = 0;
  double p_noop = 0.0;      // probability a Tap is silently dropped
  double p_misroute = 0.0;  // probability a matched rule with a declared
                            // misroute target goes there instead
};

struct FaultEvent {
  int step = 0;  // 1-based executed-action index
  std::string kind;  // "noop" | "misroute"
  std::string app;
  std::string screen;
  std::string detail;
};

struct RenderResult {
  std::string image;  // PGM P5 bytes
  std::vector<SimElement> elements;
  int width = 0;
  int height = 0;
};

// Reserved foreground name for the app drawer.
inline constexpr const char* kLauncher = "launcher";

class World {
 public:
  static World load(const std::string& path);
  static World from_json(const nlohmann::json& doc, const std::string& origin = "<memory>");

  void set_fault_policy(const FaultPolicy& policy);
  const FaultPolicy& fault_policy() const { return policy_; }

  // Applies the first matching rule; unmatched actions leave the screen as
  // is. Faults are consulted before rule application.
  void step(const device::AtomicAction& action);

  RenderResult render();

  const std::string& foreground() const { return foreground_; }
  const std::string& screen_of(const std::string& app) const;
  const ScreenScript& screen_script(const std::string& app, const std::string& id) const;
  const ScreenScript* current_screen() const;  // null on the launcher
  const AppScript* app_script(const std::string& name) const;
  std::vector<std::string> app_names() const;
  bool has_app(const std::string& name) const;
  const std::vector<SimElement>& launcher_icons() const { return launcher_icons_; }

  int step_count() const { return step_count_; }
  std::int64_t clock_ms() const { return clock_ms_; }
  const std::vector<FaultEvent>& fault_events() const { return faults_; }

  const std::string& var(const std::string& name) const;
  bool flag(const std::string& name) const { return flags_.count(name) > 0; }
  bool visited(const std::string& app, const std::string& screen) const;

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  void enter(const std::string& app, const std::string& screen);
  void apply_mutations(const std::vector<Mutation>& mutations);
  bool trigger_matches(const Trigger& trig, const device::AtomicAction& action,
                       const ScreenScript& screen) const;

  int width_ = 480;
  int height_ = 800;
  std::vector<AppScript> apps_;
  std::vector<SimElement> launcher_icons_;

  std::string foreground_ = kLauncher;
  std::string previous_foreground_;
  std::map<std::string, std::string> app_screen_;
  std::map<std::string, std::string> vars_;
  std::set<std::string> flags_;
  std::set<std::string> visited_;

  FaultPolicy policy_;
  std::mt19937_64 rng_;
  std::vector<FaultEvent> faults_;
  int step_count_ = 0;
  std::int64_t clock_ms_ = 0;

  mutable std::map<std::string, std::string> render_cache_;
};

// Shared predicate language over world + executed-action trace:
//   true | screen:<app>/<id> | foreground:<app> | flag:<name> |
//   var:<name>=<value> | visited:<app>/<id> | action:<kind>[:<target>]
// joined with "&&". Unknown forms raise PredicateError.
bool eval_predicate(const World& world, const std::string& predicate,
                    const std::vector<device::ActionToken>& executed);

}  // namespace maple::sim
