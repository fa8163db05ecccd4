#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

namespace maple::device {

// The nine atomic toolbox operations.
struct Tap {
  int x = 0;
  int y = 0;
  bool operator==(const Tap&) const = default;
};
struct Type {
  std::string text;
  bool operator==(const Type&) const = default;
};
struct Enter {
  bool operator==(const Enter&) const = default;
};
struct Back {
  bool operator==(const Back&) const = default;
};
struct OpenApp {
  std::string name;
  bool operator==(const OpenApp&) const = default;
};
struct Swipe {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool operator==(const Swipe&) const = default;
};
struct SwitchApp {
  bool operator==(const SwitchApp&) const = default;
};
struct Home {
  bool operator==(const Home&) const = default;
};
struct Wait {
  bool operator==(const Wait&) const = default;
};

using AtomicAction =
    std::variant<Tap, Type, Enter, Back, OpenApp, Swipe, SwitchApp, Home, Wait>;

// Lowercase kind tag ("tap", "type", "enter", ...). Stable wire value.
std::string action_kind(const AtomicAction& a);

// Call syntax used in prompts and logs, e.g. Tap(120, 44) or Open_App('Maps').
std::string action_call(const AtomicAction& a);

nlohmann::json action_to_json(const AtomicAction& a);
AtomicAction action_from_json(const nlohmann::json& j);

// Parses actor output in call syntax. Tap accepts either numeric coordinates
// or a quoted element name; the element form is returned via `element` and the
// caller resolves it to coordinates through perception.
struct ParsedCall {
  std::optional<AtomicAction> action;  // set when the call is fully specified
  std::optional<std::string> tap_element;  // set for Tap('<element>')
};

std::optional<ParsedCall> parse_action_call(const std::string& text);

// Normalized (kind, target) pair used for step matching. Works on both
// executed-action descriptions and human reference operation strings such as
// "tap on the search bar" or "type 'Venice, Italy'".
struct ActionToken {
  std::string kind;
  std::string target;
  bool operator==(const ActionToken&) const = default;
};

ActionToken normalize_op(const std::string& description);

// Canonical textual description of an executed action, in the same register
// as reference operations ("tap 'Search bar'", "open Shop app", ...). The
// optional target carries the tapped element's content when known.
std::string describe_action(const AtomicAction& a, const std::string& target = "");

}  // namespace maple::device
