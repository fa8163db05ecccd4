#include "maple/device/action.hpp"

#include <cctype>
#include <sstream>
#include <vector>

#include "maple/util/text.hpp"

namespace maple::device {

namespace util = maple::util;

std::string action_kind(const AtomicAction& a) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Tap>) return "tap";
        if constexpr (std::is_same_v<T, Type>) return "type";
        if constexpr (std::is_same_v<T, Enter>) return "enter";
        if constexpr (std::is_same_v<T, Back>) return "back";
        if constexpr (std::is_same_v<T, OpenApp>) return "open_app";
        if constexpr (std::is_same_v<T, Swipe>) return "swipe";
        if constexpr (std::is_same_v<T, SwitchApp>) return "switch_app";
        if constexpr (std::is_same_v<T, Home>) return "home";
        if constexpr (std::is_same_v<T, Wait>) return "wait";
      },
      a);
}

std::string action_call(const AtomicAction& a) {
  std::ostringstream out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Tap>) {
          out << "Tap(" << v.x << ", " << v.y << ")";
        } else if constexpr (std::is_same_v<T, Type>) {
          out << "Type('" << v.text << "')";
        } else if constexpr (std::is_same_v<T, Enter>) {
          out << "Enter()";
        } else if constexpr (std::is_same_v<T, Back>) {
          out << "Back()";
        } else if constexpr (std::is_same_v<T, OpenApp>) {
          out << "Open_App('" << v.name << "')";
        } else if constexpr (std::is_same_v<T, Swipe>) {
          out << "Swipe(" << v.x1 << ", " << v.y1 << ", " << v.x2 << ", " << v.y2 << ")";
        } else if constexpr (std::is_same_v<T, SwitchApp>) {
          out << "Switch_App()";
        } else if constexpr (std::is_same_v<T, Home>) {
          out << "Home()";
        } else if constexpr (std::is_same_v<T, Wait>) {
          out << "Wait()";
        }
      },
      a);
  return out.str();
}

nlohmann::json action_to_json(const AtomicAction& a) {
  nlohmann::json j;
  j["kind"] = action_kind(a);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Tap>) {
          j["x"] = v.x;
          j["y"] = v.y;
        } else if constexpr (std::is_same_v<T, Type>) {
          j["text"] = v.text;
        } else if constexpr (std::is_same_v<T, OpenApp>) {
          j["name"] = v.name;
        } else if constexpr (std::is_same_v<T, Swipe>) {
          j["x1"] = v.x1;
          j["y1"] = v.y1;
          j["x2"] = v.x2;
          j["y2"] = v.y2;
        }
      },
      a);
  return j;
}

AtomicAction action_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tap") return Tap{j.at("x").get<int>(), j.at("y").get<int>()};
  if (kind == "type") return Type{j.at("text").get<std::string>()};
  if (kind == "enter") return Enter{};
  if (kind == "back") return Back{};
  if (kind == "open_app") return OpenApp{j.at("name").get<std::string>()};
  if (kind == "swipe")
    return Swipe{j.at("x1").get<int>(), j.at("y1").get<int>(), j.at("x2").get<int>(),
                 j.at("y2").get<int>()};
  if (kind == "switch_app") return SwitchApp{};
  if (kind == "home") return Home{};
  if (kind == "wait") return Wait{};
  throw std::invalid_argument("unknown action kind: " + kind);
}

namespace {

// Splits "a, 'b, c', 12" into top-level arguments, respecting quotes.
std::vector<std::string> split_args(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  char quote = 0;
  for (char c : s) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      cur.push_back('\x01');  // marks a quoted argument
      continue;
    }
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
      continue;
    }
    cur.push_back(c);
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

struct Arg {
  std::string value;
  bool quoted = false;
};

Arg clean_arg(const std::string& raw) {
  Arg a;
  std::string v;
  for (char c : raw) {
    if (c == '\x01') {
      a.quoted = true;
      continue;
    }
    v.push_back(c);
  }
  a.value = a.quoted ? v : util::trim(v);
  if (a.quoted) {
    // Quoted payload keeps inner spacing but sheds the padding around quotes.
    a.value = util::trim(a.value);
  }
  return a;
}

std::optional<int> to_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
  }
  try {
    return std::stoi(s);
  } catch (...) {
    return std::nullopt;
  }
}

std::string canonical_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '_' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::optional<ParsedCall> parse_action_call(const std::string& text) {
  static const std::vector<std::string> kNames = {
      "tap", "type", "enter", "back", "openapp", "swipe", "switchapp", "home", "wait"};

  // Find the first <name>( ... ) with a known name.
  for (size_t open = text.find('('); open != std::string::npos;
       open = text.find('(', open + 1)) {
    size_t end = open;
    while (end > 0) {
      char c = text[end - 1];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ' ') {
        --end;
        if (c == ' ') continue;  // allow "Tap ("
      } else {
        break;
      }
    }
    size_t name_begin = end;
    std::string name = canonical_name(
        util::trim(std::string_view(text).substr(name_begin, open - name_begin)));
    // The identifier may be preceded by prose; keep only a trailing known name.
    const std::string* matched = nullptr;
    for (const auto& n : kNames) {
      if (name == n || (name.size() > n.size() &&
                        name.compare(name.size() - n.size(), n.size(), n) == 0)) {
        if (!matched || n.size() > matched->size()) matched = &n;
      }
    }
    if (!matched) continue;
    size_t close = text.find(')', open);
    if (close == std::string::npos) continue;

    std::string inner = text.substr(open + 1, close - open - 1);
    std::vector<Arg> args;
    if (!util::trim(inner).empty()) {
      for (const auto& raw : split_args(inner)) args.push_back(clean_arg(raw));
    }

    ParsedCall out;
    const std::string& n = *matched;
    if (n == "tap") {
      if (args.size() == 2) {
        auto x = to_int(args[0].value);
        auto y = to_int(args[1].value);
        if (!x || !y) return std::nullopt;
        out.action = Tap{*x, *y};
        return out;
      }
      if (args.size() == 1 && !args[0].value.empty()) {
        out.tap_element = args[0].value;
        return out;
      }
      return std::nullopt;
    }
    if (n == "type") {
      if (args.size() != 1 || args[0].value.empty()) return std::nullopt;
      out.action = Type{args[0].value};
      return out;
    }
    if (n == "enter") {
      out.action = Enter{};
      return out;
    }
    if (n == "back") {
      out.action = Back{};
      return out;
    }
    if (n == "openapp") {
      if (args.size() != 1 || args[0].value.empty()) return std::nullopt;
      out.action = OpenApp{args[0].value};
      return out;
    }
    if (n == "swipe") {
      if (args.size() != 4) return std::nullopt;
      int v[4];
      for (int i = 0; i < 4; ++i) {
        auto p = to_int(args[i].value);
        if (!p) return std::nullopt;
        v[i] = *p;
      }
      out.action = Swipe{v[0], v[1], v[2], v[3]};
      return out;
    }
    if (n == "switchapp") {
      out.action = SwitchApp{};
      return out;
    }
    if (n == "home") {
      out.action = Home{};
      return out;
    }
    if (n == "wait") {
      out.action = Wait{};
      return out;
    }
  }
  return std::nullopt;
}

namespace {

std::string first_quoted(const std::string& s) {
  for (char q : {'\'', '"'}) {
    size_t a = s.find(q);
    if (a == std::string::npos) continue;
    size_t b = s.find(q, a + 1);
    if (b == std::string::npos) continue;
    return s.substr(a + 1, b - a - 1);
  }
  return "";
}

std::string strip_articles(std::string s) {
  for (const char* art : {"on ", "the ", "a ", "an ", "to ", "your "}) {
    while (util::starts_with(s, art)) s = s.substr(std::string(art).size());
  }
  return s;
}

std::string clean_target(std::string s) {
  s = strip_articles(util::collapse_ws(s));
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == '!')) s.pop_back();
  return util::canonical_key(s);
}

}  // namespace

ActionToken normalize_op(const std::string& description) {
  const std::string s = util::canonical_key(description);
  const std::string quoted = first_quoted(description);
  auto rest_after = [&](size_t n) { return strip_articles(util::trim(s.substr(n))); };

  if (util::starts_with(s, "type") || util::starts_with(s, "input")) {
    std::string t = quoted.empty() ? rest_after(s.find(' ') == std::string::npos
                                                    ? s.size()
                                                    : s.find(' '))
                                   : quoted;
    return {"type", clean_target(t)};
  }
  if (util::starts_with(s, "open") || util::starts_with(s, "launch") ||
      util::starts_with(s, "reopen")) {
    std::string t = quoted.empty() ? rest_after(s.find(' ')) : quoted;
    if (t.size() >= 4 && t.compare(t.size() - 4, 4, " app") == 0) t = t.substr(0, t.size() - 4);
    return {"open_app", clean_target(t)};
  }
  if (util::starts_with(s, "swipe") || util::starts_with(s, "scroll")) return {"swipe", ""};
  if (util::starts_with(s, "wait")) return {"wait", ""};
  if (util::starts_with(s, "switch")) return {"switch_app", ""};
  if (util::starts_with(s, "go back") || util::starts_with(s, "navigate back")) return {"back", ""};
  if (util::starts_with(s, "go home") || s == "home") return {"home", ""};

  for (const char* verb : {"tap", "click", "press", "select", "choose"}) {
    if (!util::starts_with(s, verb)) continue;
    if (!quoted.empty()) return {"tap", clean_target(quoted)};
    std::string rest = strip_articles(util::trim(s.substr(std::string(verb).size())));
    if (util::starts_with(rest, "enter")) return {"enter", ""};
    if (util::starts_with(rest, "home")) return {"home", ""};
    if (util::starts_with(rest, "back")) return {"back", ""};
    return {"tap", clean_target(rest)};
  }
  return {"other", clean_target(s)};
}

std::string describe_action(const AtomicAction& a, const std::string& target) {
  return std::visit(
      [&](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Tap>) {
          if (!target.empty()) return "tap '" + target + "'";
          return "tap at (" + std::to_string(v.x) + ", " + std::to_string(v.y) + ")";
        } else if constexpr (std::is_same_v<T, Type>) {
          return "type '" + v.text + "'";
        } else if constexpr (std::is_same_v<T, Enter>) {
          return "press enter";
        } else if constexpr (std::is_same_v<T, Back>) {
          return "press back";
        } else if constexpr (std::is_same_v<T, OpenApp>) {
          return "open " + v.name + " app";
        } else if constexpr (std::is_same_v<T, Swipe>) {
          return "swipe";
        } else if constexpr (std::is_same_v<T, SwitchApp>) {
          return "switch app";
        } else if constexpr (std::is_same_v<T, Home>) {
          return "press home button";
        } else {
          return "wait";
        }
      },
      a);
}

}  // namespace maple::device
