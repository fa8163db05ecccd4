#pragma once

#include <stdexcept>
#include <string>

namespace maple {

// Per-action outcome from the Reflection agent.
enum class Outcome { Success, NoChange, Fail };

struct Verdict {
  Outcome outcome = Outcome::Success;
  std::string reason;  // non-empty iff outcome != Success

  static Verdict success() { return Verdict{Outcome::Success, ""}; }
  static Verdict no_change(std::string why) {
    return Verdict{Outcome::NoChange, std::move(why)};
  }
  static Verdict fail(std::string why) {
    return Verdict{Outcome::Fail, std::move(why)};
  }

  bool is_success() const { return outcome == Outcome::Success; }

  bool operator==(const Verdict&) const = default;
};

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "Success";
    case Outcome::NoChange: return "NoChange";
    case Outcome::Fail: return "Fail";
  }
  return "Fail";
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "Success") return Outcome::Success;
  if (s == "NoChange") return Outcome::NoChange;
  if (s == "Fail") return Outcome::Fail;
  throw std::invalid_argument("unknown outcome: " + s);
}

}  // namespace maple
