#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "maple/fsm/fsm.hpp"

namespace maple::agents {

struct AllCandidatesMalformedError : std::runtime_error {
  AllCandidatesMalformedError()
      : std::runtime_error("every candidate plan was malformed") {}
};
struct UnparsableJudgmentError : std::runtime_error {
  explicit UnparsableJudgmentError(const std::string& detail)
      : std::runtime_error("unparsable judgment: " + detail) {}
};
struct NoActionParsedError : std::runtime_error {
  explicit NoActionParsedError(const std::string& reply)
      : std::runtime_error("no action parsed from: " + reply) {}
};
struct ElementNotFoundError : std::runtime_error {
  explicit ElementNotFoundError(const std::string& element)
      : std::runtime_error("element not on screen: '" + element + "'"),
        element(element) {}
  std::string element;
};
struct UnparsableVerdictError : std::runtime_error {
  explicit UnparsableVerdictError(const std::string& detail)
      : std::runtime_error("unparsable verdict: " + detail) {}
};
struct UnparsableRecoveryError : std::runtime_error {
  explicit UnparsableRecoveryError(const std::string& detail)
      : std::runtime_error("unparsable recovery plan: " + detail) {}
};

struct PlanItem {
  std::string subtask;
  std::string rationale;
  bool operator==(const PlanItem&) const = default;
};

struct Plan {
  std::vector<PlanItem> items;
  std::string source = "fresh";  // fresh | revised | recovery-fallback
  bool operator==(const Plan&) const = default;
};

struct RecoveryPlan {
  std::string thought;
  std::vector<std::string> steps;
  std::string current_subtask;  // must be one of steps
  fsm::StateId target;
  std::string goal;
};

}  // namespace maple::agents
