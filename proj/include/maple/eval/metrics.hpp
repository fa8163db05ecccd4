#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maple/device/action.hpp"
#include "maple/eval/task.hpp"
#include "maple/sim/world.hpp"

namespace maple::eval {

struct EmptyReferenceError : std::runtime_error {
  EmptyReferenceError() : std::runtime_error("reference operation list is empty") {}
};
struct MissingPredicateError : std::runtime_error {
  explicit MissingPredicateError(std::size_t index)
      : std::runtime_error("rubric " + std::to_string(index) +
                           " has no machine predicate"),
        index(index) {}
  std::size_t index;
};

struct Fraction {
  long long num = 0;
  long long den = 0;
};

// round(100*num/den, 2), half away from zero.
double percent(long long num, long long den);
std::string format_percent(double value);

// Each rubric's predicate evaluated over the executed-action trace plus the
// final world state.
Fraction score_rubrics(const std::vector<device::ActionToken>& executed,
                       const sim::World& world, const std::vector<Rubric>& rubrics);

// Longest common subsequence under (kind, canonical target) equality; the
// denominator is the reference length, so insertions never hurt.
Fraction action_accuracy(const std::vector<device::ActionToken>& executed,
                         const std::vector<device::ActionToken>& reference);

struct TaskResult {
  std::string task_id;
  std::string status;  // success | terminated | step-budget-exhausted
  Fraction satisfaction;   // fulfilled rubrics
  Fraction accuracy;       // matched reference steps
  long long recovery_episodes = 0;
  long long recovered = 0;
};

struct MetricValue {
  long long num = 0;
  long long den = 0;
  double pct = 0.0;
};

struct MetricsReport {
  std::optional<MetricValue> ss, aa, tr, sr, rs;
  std::vector<TaskResult> tasks;
};

MetricsReport compute_metrics(const std::vector<TaskResult>& results);

std::string report_to_text(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace maple::eval
