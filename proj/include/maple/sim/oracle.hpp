#pragma once

#include <string>

#include "maple/eval/task.hpp"
#include "maple/gateway/backend.hpp"
#include "maple/sim/world.hpp"

namespace maple::sim {

// Deterministic stand-in for a live model, for desk-scale runs against the
// simulated world. Dispatches on the request tag and answers from the world's
// ground truth: plans mirror the task's reference operations, the state agent
// reads the scripted screen, the actor renders the subtask's action, and
// verification evaluates the machine predicates. Used directly or wrapped in
// a RecordingBackend to produce replay archives.
class SimOracleBackend : public gateway::ModelBackend {
 public:
  explicit SimOracleBackend(const World& world) : world_(world) {}

  void set_task(const eval::TaskSpec& task) { task_ = &task; }

  gateway::ModelResponse complete(const gateway::ModelRequest& req) override;
  std::string name() const override { return "oracle"; }

 private:
  std::string answer(const std::string& tag, const std::string& prompt) const;
  std::string plan_reply(const std::string& prompt) const;
  std::string describe_reply(const std::string& prompt) const;
  std::string actor_reply(const std::string& prompt) const;
  std::string verify_reply(const std::string& prompt) const;
  std::string recovery_reply(const std::string& prompt) const;

  const World& world_;
  const eval::TaskSpec* task_ = nullptr;
};

}  // namespace maple::sim
