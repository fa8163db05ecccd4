#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "maple/gateway/backend.hpp"
#include "maple/gateway/model.hpp"

namespace maple::gateway {

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff{
      std::chrono::milliseconds(1000), std::chrono::milliseconds(2000),
      std::chrono::milliseconds(4000)};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct SlotError {
  std::string message;
};
// complete_many keeps results positionally aligned with the request batch.
using SlotResult = std::variant<ModelResponse, SlotError>;

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ModelBackend> backend,
                   RetryPolicy policy = {},
                   Sleeper sleeper = nullptr);

  // Retries TransportError per the policy; ReplayMissError and
  // MalformedResponseError are not retryable and propagate immediately.
  ModelResponse complete(const ModelRequest& req);

  // At most max_in_flight requests run concurrently; slot i always holds the
  // outcome of requests[i].
  std::vector<SlotResult> complete_many(const std::vector<ModelRequest>& requests,
                                        int max_in_flight = 5);

  ModelBackend& backend() { return *backend_; }

 private:
  std::shared_ptr<ModelBackend> backend_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

}  // namespace maple::gateway
