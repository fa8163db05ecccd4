#include "maple/gateway/gateway.hpp"

#include <atomic>
#include <thread>

#include "maple/gateway/sections.hpp"

namespace maple::gateway {

Gateway::Gateway(std::shared_ptr<ModelBackend> backend, RetryPolicy policy,
                 Sleeper sleeper)
    : backend_(std::move(backend)),
      policy_(std::move(policy)),
      sleeper_(std::move(sleeper)) {
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

ModelResponse Gateway::complete(const ModelRequest& req) {
  for (int attempt = 1;; ++attempt) {
    try {
      return backend_->complete(req);
    } catch (const ReplayMissError&) {
      throw;
    } catch (const MalformedResponseError&) {
      throw;
    } catch (const TransportError&) {
      if (attempt >= policy_.max_attempts) throw;
      const std::size_t slot = static_cast<std::size_t>(attempt - 1);
      if (slot < policy_.backoff.size()) sleeper_(policy_.backoff[slot]);
    }
  }
}

std::vector<SlotResult> Gateway::complete_many(
    const std::vector<ModelRequest>& requests, int max_in_flight) {
  std::vector<SlotResult> results(requests.size(), SlotError{"unresolved"});
  if (requests.empty()) return results;
  if (max_in_flight < 1) max_in_flight = 1;

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i] = complete(requests[i]);
      } catch (const std::exception& e) {
        results[i] = SlotError{e.what()};
      }
    }
  };

  const std::size_t n =
      std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), requests.size());
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace maple::gateway
