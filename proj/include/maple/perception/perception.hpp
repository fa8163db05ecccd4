#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maple/gateway/http.hpp"
#include "maple/sim/world.hpp"

namespace maple::perception {

struct BadImageError : std::runtime_error {
  explicit BadImageError(const std::string& detail)
      : std::runtime_error("bad image: " + detail) {}
};
struct ServiceUnavailableError : std::runtime_error {
  explicit ServiceUnavailableError(const std::string& detail)
      : std::runtime_error("perception service unavailable: " + detail) {}
};

struct ScreenElement {
  std::string kind;  // "text" | "icon"
  std::string content;
  int left = 0, top = 0, right = 0, bottom = 0;
  int cx = 0, cy = 0;
  double confidence = 1.0;
};

struct PerceptionResult {
  std::vector<ScreenElement> elements;  // sorted by (top, left)
  int width = 0;
  int height = 0;
  std::string source;          // "service" | "mock"
  std::string screenshot_ref;  // content digest of the input image
};

class Perceiver {
 public:
  virtual ~Perceiver() = default;
  virtual PerceptionResult perceive(const std::string& screenshot) = 0;
};

// Ground-truth perceiver: reads the screen identity embedded in the simulated
// render and returns that screen's declared elements. Pure in the image bytes.
class MockPerceiver : public Perceiver {
 public:
  explicit MockPerceiver(const sim::World& world) : world_(world) {}
  PerceptionResult perceive(const std::string& screenshot) override;

 private:
  const sim::World& world_;
};

// JSON-over-HTTP client for the remote OCR/grounding stack.
// POST {image_b64, media_type} -> {screen_size, elements:[{kind, content,
// bounds, center, confidence, region?}]}; the optional region field is
// accepted and ignored.
class ServicePerceiver : public Perceiver {
 public:
  ServicePerceiver(std::shared_ptr<gateway::HttpTransport> transport,
                   std::string host, std::string path = "/v1/perceive");
  PerceptionResult perceive(const std::string& screenshot) override;

 private:
  std::shared_ptr<gateway::HttpTransport> transport_;
  std::string host_;
  std::string path_;
};

// Case-insensitive exact-content match first, else highest-confidence
// substring match, else none.
std::optional<ScreenElement> locate(const PerceptionResult& p, const std::string& query);

}  // namespace maple::perception
