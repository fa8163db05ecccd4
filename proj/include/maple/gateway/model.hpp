#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace maple::gateway {

struct TransportError : std::runtime_error {
  explicit TransportError(const std::string& detail)
      : std::runtime_error("transport: " + detail) {}
};
struct ReplayMissError : std::runtime_error {
  explicit ReplayMissError(const std::string& key)
      : std::runtime_error("replay miss: " + key), key(key) {}
  std::string key;
};
struct AuthMissingError : std::runtime_error {
  explicit AuthMissingError(const std::string& var)
      : std::runtime_error("missing credential, set " + var) {}
};

enum class Role { System, User, Assistant };

const char* to_string(Role r);
Role role_from_string(const std::string& s);

struct MessagePart {
  enum class Kind { Text, Image } kind = Kind::Text;
  std::string text;        // Kind::Text
  std::string image;       // Kind::Image, raw bytes
  std::string media_type;  // Kind::Image, e.g. "image/png"

  static MessagePart make_text(std::string t) {
    MessagePart p;
    p.kind = Kind::Text;
    p.text = std::move(t);
    return p;
  }
  static MessagePart make_image(std::string bytes, std::string media_type) {
    MessagePart p;
    p.kind = Kind::Image;
    p.image = std::move(bytes);
    p.media_type = std::move(media_type);
    return p;
  }
};

struct Message {
  Role role = Role::User;
  std::vector<MessagePart> parts;
};

struct ModelRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  std::string tag;       // request label; half of the replay key
  int max_output = 2048;

  static ModelRequest text(std::string tag, std::string prompt, double temperature = 0.0);
};

struct TokenUsage {
  int input = 0;
  int output = 0;
};

struct ModelResponse {
  std::string text;
  std::string backend;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> usage;
};

// Canonical JSON of the request content (messages, temperature, max_output;
// image parts appear as digests). The tag is deliberately excluded: it is the
// other half of the replay key.
nlohmann::json canonical_request(const ModelRequest& req);

// "<tag>__<content digest>"; prompt-wording edits change the digest so stale
// archives miss loudly instead of replaying silently.
std::string replay_key(const ModelRequest& req);

}  // namespace maple::gateway
