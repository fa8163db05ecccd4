#include "maple/gateway/model.hpp"

#include "maple/util/hash.hpp"

namespace maple::gateway {

const char* to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "assistant") return Role::Assistant;
  return Role::User;
}

ModelRequest ModelRequest::text(std::string tag, std::string prompt, double temperature) {
  ModelRequest req;
  req.tag = std::move(tag);
  req.temperature = temperature;
  Message m;
  m.role = Role::User;
  m.parts.push_back(MessagePart::make_text(std::move(prompt)));
  req.messages.push_back(std::move(m));
  return req;
}

nlohmann::json canonical_request(const ModelRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : m.parts) {
      if (p.kind == MessagePart::Kind::Text) {
        parts.push_back({{"type", "text"}, {"text", p.text}});
      } else {
        parts.push_back({{"type", "image"},
                         {"media_type", p.media_type},
                         {"digest", util::digest_hex(p.image)}});
      }
    }
    msgs.push_back({{"role", to_string(m.role)}, {"parts", std::move(parts)}});
  }
  return nlohmann::json{{"messages", std::move(msgs)},
                        {"temperature", req.temperature},
                        {"max_output", req.max_output}};
}

std::string replay_key(const ModelRequest& req) {
  const std::string canon = canonical_request(req).dump();
  return req.tag + "__" + util::digest_hex(canon);
}

}  // namespace maple::gateway
