#include "maple/gateway/live.hpp"

#include <chrono>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "maple/gateway/sections.hpp"
#include "maple/util/base64.hpp"

namespace maple::gateway {

namespace {

using nlohmann::json;

std::string require_env(const char* var) {
  const char* value = std::getenv(var);
  if (value == nullptr || *value == '\0') throw AuthMissingError(var);
  return value;
}

ModelResponse timed_call(const std::string& backend_name,
                         const std::function<std::string()>& call) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelResponse resp;
  resp.text = call();
  resp.backend = backend_name;
  resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - t0);
  return resp;
}

json parse_body(const HttpResponse& http, const std::string& who) {
  if (http.status < 200 || http.status >= 300) {
    throw TransportError(who + " returned HTTP " + std::to_string(http.status) +
                         ": " + http.body.substr(0, 400));
  }
  json doc = json::parse(http.body, nullptr, false);
  if (doc.is_discarded()) {
    throw MalformedResponseError(who + " body is not JSON");
  }
  return doc;
}

class OpenAiBackend : public ModelBackend {
 public:
  OpenAiBackend(std::string model, std::shared_ptr<HttpTransport> transport)
      : model_(std::move(model)),
        transport_(std::move(transport)),
        key_(require_env("MAPLE_OPENAI_KEY")) {}

  ModelResponse complete(const ModelRequest& req) override {
    return timed_call(name(), [&] {
      json messages = json::array();
      for (const auto& m : req.messages) {
        json content = json::array();
        for (const auto& p : m.parts) {
          if (p.kind == MessagePart::Kind::Text) {
            content.push_back({{"type", "text"}, {"text", p.text}});
          } else {
            content.push_back(
                {{"type", "image_url"},
                 {"image_url",
                  {{"url", "data:" + p.media_type + ";base64," +
                               util::base64_encode(p.image)}}}});
          }
        }
        messages.push_back({{"role", to_string(m.role)}, {"content", std::move(content)}});
      }
      const json body{{"model", model_},
                      {"messages", std::move(messages)},
                      {"temperature", req.temperature},
                      {"max_tokens", req.max_output}};
      const auto http = transport_->post(
          "https://api.openai.com", "/v1/chat/completions",
          {{"Authorization", "Bearer " + key_}}, body.dump(), "application/json");
      const json doc = parse_body(http, "openai");
      if (!doc.contains("choices") || doc["choices"].empty()) {
        throw MalformedResponseError("openai reply has no choices");
      }
      return doc["choices"][0]["message"]["content"].get<std::string>();
    });
  }

  std::string name() const override { return "openai/" + model_; }

 private:
  std::string model_;
  std::shared_ptr<HttpTransport> transport_;
  std::string key_;
};

class AnthropicBackend : public ModelBackend {
 public:
  AnthropicBackend(std::string model, std::shared_ptr<HttpTransport> transport)
      : model_(std::move(model)),
        transport_(std::move(transport)),
        key_(require_env("MAPLE_ANTHROPIC_KEY")) {}

  ModelResponse complete(const ModelRequest& req) override {
    return timed_call(name(), [&] {
      // The messages API carries the system prompt out of band.
      std::string system_text;
      json messages = json::array();
      for (const auto& m : req.messages) {
        if (m.role == Role::System) {
          for (const auto& p : m.parts) {
            if (p.kind == MessagePart::Kind::Text) {
              if (!system_text.empty()) system_text += "\n";
              system_text += p.text;
            }
          }
          continue;
        }
        json content = json::array();
        for (const auto& p : m.parts) {
          if (p.kind == MessagePart::Kind::Text) {
            content.push_back({{"type", "text"}, {"text", p.text}});
          } else {
            content.push_back({{"type", "image"},
                               {"source",
                                {{"type", "base64"},
                                 {"media_type", p.media_type},
                                 {"data", util::base64_encode(p.image)}}}});
          }
        }
        messages.push_back({{"role", to_string(m.role)}, {"content", std::move(content)}});
      }
      json body{{"model", model_},
                {"max_tokens", req.max_output},
                {"temperature", req.temperature},
                {"messages", std::move(messages)}};
      if (!system_text.empty()) body["system"] = system_text;
      const auto http = transport_->post(
          "https://api.anthropic.com", "/v1/messages",
          {{"x-api-key", key_}, {"anthropic-version", "2023-06-01"}}, body.dump(),
          "application/json");
      const json doc = parse_body(http, "anthropic");
      if (!doc.contains("content") || doc["content"].empty()) {
        throw MalformedResponseError("anthropic reply has no content");
      }
      std::string text;
      for (const auto& block : doc["content"]) {
        if (block.value("type", "") == "text") text += block.value("text", "");
      }
      return text;
    });
  }

  std::string name() const override { return "anthropic/" + model_; }

 private:
  std::string model_;
  std::shared_ptr<HttpTransport> transport_;
  std::string key_;
};

class GoogleBackend : public ModelBackend {
 public:
  GoogleBackend(std::string model, std::shared_ptr<HttpTransport> transport)
      : model_(std::move(model)),
        transport_(std::move(transport)),
        key_(require_env("MAPLE_GOOGLE_KEY")) {}

  ModelResponse complete(const ModelRequest& req) override {
    return timed_call(name(), [&] {
      json system_parts = json::array();
      json contents = json::array();
      for (const auto& m : req.messages) {
        json parts = json::array();
        for (const auto& p : m.parts) {
          if (p.kind == MessagePart::Kind::Text) {
            parts.push_back({{"text", p.text}});
          } else {
            parts.push_back({{"inline_data",
                              {{"mime_type", p.media_type},
                               {"data", util::base64_encode(p.image)}}}});
          }
        }
        if (m.role == Role::System) {
          for (auto& p : parts) system_parts.push_back(std::move(p));
        } else {
          contents.push_back(
              {{"role", m.role == Role::Assistant ? "model" : "user"},
               {"parts", std::move(parts)}});
        }
      }
      json body{{"contents", std::move(contents)},
                {"generationConfig",
                 {{"temperature", req.temperature},
                  {"maxOutputTokens", req.max_output}}}};
      if (!system_parts.empty()) {
        body["systemInstruction"] = {{"parts", std::move(system_parts)}};
      }
      const auto http = transport_->post(
          "https://generativelanguage.googleapis.com",
          "/v1beta/models/" + model_ + ":generateContent?key=" + key_, {},
          body.dump(), "application/json");
      const json doc = parse_body(http, "google");
      if (!doc.contains("candidates") || doc["candidates"].empty()) {
        throw MalformedResponseError("google reply has no candidates");
      }
      std::string text;
      for (const auto& part : doc["candidates"][0]["content"]["parts"]) {
        text += part.value("text", "");
      }
      return text;
    });
  }

  std::string name() const override { return "google/" + model_; }

 private:
  std::string model_;
  std::shared_ptr<HttpTransport> transport_;
  std::string key_;
};

}  // namespace

std::shared_ptr<ModelBackend> make_openai_backend(
    std::string model, std::shared_ptr<HttpTransport> transport) {
  return std::make_shared<OpenAiBackend>(std::move(model), std::move(transport));
}

std::shared_ptr<ModelBackend> make_anthropic_backend(
    std::string model, std::shared_ptr<HttpTransport> transport) {
  return std::make_shared<AnthropicBackend>(std::move(model), std::move(transport));
}

std::shared_ptr<ModelBackend> make_google_backend(
    std::string model, std::shared_ptr<HttpTransport> transport) {
  return std::make_shared<GoogleBackend>(std::move(model), std::move(transport));
}

}  // namespace maple::gateway
