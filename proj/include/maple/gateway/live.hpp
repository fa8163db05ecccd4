#pragma once

#include <memory>
#include <string>

#include "maple/gateway/backend.hpp"
#include "maple/gateway/http.hpp"

namespace maple::gateway {

// Live chat backends. Credentials come from the environment:
//   openai    MAPLE_OPENAI_KEY
//   anthropic MAPLE_ANTHROPIC_KEY
//   google    MAPLE_GOOGLE_KEY
// Construction throws AuthMissingError when the variable is unset.
std::shared_ptr<ModelBackend> make_openai_backend(
    std::string model, std::shared_ptr<HttpTransport> transport);
std::shared_ptr<ModelBackend> make_anthropic_backend(
    std::string model, std::shared_ptr<HttpTransport> transport);
std::shared_ptr<ModelBackend> make_google_backend(
    std::string model, std::shared_ptr<HttpTransport> transport);

}  // namespace maple::gateway
